//! Declarative simulation configuration: parsing, validation, and the
//! resolved in-memory model.
//!
//! A configuration is a single JSON document with top-level keys `events`,
//! `places`, `people`, `aerosol`, and `options`. Clock times are written as
//! `"HH:MM"` strings and held internally as integer minutes since midnight;
//! the whole simulation runs on an integer-minute clock. The full schema is
//! documented in `docs/config-schema.md`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Errors produced while parsing or validating a configuration document.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The document is not well-formed JSON. Position is 1-based.
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// A field not present in the schema was encountered.
    #[error("unknown field at line {line}, column {column}: {message}")]
    UnknownField {
        line: usize,
        column: usize,
        message: String,
    },
    /// A name refers to an entity that does not exist in the document.
    #[error("{context}: undefined {kind} `{name}`")]
    UndefinedReference {
        kind: &'static str,
        name: String,
        context: String,
    },
    /// Two entities of the same kind share a name.
    #[error("duplicate {kind} name `{name}`")]
    Duplicate { kind: &'static str, name: String },
    /// A structural invariant does not hold; the message names it.
    #[error("{entity}: invariant violated on `{field}`: {message}")]
    Invariant {
        entity: String,
        field: &'static str,
        message: String,
    },
}

/// A `[start, end)` clock window in minutes since midnight.
///
/// Serialized as a two-element array of `"HH:MM"` strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    pub start: u32,
    pub end: u32,
}

impl TimeWindow {
    pub fn length(&self) -> u32 {
        self.end.saturating_sub(self.start)
    }

    pub fn contains(&self, minute: u32) -> bool {
        self.start <= minute && minute < self.end
    }
}

/// Parse `"HH:MM"` into minutes since midnight. `"24:00"` is accepted as an
/// end-of-day marker (1440).
pub fn parse_clock(text: &str) -> Result<u32, String> {
    let (h, m) = text
        .split_once(':')
        .ok_or_else(|| format!("expected HH:MM, got `{text}`"))?;
    let hours: u32 = h.parse().map_err(|_| format!("bad hour in `{text}`"))?;
    let minutes: u32 = m.parse().map_err(|_| format!("bad minute in `{text}`"))?;
    if minutes > 59 || hours > 24 || (hours == 24 && minutes != 0) {
        return Err(format!("`{text}` is not a valid clock time"));
    }
    Ok(hours * 60 + minutes)
}

/// Format minutes since midnight as `"HH:MM"`.
pub fn format_clock(minutes: u32) -> String {
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

impl Serialize for TimeWindow {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(2)?;
        tup.serialize_element(&format_clock(self.start))?;
        tup.serialize_element(&format_clock(self.end))?;
        tup.end()
    }
}

impl<'de> Deserialize<'de> for TimeWindow {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct WindowVisitor;
        impl<'de> Visitor<'de> for WindowVisitor {
            type Value = TimeWindow;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a [\"HH:MM\", \"HH:MM\"] pair")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<TimeWindow, A::Error> {
                let start: String = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let end: String = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<serde::de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(TimeWindow {
                    start: parse_clock(&start).map_err(de::Error::custom)?,
                    end: parse_clock(&end).map_err(de::Error::custom)?,
                })
            }
        }
        deserializer.deserialize_seq(WindowVisitor)
    }
}

mod clock_serde {
    use super::{format_clock, parse_clock};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(minutes: &u32, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_clock(*minutes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<u32, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_clock(&text).map_err(serde::de::Error::custom)
    }
}

/// An activity template: when it may happen, how long it lasts, how often it
/// repeats, and its aerosol-relevant mask setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventModel {
    pub name: String,
    /// Links the event to places offering the same activity.
    pub activity: String,
    /// Clock windows during which the activity may run; disjoint after sort.
    pub schedule: Vec<TimeWindow>,
    /// Duration bounds in whole minutes.
    pub duration_min: u32,
    pub duration_max: u32,
    /// Minimum repetitions an agent should complete.
    #[serde(default)]
    pub repetitions_min: u32,
    /// Maximum repetitions; absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions_max: Option<u32>,
    /// Mask efficiency while performing this activity, in [0, 1].
    #[serde(default)]
    pub mask_efficiency: f64,
    /// Collective activities are initiated by one agent and draft others.
    #[serde(default)]
    pub collective: bool,
}

/// Mechanical (recirculating) ventilation: either a direct rate in 1/h or an
/// AC system description from which the rate is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MechanicalVentilation {
    Rate(f64),
    System(VentilationSpec),
}

impl Default for MechanicalVentilation {
    fn default() -> Self {
        MechanicalVentilation::Rate(0.0)
    }
}

/// AC system parameters: flow rate in m³/h plus removal fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VentilationSpec {
    pub flow_rate: f64,
    #[serde(default)]
    pub filter_efficiency: f64,
    #[serde(default)]
    pub duct_removal: f64,
    #[serde(default)]
    pub extra_removal: f64,
}

/// Mechanical ventilation rate of an AC system, in air changes per hour:
/// `flow_rate / volume * min(filter + ducts + extra, 1)`.
pub fn derive_mechanical_rate(spec: &VentilationSpec, volume: f64) -> f64 {
    let removal = (spec.filter_efficiency + spec.duct_removal + spec.extra_removal).min(1.0);
    spec.flow_rate / volume * removal
}

/// A room: geometry, ventilation, capacity, and department access.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Place {
    pub name: String,
    /// Activity hosted here; must match some event model's activity.
    pub activity: String,
    pub building: String,
    /// Departments admitted; an empty list admits everyone.
    #[serde(default)]
    pub departments_allowed: Vec<String>,
    /// Floor area in m².
    pub area: f64,
    /// Ceiling height in m.
    pub height: f64,
    /// Maximum simultaneous occupants.
    pub capacity: u32,
    /// Natural (outdoor-air) ventilation rate in 1/h.
    pub ventilation_natural: f64,
    #[serde(default)]
    pub ventilation_mechanical: MechanicalVentilation,
}

impl Place {
    pub fn volume(&self) -> f64 {
        self.area * self.height
    }

    /// Resolved mechanical ventilation rate in 1/h.
    pub fn mechanical_rate(&self) -> f64 {
        match &self.ventilation_mechanical {
            MechanicalVentilation::Rate(r) => *r,
            MechanicalVentilation::System(spec) => derive_mechanical_rate(spec, self.volume()),
        }
    }

    pub fn admits(&self, department: &str) -> bool {
        self.departments_allowed.is_empty()
            || self.departments_allowed.iter().any(|d| d == department)
    }
}

/// An agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Person {
    pub name: String,
    pub building: String,
    pub department: String,
}

/// Physical constants assumed uniform across the building.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AerosolConstants {
    /// Outdoor background CO₂ in ppm.
    pub co2_background: f64,
    /// Ambient pressure in atm.
    pub pressure: f64,
    /// Ambient temperature in °C.
    pub temperature: f64,
    /// Mean breathing flow rate in m³/h.
    pub breathing_rate: f64,
    /// CO₂ emission rate per person in L/s at 273.15 K and 1 atm.
    pub co2_rate_per_person: f64,
    /// Quanta exhalation rate of an infected person in quanta/h.
    pub quanta_exhalation: f64,
    /// Viral decay rate in 1/h.
    pub virus_decay: f64,
    /// Deposition-to-surfaces rate in 1/h.
    pub deposition: f64,
    /// Quanta enhancement factor for variants, dimensionless.
    pub quanta_enhancement: f64,
    /// Fraction of people wearing masks, in [0, 1].
    pub mask_fraction: f64,
}

impl Default for AerosolConstants {
    fn default() -> Self {
        AerosolConstants {
            co2_background: 415.0,
            pressure: 0.95,
            temperature: 20.0,
            breathing_rate: 0.52,
            co2_rate_per_person: 0.005,
            quanta_exhalation: 25.0,
            virus_decay: 0.62,
            deposition: 0.3,
            quanta_enhancement: 1.0,
            mask_fraction: 1.0,
        }
    }
}

fn default_day_start() -> u32 {
    8 * 60
}

fn default_day_end() -> u32 {
    17 * 60
}

fn default_alpha() -> f64 {
    0.5
}

/// Run-level options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationOptions {
    /// Day boundaries, minutes since midnight.
    #[serde(with = "clock_serde")]
    pub day_start: u32,
    #[serde(with = "clock_serde")]
    pub day_end: u32,
    /// Number of infected agents drawn at run start.
    pub n_infected: u32,
    /// Default seed; the CLI and batch runner may override it.
    pub seed: u64,
    /// Mid-level of the piecewise-linear priority function, in (0, 1).
    pub priority_alpha: f64,
    /// Event model agents fall back to when nothing is eligible.
    /// Defaults to the first non-collective event model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_event: Option<String>,
    /// Explicit start places; persons not listed use their department's
    /// default work place.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub initial_occupancy: BTreeMap<String, Vec<String>>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            day_start: default_day_start(),
            day_end: default_day_end(),
            n_infected: 0,
            seed: 0,
            priority_alpha: default_alpha(),
            fallback_event: None,
            initial_occupancy: BTreeMap::new(),
        }
    }
}

/// A fully resolved, validated simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub events: Vec<EventModel>,
    #[serde(default)]
    pub places: Vec<Place>,
    #[serde(default)]
    pub people: Vec<Person>,
    #[serde(default)]
    pub aerosol: AerosolConstants,
    #[serde(default)]
    pub options: SimulationOptions,

    /// Index of the fallback event model, resolved during validation.
    #[serde(skip)]
    pub fallback_event_idx: Option<usize>,
    /// Start place index per person, resolved during validation.
    #[serde(skip)]
    pub start_place: Vec<usize>,
}

impl SimulationConfig {
    /// Sorted unique department names, derived from the people list.
    pub fn departments(&self) -> Vec<String> {
        let mut set: Vec<String> = self
            .people
            .iter()
            .map(|p| p.department.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        set.sort();
        set
    }

    pub fn place_index(&self, name: &str) -> Option<usize> {
        self.places.iter().position(|p| p.name == name)
    }

    pub fn event_index(&self, name: &str) -> Option<usize> {
        self.events.iter().position(|e| e.name == name)
    }

    pub fn person_index(&self, name: &str) -> Option<usize> {
        self.people.iter().position(|p| p.name == name)
    }

    /// SHA-256 of the canonical serialization; embedded in exports so any
    /// result file can be traced back to the exact configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<SimulationConfig, ConfigError> {
    let mut config: SimulationConfig = serde_json::from_str(text).map_err(classify_serde_error)?;
    validate(&mut config)?;
    Ok(config)
}

/// Serialize a resolved configuration back to its documented JSON form.
/// Parsing the output yields a configuration equal to the input.
pub fn serialize_config(config: &SimulationConfig) -> String {
    let mut out = serde_json::to_string_pretty(config).expect("config serializes");
    out.push('\n');
    out
}

fn classify_serde_error(err: serde_json::Error) -> ConfigError {
    let (line, column) = (err.line(), err.column());
    let message = err.to_string();
    if err.is_data() && message.contains("unknown field") {
        ConfigError::UnknownField {
            line,
            column,
            message,
        }
    } else {
        ConfigError::Syntax {
            line,
            column,
            message,
        }
    }
}

fn invariant(entity: impl Into<String>, field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invariant {
        entity: entity.into(),
        field,
        message: message.into(),
    }
}

fn check_unique<'a, I: Iterator<Item = &'a str>>(
    kind: &'static str,
    names: I,
) -> Result<(), ConfigError> {
    let mut seen = HashSet::new();
    for name in names {
        if !seen.insert(name) {
            return Err(ConfigError::Duplicate {
                kind,
                name: name.to_string(),
            });
        }
    }
    Ok(())
}

fn validate(config: &mut SimulationConfig) -> Result<(), ConfigError> {
    check_unique("event", config.events.iter().map(|e| e.name.as_str()))?;
    check_unique("place", config.places.iter().map(|p| p.name.as_str()))?;
    check_unique("person", config.people.iter().map(|p| p.name.as_str()))?;

    for event in &mut config.events {
        validate_event(event)?;
    }

    let activities: HashSet<&str> = config.events.iter().map(|e| e.activity.as_str()).collect();
    for place in &config.places {
        validate_place(place)?;
        if !activities.contains(place.activity.as_str()) {
            return Err(ConfigError::UndefinedReference {
                kind: "activity",
                name: place.activity.clone(),
                context: format!("place `{}`", place.name),
            });
        }
    }

    validate_aerosol(&config.aerosol)?;
    validate_options(config)?;
    resolve_fallback(config)?;
    resolve_start_places(config)?;
    Ok(())
}

fn validate_event(event: &mut EventModel) -> Result<(), ConfigError> {
    let entity = format!("event `{}`", event.name);
    if event.schedule.is_empty() {
        return Err(invariant(&entity, "schedule", "at least one window required"));
    }
    event.schedule.sort_by_key(|w| (w.start, w.end));
    for window in &event.schedule {
        if window.start >= window.end {
            return Err(invariant(
                &entity,
                "schedule",
                format!(
                    "window {}-{} must have start < end",
                    format_clock(window.start),
                    format_clock(window.end)
                ),
            ));
        }
    }
    for pair in event.schedule.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(invariant(
                &entity,
                "schedule",
                format!(
                    "windows {}-{} and {}-{} overlap",
                    format_clock(pair[0].start),
                    format_clock(pair[0].end),
                    format_clock(pair[1].start),
                    format_clock(pair[1].end)
                ),
            ));
        }
    }
    if event.duration_min < 1 {
        return Err(invariant(&entity, "duration_min", "must be >= 1 minute"));
    }
    if event.duration_min > event.duration_max {
        return Err(invariant(
            &entity,
            "duration_min",
            "must be <= duration_max",
        ));
    }
    let longest = event.schedule.iter().map(TimeWindow::length).max().unwrap_or(0);
    if event.duration_max > longest {
        return Err(invariant(
            &entity,
            "duration_max",
            format!("{} min exceeds the longest window ({} min)", event.duration_max, longest),
        ));
    }
    if let Some(max) = event.repetitions_max {
        if event.repetitions_min > max {
            return Err(invariant(
                &entity,
                "repetitions_min",
                "must be <= repetitions_max",
            ));
        }
    }
    if !(0.0..=1.0).contains(&event.mask_efficiency) {
        return Err(invariant(
            &entity,
            "mask_efficiency",
            "must lie in [0, 1]",
        ));
    }
    Ok(())
}

// negated comparisons are deliberate: NaN must fail validation
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn validate_place(place: &Place) -> Result<(), ConfigError> {
    let entity = format!("place `{}`", place.name);
    if !(place.area > 0.0) {
        return Err(invariant(&entity, "area", "must be > 0"));
    }
    if !(place.height > 0.0) {
        return Err(invariant(&entity, "height", "must be > 0"));
    }
    if place.capacity < 1 {
        return Err(invariant(&entity, "capacity", "must be >= 1"));
    }
    if !(place.ventilation_natural >= 0.0) {
        return Err(invariant(&entity, "ventilation_natural", "must be >= 0"));
    }
    if let MechanicalVentilation::System(spec) = &place.ventilation_mechanical {
        if !(spec.flow_rate >= 0.0) {
            return Err(invariant(&entity, "flow_rate", "must be >= 0"));
        }
        for (field, value) in [
            ("filter_efficiency", spec.filter_efficiency),
            ("duct_removal", spec.duct_removal),
            ("extra_removal", spec.extra_removal),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(invariant(entity.clone(), field, "must lie in [0, 1]"));
            }
        }
    }
    if !(place.mechanical_rate() >= 0.0) {
        return Err(invariant(&entity, "ventilation_mechanical", "must be >= 0"));
    }
    Ok(())
}

// negated comparisons are deliberate: NaN must fail validation
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn validate_aerosol(constants: &AerosolConstants) -> Result<(), ConfigError> {
    let entity = "aerosol constants";
    for (field, value) in [
        ("co2_background", constants.co2_background),
        ("pressure", constants.pressure),
        ("temperature", constants.temperature),
        ("breathing_rate", constants.breathing_rate),
        ("co2_rate_per_person", constants.co2_rate_per_person),
        ("quanta_exhalation", constants.quanta_exhalation),
        ("virus_decay", constants.virus_decay),
        ("deposition", constants.deposition),
        ("quanta_enhancement", constants.quanta_enhancement),
    ] {
        if !(value > 0.0) {
            return Err(invariant(entity, field, "must be > 0"));
        }
    }
    if !(0.0..=1.0).contains(&constants.mask_fraction) {
        return Err(invariant(entity, "mask_fraction", "must lie in [0, 1]"));
    }
    Ok(())
}

fn validate_options(config: &SimulationConfig) -> Result<(), ConfigError> {
    let options = &config.options;
    let entity = "options";
    if options.day_start >= options.day_end {
        return Err(invariant(entity, "day_start", "must be < day_end"));
    }
    if !(options.priority_alpha > 0.0 && options.priority_alpha < 1.0) {
        return Err(invariant(entity, "priority_alpha", "must lie in (0, 1)"));
    }
    if options.n_infected as usize > config.people.len() {
        return Err(invariant(
            entity,
            "n_infected",
            format!(
                "{} infected exceeds {} people",
                options.n_infected,
                config.people.len()
            ),
        ));
    }
    Ok(())
}

fn resolve_fallback(config: &mut SimulationConfig) -> Result<(), ConfigError> {
    let idx = match &config.options.fallback_event {
        Some(name) => {
            let idx = config.event_index(name).ok_or_else(|| ConfigError::UndefinedReference {
                kind: "event",
                name: name.clone(),
                context: "options.fallback_event".into(),
            })?;
            if config.events[idx].collective {
                return Err(invariant(
                    "options",
                    "fallback_event",
                    "fallback event must not be collective",
                ));
            }
            Some(idx)
        }
        None => config.events.iter().position(|e| !e.collective),
    };
    if idx.is_none() && !config.people.is_empty() {
        return Err(invariant(
            "options",
            "fallback_event",
            "no non-collective event model available as fallback",
        ));
    }
    config.fallback_event_idx = idx;
    Ok(())
}

/// Assign each person a start place. Explicit `initial_occupancy` entries
/// win; everyone else goes to the most specific place hosting the fallback
/// activity that admits their department (fewest departments listed, ties by
/// document order), skipping places already filled to capacity.
fn resolve_start_places(config: &mut SimulationConfig) -> Result<(), ConfigError> {
    let mut assigned: Vec<Option<usize>> = vec![None; config.people.len()];
    let mut load = vec![0u32; config.places.len()];

    for (place_name, person_names) in &config.options.initial_occupancy {
        let place_idx = config.place_index(place_name).ok_or_else(|| {
            ConfigError::UndefinedReference {
                kind: "place",
                name: place_name.clone(),
                context: "options.initial_occupancy".into(),
            }
        })?;
        for person_name in person_names {
            let person_idx = config.person_index(person_name).ok_or_else(|| {
                ConfigError::UndefinedReference {
                    kind: "person",
                    name: person_name.clone(),
                    context: format!("options.initial_occupancy[`{place_name}`]"),
                }
            })?;
            if assigned[person_idx].is_some() {
                return Err(ConfigError::Duplicate {
                    kind: "initial_occupancy person",
                    name: person_name.clone(),
                });
            }
            let place = &config.places[place_idx];
            if !place.admits(&config.people[person_idx].department) {
                return Err(invariant(
                    format!("options.initial_occupancy[`{place_name}`]"),
                    "departments_allowed",
                    format!(
                        "person `{person_name}` of department `{}` is not admitted",
                        config.people[person_idx].department
                    ),
                ));
            }
            assigned[person_idx] = Some(place_idx);
            load[place_idx] += 1;
            if load[place_idx] > place.capacity {
                return Err(invariant(
                    format!("options.initial_occupancy[`{place_name}`]"),
                    "capacity",
                    format!("{} occupants exceed capacity {}", load[place_idx], place.capacity),
                ));
            }
        }
    }

    if config.people.is_empty() {
        config.start_place = Vec::new();
        return Ok(());
    }

    let fallback_activity = config
        .fallback_event_idx
        .map(|idx| config.events[idx].activity.clone())
        .unwrap_or_default();

    // Candidate work places per department, most specific first.
    let mut candidates_by_dept: HashMap<&str, Vec<usize>> = HashMap::new();
    for (person_idx, person) in config.people.iter().enumerate() {
        if assigned[person_idx].is_some() {
            continue;
        }
        let dept = person.department.as_str();
        let candidates = candidates_by_dept.entry(dept).or_insert_with(|| {
            let mut list: Vec<usize> = config
                .places
                .iter()
                .enumerate()
                .filter(|(_, p)| p.activity == fallback_activity && p.admits(dept))
                .map(|(i, _)| i)
                .collect();
            list.sort_by_key(|&i| {
                let n = config.places[i].departments_allowed.len();
                (if n == 0 { usize::MAX } else { n }, i)
            });
            list
        });
        if candidates.is_empty() {
            return Err(ConfigError::UndefinedReference {
                kind: "department",
                name: dept.to_string(),
                context: format!(
                    "person `{}`: no place with activity `{fallback_activity}` admits this department",
                    person.name
                ),
            });
        }
        let slot = candidates
            .iter()
            .copied()
            .find(|&i| load[i] < config.places[i].capacity);
        match slot {
            Some(place_idx) => {
                assigned[person_idx] = Some(place_idx);
                load[place_idx] += 1;
            }
            None => {
                return Err(invariant(
                    format!("person `{}`", person.name),
                    "capacity",
                    format!("all start places for department `{dept}` are full"),
                ));
            }
        }
    }

    config.start_place = assigned.into_iter().map(|a| a.expect("assigned")).collect();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config(extra: &str) -> String {
        format!(
            r#"{{
              "events": [
                {{"name": "work", "activity": "work",
                  "schedule": [["08:00", "17:00"]],
                  "duration_min": 30, "duration_max": 60}}
              ],
              "places": [
                {{"name": "office", "activity": "work", "building": "b",
                  "area": 50.0, "height": 2.7, "capacity": 10,
                  "ventilation_natural": 1.5}}
              ],
              "people": [
                {{"name": "p1", "building": "b", "department": "D1"}}
              ]{extra}
            }}"#
        )
    }

    #[test]
    fn parses_minimal_config_with_defaults() {
        let config = parse_config(&minimal_config("")).unwrap();
        assert_eq!(config.aerosol.co2_background, 415.0);
        assert_eq!(config.aerosol.pressure, 0.95);
        assert_eq!(config.aerosol.temperature, 20.0);
        assert_eq!(config.aerosol.breathing_rate, 0.52);
        assert_eq!(config.aerosol.co2_rate_per_person, 0.005);
        assert_eq!(config.aerosol.quanta_exhalation, 25.0);
        assert_eq!(config.aerosol.virus_decay, 0.62);
        assert_eq!(config.aerosol.deposition, 0.3);
        assert_eq!(config.aerosol.quanta_enhancement, 1.0);
        assert_eq!(config.aerosol.mask_fraction, 1.0);
        assert_eq!(config.options.day_start, 480);
        assert_eq!(config.options.day_end, 1020);
        assert_eq!(config.options.priority_alpha, 0.5);
        assert_eq!(config.fallback_event_idx, Some(0));
        assert_eq!(config.start_place, vec![0]);
    }

    #[test]
    fn empty_people_list_is_valid() {
        let text = r#"{
          "events": [{"name": "work", "activity": "work",
                      "schedule": [["08:00", "17:00"]],
                      "duration_min": 30, "duration_max": 60}],
          "places": [{"name": "office", "activity": "work", "building": "b",
                      "area": 50.0, "height": 2.7, "capacity": 10,
                      "ventilation_natural": 1.5}],
          "people": []
        }"#;
        let config = parse_config(text).unwrap();
        assert!(config.people.is_empty());
        assert!(config.start_place.is_empty());
    }

    #[test]
    fn zero_area_is_rejected_naming_the_field() {
        let text = minimal_config("").replace("\"area\": 50.0", "\"area\": 0.0");
        let err = parse_config(&text).unwrap_err();
        match err {
            ConfigError::Invariant { field, .. } => assert_eq!(field, "area"),
            other => panic!("expected invariant error, got {other}"),
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_config("{ \"events\": [ }").unwrap_err();
        match err {
            ConfigError::Syntax { line, column, .. } => {
                assert_eq!(line, 1);
                assert!(column > 0);
            }
            other => panic!("expected syntax error, got {other}"),
        }
    }

    #[test]
    fn unknown_field_is_classified() {
        let text = minimal_config("").replace("\"building\": \"b\", \"department\": \"D1\"",
            "\"building\": \"b\", \"department\": \"D1\", \"age\": 3");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownField { .. }), "{err}");
    }

    #[test]
    fn undefined_activity_is_reported() {
        let text = minimal_config("").replace(
            "\"name\": \"office\", \"activity\": \"work\"",
            "\"name\": \"office\", \"activity\": \"gym\"",
        );
        let err = parse_config(&text).unwrap_err();
        match err {
            ConfigError::UndefinedReference { kind, name, .. } => {
                assert_eq!(kind, "activity");
                assert_eq!(name, "gym");
            }
            other => panic!("expected undefined reference, got {other}"),
        }
    }

    #[test]
    fn overlapping_windows_are_rejected() {
        let text = minimal_config("").replace(
            r#"[["08:00", "17:00"]]"#,
            r#"[["08:00", "12:00"], ["11:00", "13:00"]]"#,
        );
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Invariant { field: "schedule", .. }), "{err}");
    }

    #[test]
    fn duration_longer_than_longest_window_is_rejected() {
        let text = minimal_config("")
            .replace("\"duration_max\": 60", "\"duration_max\": 600");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Invariant { field: "duration_max", .. }), "{err}");
    }

    #[test]
    fn n_infected_bounded_by_people() {
        let text = minimal_config(", \"options\": {\"n_infected\": 2}");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Invariant { field: "n_infected", .. }), "{err}");
    }

    #[test]
    fn clock_parsing() {
        assert_eq!(parse_clock("08:00").unwrap(), 480);
        assert_eq!(parse_clock("24:00").unwrap(), 1440);
        assert_eq!(parse_clock("00:05").unwrap(), 5);
        assert!(parse_clock("8").is_err());
        assert!(parse_clock("24:01").is_err());
        assert!(parse_clock("12:61").is_err());
        assert_eq!(format_clock(parse_clock("13:07").unwrap()), "13:07");
    }

    #[test]
    fn derive_mechanical_rate_examples() {
        let spec = VentilationSpec {
            flow_rate: 1000.0,
            filter_efficiency: 0.2,
            duct_removal: 0.1,
            extra_removal: 0.0,
        };
        let rate = derive_mechanical_rate(&spec, 330.0 * 2.7);
        assert!((rate - 0.337).abs() < 0.001, "open office rate {rate}");

        let spec_small = VentilationSpec { flow_rate: 300.0, ..spec.clone() };
        let rate = derive_mechanical_rate(&spec_small, 16.0 * 2.7);
        assert!((rate - 2.083).abs() < 0.001, "meeting room rate {rate}");

        let zero = VentilationSpec { flow_rate: 0.0, ..spec.clone() };
        assert_eq!(derive_mechanical_rate(&zero, 100.0), 0.0);

        let capped = VentilationSpec {
            flow_rate: 500.0,
            filter_efficiency: 0.6,
            duct_removal: 0.5,
            extra_removal: 0.2,
        };
        assert_eq!(derive_mechanical_rate(&capped, 100.0), 5.0);
    }

    #[test]
    fn round_trip_preserves_config() {
        let text = minimal_config(
            r#", "options": {"day_start": "08:00", "day_end": "17:00",
                "n_infected": 1, "seed": 7, "priority_alpha": 0.5,
                "initial_occupancy": {"office": ["p1"]}}"#,
        );
        let config = parse_config(&text).unwrap();
        let serialized = serialize_config(&config);
        let reparsed = parse_config(&serialized).unwrap();
        assert_eq!(config, reparsed);
    }

    #[test]
    fn most_specific_start_place_wins() {
        let text = r#"{
          "events": [{"name": "work", "activity": "work",
                      "schedule": [["08:00", "17:00"]],
                      "duration_min": 30, "duration_max": 60}],
          "places": [
            {"name": "open", "activity": "work", "building": "b",
             "departments_allowed": ["D1", "D4"],
             "area": 330.0, "height": 2.7, "capacity": 60,
             "ventilation_natural": 1.5},
            {"name": "it", "activity": "work", "building": "b",
             "departments_allowed": ["D4"],
             "area": 52.0, "height": 2.7, "capacity": 10,
             "ventilation_natural": 1.5}
          ],
          "people": [
            {"name": "a", "building": "b", "department": "D1"},
            {"name": "b", "building": "b", "department": "D4"}
          ]
        }"#;
        let config = parse_config(text).unwrap();
        assert_eq!(config.start_place, vec![0, 1]);
    }

    #[test]
    fn initial_occupancy_checks_departments() {
        let text = r#"{
          "events": [{"name": "work", "activity": "work",
                      "schedule": [["08:00", "17:00"]],
                      "duration_min": 30, "duration_max": 60}],
          "places": [
            {"name": "open", "activity": "work", "building": "b",
             "departments_allowed": ["D1"],
             "area": 330.0, "height": 2.7, "capacity": 60,
             "ventilation_natural": 1.5}
          ],
          "people": [{"name": "a", "building": "b", "department": "D2"}],
          "options": {"initial_occupancy": {"open": ["a"]}}
        }"#;
        let err = parse_config(text).unwrap_err();
        assert!(matches!(err, ConfigError::Invariant { field: "departments_allowed", .. }), "{err}");
    }
}
