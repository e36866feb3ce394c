//! Event-granular recording of simulation state and raw-data export.
//!
//! Snapshots are taken on occupancy-change boundaries, not on a fixed grid:
//! between two snapshots of a place its occupancy is constant and the
//! concentration trajectory is fully determined by the aerosol recurrences,
//! so boundary values are lossless. `densify` resamples those trajectories
//! onto a fixed grid on demand. Formats are documented in
//! `docs/output-schema.md`; the CSV headers there are frozen in tests.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aerosol;
use crate::config::SimulationConfig;

/// State of one place immediately after a state-changing event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceSnapshot {
    pub place: String,
    /// Minutes since midnight.
    pub time: u32,
    pub n_people: u32,
    pub n_infected: u32,
    pub co2_ppm: f64,
    pub quanta_per_m3: f64,
}

/// One completed activity episode of one person. `time` is the minute the
/// episode ended; it started at the person's previous snapshot (or at day
/// start), which makes consecutive snapshots temporally contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonSnapshot {
    pub person: String,
    /// Minutes since midnight; end of the episode.
    pub time: u32,
    pub place: String,
    pub event: String,
    /// CO₂ at the person's place when the episode ended.
    pub co2_ppm: f64,
    /// Quanta inhaled over this episode.
    pub quanta_inhaled: f64,
}

/// Final exposure ledger entry of one person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonExposure {
    pub person: String,
    pub department: String,
    pub infected: bool,
    /// Total quanta inhaled over the day.
    pub quanta: f64,
    /// Time-weighted CO₂ integral in ppm·minutes.
    pub co2_ppm_minutes: f64,
    /// Minutes of presence accounted for.
    pub minutes: u32,
}

/// Complete, self-describing record of one simulated day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub config_digest: String,
    pub seed: u64,
    pub infected: Vec<String>,
    pub places: Vec<PlaceSnapshot>,
    pub persons: Vec<PersonSnapshot>,
    pub exposure: Vec<PersonExposure>,
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid history document: {0}")]
    Format(#[from] serde_json::Error),
}

impl RunHistory {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("history serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, HistoryError> {
        Ok(serde_json::from_str(text)?)
    }

    /// SHA-256 of the canonical JSON export; two runs are byte-identical
    /// exactly when their digests match.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// CSV of the place table. Header frozen:
    /// `place,time,n_people,n_infected,co2_ppm,quanta_per_m3`.
    pub fn places_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["place", "time", "n_people", "n_infected", "co2_ppm", "quanta_per_m3"])
            .expect("csv header");
        for snap in &self.places {
            writer
                .write_record([
                    snap.place.as_str(),
                    &snap.time.to_string(),
                    &snap.n_people.to_string(),
                    &snap.n_infected.to_string(),
                    &format_float(snap.co2_ppm),
                    &format_float(snap.quanta_per_m3),
                ])
                .expect("csv row");
        }
        String::from_utf8(writer.into_inner().expect("csv flush")).expect("utf8")
    }

    /// CSV of the person table. Header frozen:
    /// `person,time,place,event,co2_ppm,quanta_inhaled`.
    pub fn persons_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["person", "time", "place", "event", "co2_ppm", "quanta_inhaled"])
            .expect("csv header");
        for snap in &self.persons {
            writer
                .write_record([
                    snap.person.as_str(),
                    &snap.time.to_string(),
                    snap.place.as_str(),
                    snap.event.as_str(),
                    &format_float(snap.co2_ppm),
                    &format_float(snap.quanta_inhaled),
                ])
                .expect("csv row");
        }
        String::from_utf8(writer.into_inner().expect("csv flush")).expect("utf8")
    }

    /// Contiguous activity episodes per person, reconstructed from the
    /// person snapshots. Episode `k` spans `[start, end)` at `place` doing
    /// `event`; the last episode of the day closes at day end.
    pub fn episodes(&self, day_start: u32) -> Vec<Episode> {
        let mut last_end: HashMap<&str, u32> = HashMap::new();
        let mut out = Vec::with_capacity(self.persons.len());
        for snap in &self.persons {
            let start = *last_end.get(snap.person.as_str()).unwrap_or(&day_start);
            out.push(Episode {
                person: snap.person.clone(),
                start,
                end: snap.time,
                place: snap.place.clone(),
                event: snap.event.clone(),
                quanta_inhaled: snap.quanta_inhaled,
            });
            last_end.insert(snap.person.as_str(), snap.time);
        }
        out
    }
}

fn format_float(value: f64) -> String {
    let mut buf = String::new();
    write!(buf, "{value}").expect("write float");
    buf
}

/// A reconstructed activity episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub person: String,
    pub start: u32,
    pub end: u32,
    pub place: String,
    pub event: String,
    pub quanta_inhaled: f64,
}

/// In-run snapshot collector. Enforces per-entity time monotonicity; a
/// regression is an engine bug and aborts.
pub struct Recorder {
    place_names: Vec<String>,
    person_names: Vec<String>,
    place_last: Vec<u32>,
    person_last: Vec<u32>,
    pub places: Vec<PlaceSnapshot>,
    pub persons: Vec<PersonSnapshot>,
}

impl Recorder {
    pub fn new(place_names: Vec<String>, person_names: Vec<String>) -> Self {
        let place_last = vec![0; place_names.len()];
        let person_last = vec![0; person_names.len()];
        Recorder {
            place_names,
            person_names,
            place_last,
            person_last,
            places: Vec::new(),
            persons: Vec::new(),
        }
    }

    pub fn record_place(
        &mut self,
        place: usize,
        time: u32,
        n_people: u32,
        n_infected: u32,
        co2_ppm: f64,
        quanta_per_m3: f64,
    ) {
        assert!(
            time >= self.place_last[place],
            "place snapshot time regression: {} after {}",
            time,
            self.place_last[place]
        );
        self.place_last[place] = time;
        self.places.push(PlaceSnapshot {
            place: self.place_names[place].clone(),
            time,
            n_people,
            n_infected,
            co2_ppm,
            quanta_per_m3,
        });
    }

    #[allow(clippy::too_many_arguments)]
    pub fn record_person(
        &mut self,
        person: usize,
        time: u32,
        place: &str,
        event: &str,
        co2_ppm: f64,
        quanta_inhaled: f64,
    ) {
        assert!(
            time >= self.person_last[person],
            "person snapshot time regression: {} after {}",
            time,
            self.person_last[person]
        );
        self.person_last[person] = time;
        self.persons.push(PersonSnapshot {
            person: self.person_names[person].clone(),
            time,
            place: place.to_string(),
            event: event.to_string(),
            co2_ppm,
            quanta_inhaled,
        });
    }
}

/// One resampled trajectory point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensePoint {
    pub place: String,
    pub time: u32,
    pub co2_ppm: f64,
    pub quanta_per_m3: f64,
}

/// Resample place trajectories onto a fixed `step`-minute grid using the
/// aerosol recurrences. Grid points inside an interval are computed by a
/// single advance from the interval-start state (the recurrences are not
/// splitting-invariant, so chaining sub-steps would drift from the engine's
/// boundary values); snapshot endpoints are reproduced exactly.
pub fn densify(history: &RunHistory, config: &SimulationConfig, step: u32) -> Vec<DensePoint> {
    assert!(step >= 1, "densify step must be at least one minute");
    let episodes = history.episodes(config.options.day_start);
    let mask_of: HashMap<&str, f64> = config
        .events
        .iter()
        .map(|e| (e.name.as_str(), e.mask_efficiency))
        .collect();

    let mut out = Vec::new();
    for place in &config.places {
        let snaps: Vec<&PlaceSnapshot> = {
            // keep the last snapshot per timestamp: it reflects the state
            // once all same-minute changes have settled
            let mut per_time: Vec<&PlaceSnapshot> = Vec::new();
            for snap in history.places.iter().filter(|s| s.place == place.name) {
                match per_time.last() {
                    Some(last) if last.time == snap.time => {
                        *per_time.last_mut().unwrap() = snap;
                    }
                    _ => per_time.push(snap),
                }
            }
            per_time
        };
        let lambda_a = place.ventilation_natural;
        let lambda_r = place.mechanical_rate();
        let volume = place.volume();
        for pair in snaps.windows(2) {
            let (from, to) = (pair[0], pair[1]);
            out.push(DensePoint {
                place: place.name.clone(),
                time: from.time,
                co2_ppm: from.co2_ppm,
                quanta_per_m3: from.quanta_per_m3,
            });
            let mask = episodes
                .iter()
                .filter(|ep| ep.place == place.name && ep.start <= from.time && from.time < ep.end)
                .map(|ep| mask_of.get(ep.event.as_str()).copied().unwrap_or(0.0))
                .fold(0.0f64, f64::max);
            let emission =
                aerosol::quanta_emission(from.n_infected, mask, &config.aerosol);
            let co2_emit = aerosol::co2_emission(from.n_people, &config.aerosol);
            let lambda = aerosol::total_loss_rate(lambda_a, lambda_r, &config.aerosol);
            let mut t = from.time + step;
            while t < to.time {
                let tau = aerosol::minutes_to_hours(t - from.time);
                out.push(DensePoint {
                    place: place.name.clone(),
                    time: t,
                    co2_ppm: aerosol::advance_co2(
                        from.co2_ppm,
                        tau,
                        co2_emit,
                        lambda_a,
                        volume,
                        config.aerosol.co2_background,
                    ),
                    quanta_per_m3: aerosol::advance_quanta(
                        from.quanta_per_m3,
                        tau,
                        emission,
                        lambda,
                        volume,
                    ),
                });
                t += step;
            }
        }
        if let Some(last) = snaps.last() {
            out.push(DensePoint {
                place: place.name.clone(),
                time: last.time,
                co2_ppm: last.co2_ppm,
                quanta_per_m3: last.quanta_per_m3,
            });
        }
    }
    out
}

/// CSV of densified trajectories. Header frozen:
/// `place,time,co2_ppm,quanta_per_m3`.
pub fn densify_csv(points: &[DensePoint]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["place", "time", "co2_ppm", "quanta_per_m3"])
        .expect("csv header");
    for point in points {
        writer
            .write_record([
                point.place.as_str(),
                &point.time.to_string(),
                &format_float(point.co2_ppm),
                &format_float(point.quanta_per_m3),
            ])
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("utf8")
}

/// Cross-check a history against its configuration: contiguous person
/// traces, reconstructible occupancy, and the capacity, department-access,
/// and schedule-window invariants. Returns human-readable violations; an
/// empty list means the history is consistent.
pub fn verify(history: &RunHistory, config: &SimulationConfig) -> Vec<String> {
    let mut violations = Vec::new();
    let day_start = config.options.day_start;
    let day_end = config.options.day_end;
    let episodes = history.episodes(day_start);
    let fallback_name = config
        .fallback_event_idx
        .map(|idx| config.events[idx].name.as_str());

    // traces must cover the whole day with no gaps
    let mut trace_end: HashMap<&str, u32> = HashMap::new();
    for ep in &episodes {
        if ep.end < ep.start {
            violations.push(format!("person `{}`: episode ends before it starts", ep.person));
        }
        trace_end.insert(ep.person.as_str(), ep.end);
    }
    for person in &config.people {
        match trace_end.get(person.name.as_str()) {
            Some(&end) if end == day_end => {}
            Some(&end) => violations.push(format!(
                "person `{}`: trace ends at {end}, not at day end {day_end}",
                person.name
            )),
            None => violations.push(format!("person `{}`: no trace recorded", person.name)),
        }
    }

    let dept_of: HashMap<&str, &str> = config
        .people
        .iter()
        .map(|p| (p.name.as_str(), p.department.as_str()))
        .collect();

    for ep in &episodes {
        let Some(place) = config.places.iter().find(|p| p.name == ep.place) else {
            violations.push(format!("episode references unknown place `{}`", ep.place));
            continue;
        };
        if let Some(dept) = dept_of.get(ep.person.as_str()) {
            if !place.admits(dept) {
                violations.push(format!(
                    "person `{}` (department `{dept}`) entered `{}` which excludes it",
                    ep.person, ep.place
                ));
            }
        }
        if Some(ep.event.as_str()) != fallback_name && ep.end > ep.start {
            let Some(model) = config.events.iter().find(|e| e.name == ep.event) else {
                violations.push(format!("episode references unknown event `{}`", ep.event));
                continue;
            };
            let inside = model
                .schedule
                .iter()
                .any(|w| w.start <= ep.start && ep.end <= w.end);
            if !inside {
                violations.push(format!(
                    "person `{}`: `{}` episode {}–{} outside its schedule windows",
                    ep.person, ep.event, ep.start, ep.end
                ));
            }
        }
    }

    // occupancy reconstructed from person traces must match place snapshots
    // and never exceed capacity
    let occupancy_at = |place: &str, t: u32| -> u32 {
        episodes
            .iter()
            .filter(|ep| {
                ep.place == place
                    && (ep.start <= t && t < ep.end || (t == day_end && ep.end == day_end))
            })
            .count() as u32
    };
    let mut last_per_time: HashMap<(&str, u32), &PlaceSnapshot> = HashMap::new();
    for snap in &history.places {
        last_per_time.insert((snap.place.as_str(), snap.time), snap);
    }
    for snap in last_per_time.values() {
        let expected = occupancy_at(&snap.place, snap.time);
        if expected != snap.n_people {
            violations.push(format!(
                "place `{}` at {}: snapshot says {} people, traces say {expected}",
                snap.place, snap.time, snap.n_people
            ));
        }
        if let Some(place) = config.places.iter().find(|p| p.name == snap.place) {
            if snap.n_people > place.capacity {
                violations.push(format!(
                    "place `{}` at {}: {} people exceed capacity {}",
                    snap.place, snap.time, snap.n_people, place.capacity
                ));
            }
        }
    }

    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_history() -> RunHistory {
        RunHistory {
            config_digest: "d".repeat(64),
            seed: 42,
            infected: vec!["p1".into()],
            places: vec![
                PlaceSnapshot {
                    place: "office".into(),
                    time: 480,
                    n_people: 1,
                    n_infected: 1,
                    co2_ppm: 415.0,
                    quanta_per_m3: 0.0,
                },
                PlaceSnapshot {
                    place: "office".into(),
                    time: 1020,
                    n_people: 1,
                    n_infected: 1,
                    co2_ppm: 612.5,
                    quanta_per_m3: 1.25e-2,
                },
            ],
            persons: vec![PersonSnapshot {
                person: "p1".into(),
                time: 1020,
                place: "office".into(),
                event: "work".into(),
                co2_ppm: 612.5,
                quanta_inhaled: 0.0,
            }],
            exposure: vec![PersonExposure {
                person: "p1".into(),
                department: "D1".into(),
                infected: true,
                quanta: 0.0,
                co2_ppm_minutes: 300000.0,
                minutes: 540,
            }],
        }
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let history = tiny_history();
        let first = history.to_json();
        let reloaded = RunHistory::from_json(&first).unwrap();
        assert_eq!(reloaded.to_json(), first);
        assert_eq!(reloaded, history);
    }

    #[test]
    fn csv_row_counts() {
        let history = tiny_history();
        assert_eq!(history.places_csv().lines().count(), history.places.len() + 1);
        assert_eq!(history.persons_csv().lines().count(), history.persons.len() + 1);
        assert!(history
            .places_csv()
            .starts_with("place,time,n_people,n_infected,co2_ppm,quanta_per_m3"));
        assert!(history
            .persons_csv()
            .starts_with("person,time,place,event,co2_ppm,quanta_inhaled"));
    }

    #[test]
    fn recorder_rejects_time_regression() {
        let mut recorder = Recorder::new(vec!["a".into()], vec![]);
        recorder.record_place(0, 500, 1, 0, 415.0, 0.0);
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            recorder.record_place(0, 499, 1, 0, 415.0, 0.0);
        }));
        assert!(result.is_err());
    }

    #[test]
    fn episodes_are_contiguous() {
        let history = tiny_history();
        let eps = history.episodes(480);
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].start, 480);
        assert_eq!(eps[0].end, 1020);
    }
}
