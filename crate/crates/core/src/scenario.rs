//! Scripted two-person office scenario for checking the CO₂ model against
//! an empirical single-room trace: a small office at a constant outdoor air
//! exchange rate of 0.25 1/h, first occupant arriving shortly before 8:00,
//! a second just past 9:00, and a vacancy around 13:00–13:30.
//!
//! The occupancy timetable is scripted, bypassing agent behavior entirely,
//! so the emitted series depends only on the aerosol recurrences. Room
//! geometry and arrival minutes are not physical constants; they live in
//! one editable fixture (`fixtures/validate_scenario.json`, embedded as the
//! default).

use serde::{Deserialize, Serialize};

use crate::aerosol;
use crate::config::{parse_clock, AerosolConstants};

/// Default scenario shipped with the repository.
pub const DEFAULT_SCENARIO: &str = include_str!("../../../fixtures/validate_scenario.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRoom {
    pub area: f64,
    pub height: f64,
    pub ventilation_natural: f64,
}

/// A scripted occupancy timetable for one room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub room: ScenarioRoom,
    #[serde(with = "clock_string")]
    pub day_start: u32,
    #[serde(with = "clock_string")]
    pub day_end: u32,
    /// `(minute, occupants)` changes, strictly increasing in time. The room
    /// is empty from `day_start` until the first entry.
    #[serde(deserialize_with = "deserialize_occupancy", serialize_with = "serialize_occupancy")]
    pub occupancy: Vec<(u32, u32)>,
    /// Output grid step in minutes.
    pub sample_step: u32,
}

mod clock_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(minutes: &u32, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::config::format_clock(*minutes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u32, D::Error> {
        let text = String::deserialize(d)?;
        crate::config::parse_clock(&text).map_err(serde::de::Error::custom)
    }
}

fn deserialize_occupancy<'de, D>(deserializer: D) -> Result<Vec<(u32, u32)>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let raw: Vec<(String, u32)> = Vec::deserialize(deserializer)?;
    raw.into_iter()
        .map(|(clock, n)| Ok((parse_clock(&clock).map_err(serde::de::Error::custom)?, n)))
        .collect()
}

fn serialize_occupancy<S>(occupancy: &[(u32, u32)], serializer: S) -> Result<S::Ok, S::Error>
where
    S: serde::Serializer,
{
    use serde::ser::SerializeSeq;
    let mut seq = serializer.serialize_seq(Some(occupancy.len()))?;
    for (minute, n) in occupancy {
        seq.serialize_element(&(crate::config::format_clock(*minute), n))?;
    }
    seq.end()
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario document: {0}")]
    Format(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text)?;
    if scenario.day_start >= scenario.day_end {
        return Err(ScenarioError::Invalid("day_start must be < day_end".into()));
    }
    if scenario.sample_step < 1 {
        return Err(ScenarioError::Invalid("sample_step must be >= 1".into()));
    }
    let mut last = scenario.day_start;
    for &(minute, _) in &scenario.occupancy {
        if minute < last {
            return Err(ScenarioError::Invalid(
                "occupancy changes must be ordered within the day".into(),
            ));
        }
        last = minute;
    }
    if last > scenario.day_end {
        return Err(ScenarioError::Invalid("occupancy change after day_end".into()));
    }
    Ok(scenario)
}

/// One sampled point of the scripted run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioPoint {
    pub minute: u32,
    pub co2_ppm: f64,
    pub occupants: u32,
}

/// Run the scripted occupancy trace through the CO₂ recurrence and sample
/// it on the scenario's grid. Grid points inside a constant-occupancy
/// segment come from a single advance off the segment-start state.
pub fn run_scenario(scenario: &Scenario, constants: &AerosolConstants) -> Vec<ScenarioPoint> {
    let volume = scenario.room.area * scenario.room.height;
    let lambda_a = scenario.room.ventilation_natural;
    let background = constants.co2_background;

    // segment boundaries: day_start, each occupancy change, day_end
    let mut boundaries: Vec<(u32, u32)> = Vec::new();
    boundaries.push((scenario.day_start, 0));
    for &(minute, n) in &scenario.occupancy {
        boundaries.push((minute, n));
    }

    let mut out = Vec::new();
    let mut state = background;
    for (idx, &(seg_start, occupants)) in boundaries.iter().enumerate() {
        let seg_end = boundaries
            .get(idx + 1)
            .map(|&(m, _)| m)
            .unwrap_or(scenario.day_end);
        let emission = aerosol::co2_emission(occupants, constants);
        let mut minute = seg_start;
        while minute < seg_end {
            let tau = aerosol::minutes_to_hours(minute - seg_start);
            let co2 = if minute == seg_start {
                state
            } else {
                aerosol::advance_co2(state, tau, emission, lambda_a, volume, background)
            };
            out.push(ScenarioPoint {
                minute,
                co2_ppm: co2,
                occupants,
            });
            minute += scenario.sample_step;
        }
        let tau = aerosol::minutes_to_hours(seg_end - seg_start);
        if tau > 0.0 {
            state = aerosol::advance_co2(state, tau, emission, lambda_a, volume, background);
        }
        if idx + 1 == boundaries.len() {
            out.push(ScenarioPoint {
                minute: scenario.day_end,
                co2_ppm: state,
                occupants,
            });
        }
    }
    out
}

/// CSV of the scenario trace. Header frozen: `time,co2_ppm,occupants`.
pub fn scenario_csv(points: &[ScenarioPoint]) -> String {
    let mut out = String::from("time,co2_ppm,occupants\n");
    for point in points {
        out.push_str(&format!("{},{},{}\n", point.minute, point.co2_ppm, point.occupants));
    }
    out
}
