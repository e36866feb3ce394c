//! Reduction of run histories to outcome parameters at place, person,
//! department, and building level, plus the zero-quanta exclusion rule
//! applied to batched place samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::Place;
use crate::history::RunHistory;

/// Per-place outcome parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceMetrics {
    pub place: String,
    /// Maximum CO₂ over the day in ppm.
    pub max_co2: f64,
    /// Maximum quanta concentration over the day in quanta/m³.
    pub max_quanta: f64,
    /// Quanta concentration at day end in quanta/m³.
    pub final_quanta: f64,
}

/// Per-person outcome parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonMetrics {
    pub person: String,
    pub department: String,
    pub infected: bool,
    /// Time-weighted mean inhaled CO₂ in ppm.
    pub mean_co2: f64,
    /// Cumulative quanta inhaled by day end.
    pub inhaled_quanta: f64,
}

/// Person metrics aggregated per department.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepartmentMetrics {
    pub department: String,
    pub n_people: u32,
    pub mean_inhaled_co2: f64,
    pub mean_inhaled_quanta: f64,
}

/// Building-level summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingMetrics {
    /// Per-place maxima weighted by room volume.
    pub volume_weighted_max_co2: f64,
    /// Mean over all people of quanta inhaled by day end; absent for runs
    /// without agents.
    pub mean_inhaled_quanta: Option<f64>,
}

/// All outcome parameters of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeMetrics {
    pub places: Vec<PlaceMetrics>,
    pub persons: Vec<PersonMetrics>,
    pub departments: Vec<DepartmentMetrics>,
    pub building: BuildingMetrics,
}

/// Per-place maxima and final values over the recorded snapshots. Snapshot
/// boundaries attain the interval extrema because the trajectories are
/// monotone under constant occupancy, so no resampling is needed.
pub fn place_metrics(history: &RunHistory) -> Vec<PlaceMetrics> {
    let mut order: Vec<&str> = Vec::new();
    let mut acc: BTreeMap<&str, PlaceMetrics> = BTreeMap::new();
    for snap in &history.places {
        let entry = acc.entry(snap.place.as_str()).or_insert_with(|| {
            order.push(snap.place.as_str());
            PlaceMetrics {
                place: snap.place.clone(),
                max_co2: f64::NEG_INFINITY,
                max_quanta: f64::NEG_INFINITY,
                final_quanta: 0.0,
            }
        });
        entry.max_co2 = entry.max_co2.max(snap.co2_ppm);
        entry.max_quanta = entry.max_quanta.max(snap.quanta_per_m3);
        entry.final_quanta = snap.quanta_per_m3;
    }
    order
        .into_iter()
        .map(|name| acc.remove(name).expect("accumulated"))
        .collect()
}

/// Per-person exposure metrics from the final ledger.
pub fn person_metrics(history: &RunHistory) -> Vec<PersonMetrics> {
    history
        .exposure
        .iter()
        .map(|entry| PersonMetrics {
            person: entry.person.clone(),
            department: entry.department.clone(),
            infected: entry.infected,
            mean_co2: if entry.minutes == 0 {
                0.0
            } else {
                entry.co2_ppm_minutes / entry.minutes as f64
            },
            inhaled_quanta: entry.quanta,
        })
        .collect()
}

/// Mean person metrics per department, sorted by department name.
pub fn department_metrics(persons: &[PersonMetrics]) -> Vec<DepartmentMetrics> {
    let mut groups: BTreeMap<&str, (u32, f64, f64)> = BTreeMap::new();
    for person in persons {
        let entry = groups.entry(person.department.as_str()).or_insert((0, 0.0, 0.0));
        entry.0 += 1;
        entry.1 += person.mean_co2;
        entry.2 += person.inhaled_quanta;
    }
    groups
        .into_iter()
        .map(|(department, (n, co2, quanta))| DepartmentMetrics {
            department: department.to_string(),
            n_people: n,
            mean_inhaled_co2: co2 / n as f64,
            mean_inhaled_quanta: quanta / n as f64,
        })
        .collect()
}

/// Building-level reduction: volume-weighted mean of per-place max CO₂ and
/// the population mean of final inhaled quanta.
pub fn building_metrics(
    places: &[PlaceMetrics],
    persons: &[PersonMetrics],
    place_specs: &[Place],
) -> BuildingMetrics {
    let volume_of = |name: &str| {
        place_specs
            .iter()
            .find(|p| p.name == name)
            .map(Place::volume)
            .unwrap_or(0.0)
    };
    let mut weighted = 0.0;
    let mut total_volume = 0.0;
    for place in places {
        let volume = volume_of(&place.place);
        weighted += volume * place.max_co2;
        total_volume += volume;
    }
    let volume_weighted_max_co2 = if total_volume > 0.0 {
        weighted / total_volume
    } else {
        0.0
    };
    let mean_inhaled_quanta = if persons.is_empty() {
        None
    } else {
        Some(persons.iter().map(|p| p.inhaled_quanta).sum::<f64>() / persons.len() as f64)
    };
    BuildingMetrics {
        volume_weighted_max_co2,
        mean_inhaled_quanta,
    }
}

/// Full reduction of one run.
pub fn compute(history: &RunHistory, place_specs: &[Place]) -> OutcomeMetrics {
    let places = place_metrics(history);
    let persons = person_metrics(history);
    let departments = department_metrics(&persons);
    let building = building_metrics(&places, &persons, place_specs);
    OutcomeMetrics {
        places,
        persons,
        departments,
        building,
    }
}

/// How the zero-quanta exclusion treats a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionMode {
    /// Drop only the (run, place) quanta samples whose final level is zero.
    PerPlace,
    /// Drop every place-quanta sample of a run in which any place ended the
    /// day at zero.
    WholeRun,
}

/// One (run, place) quanta observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantaSample {
    pub run: usize,
    pub place: String,
    pub max_quanta: f64,
    pub final_quanta: f64,
}

/// Drop quanta samples per the exclusion rule. CO₂ samples are never
/// touched; they live in separate distributions.
pub fn apply_quanta_exclusion(samples: Vec<QuantaSample>, mode: ExclusionMode) -> Vec<QuantaSample> {
    match mode {
        ExclusionMode::PerPlace => samples
            .into_iter()
            .filter(|s| s.final_quanta != 0.0)
            .collect(),
        ExclusionMode::WholeRun => {
            let mut tainted: Vec<usize> = samples
                .iter()
                .filter(|s| s.final_quanta == 0.0)
                .map(|s| s.run)
                .collect();
            tainted.sort_unstable();
            tainted.dedup();
            samples
                .into_iter()
                .filter(|s| tainted.binary_search(&s.run).is_err())
                .collect()
        }
    }
}
