//! Monte Carlo batch runner: seeded replicates of one configuration reduced
//! to outcome metrics and assembled into per-entity sample distributions.
//!
//! Run `i` of a batch uses `split_seed(base_seed, i)`, a SplitMix64
//! finalizer over `base_seed + (i+1)·golden-gamma`. The mix is a bijection,
//! so distinct run indices can never collide for a fixed base seed. Runs are
//! independent and may execute on any number of worker threads; results are
//! collected by run index, which makes a batch byte-identical for every
//! parallelism degree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SimulationConfig;
use crate::engine::run_day;
use crate::metrics::{self, ExclusionMode, OutcomeMetrics, QuantaSample};

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed for run `index` of a batch rooted at `base`.
pub fn split_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(SPLITMIX_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// What a sample distribution describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Place,
    Department,
    Building,
}

/// One assembled distribution: `samples[k]` came from run `runs[k]` of the
/// batch (runs drop out of place-quanta distributions under the exclusion
/// rule, so the index list is kept alongside).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub kind: EntityKind,
    pub entity: String,
    pub parameter: String,
    pub samples: Vec<f64>,
    pub runs: Vec<usize>,
}

/// A batched experiment: per-run metrics plus assembled distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub config_digest: String,
    pub s_run: u32,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub exclusion_mode: ExclusionMode,
    pub runs: Vec<OutcomeMetrics>,
    pub distributions: Vec<SampleSet>,
}

impl ExperimentResult {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("result serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_json().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn distribution(&self, kind: EntityKind, entity: &str, parameter: &str) -> Option<&SampleSet> {
        self.distributions
            .iter()
            .find(|d| d.kind == kind && d.entity == entity && d.parameter == parameter)
    }
}

/// Execute `s_run` seeded replicates of `config` on `parallelism` worker
/// threads (0 = one thread per core) and reduce them.
pub fn run_batch(
    config: &SimulationConfig,
    experiment: &str,
    s_run: u32,
    base_seed: u64,
    parallelism: usize,
    exclusion_mode: ExclusionMode,
) -> ExperimentResult {
    let seeds: Vec<u64> = (0..s_run as u64).map(|i| split_seed(base_seed, i)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("worker pool");
    let runs: Vec<OutcomeMetrics> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let history = run_day(config, seed);
                metrics::compute(&history, &config.places)
            })
            .collect()
    });
    let distributions = assemble_distributions(&runs, exclusion_mode);
    ExperimentResult {
        experiment: experiment.to_string(),
        config_digest: config.digest(),
        s_run,
        base_seed,
        seeds,
        exclusion_mode,
        runs,
        distributions,
    }
}

/// Build the per-entity sample distributions of a batch. Place CO₂,
/// department, and building parameters keep every run; place quanta
/// parameters pass through the zero-quanta exclusion first.
pub fn assemble_distributions(runs: &[OutcomeMetrics], mode: ExclusionMode) -> Vec<SampleSet> {
    let mut out = Vec::new();
    let Some(first) = runs.first() else {
        return out;
    };

    for (p, place) in first.places.iter().enumerate() {
        let mut set = SampleSet {
            kind: EntityKind::Place,
            entity: place.place.clone(),
            parameter: "max_co2".into(),
            samples: Vec::with_capacity(runs.len()),
            runs: Vec::with_capacity(runs.len()),
        };
        for (i, run) in runs.iter().enumerate() {
            set.samples.push(run.places[p].max_co2);
            set.runs.push(i);
        }
        out.push(set);
    }

    // quanta samples flow through the exclusion rule as (run, place) pairs
    let mut quanta_samples = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        for place in &run.places {
            quanta_samples.push(QuantaSample {
                run: i,
                place: place.place.clone(),
                max_quanta: place.max_quanta,
                final_quanta: place.final_quanta,
            });
        }
    }
    let kept = metrics::apply_quanta_exclusion(quanta_samples, mode);
    for parameter in ["max_quanta", "final_quanta"] {
        for place in &first.places {
            let mut set = SampleSet {
                kind: EntityKind::Place,
                entity: place.place.clone(),
                parameter: parameter.into(),
                samples: Vec::new(),
                runs: Vec::new(),
            };
            for sample in kept.iter().filter(|s| s.place == place.place) {
                set.samples.push(match parameter {
                    "max_quanta" => sample.max_quanta,
                    _ => sample.final_quanta,
                });
                set.runs.push(sample.run);
            }
            out.push(set);
        }
    }

    for (d, dept) in first.departments.iter().enumerate() {
        for (parameter, pick) in [
            ("mean_inhaled_co2", 0usize),
            ("mean_inhaled_quanta", 1usize),
        ] {
            let mut set = SampleSet {
                kind: EntityKind::Department,
                entity: dept.department.clone(),
                parameter: parameter.into(),
                samples: Vec::with_capacity(runs.len()),
                runs: Vec::with_capacity(runs.len()),
            };
            for (i, run) in runs.iter().enumerate() {
                let m = &run.departments[d];
                set.samples.push(if pick == 0 {
                    m.mean_inhaled_co2
                } else {
                    m.mean_inhaled_quanta
                });
                set.runs.push(i);
            }
            out.push(set);
        }
    }

    let mut co2_set = SampleSet {
        kind: EntityKind::Building,
        entity: "building".into(),
        parameter: "volume_weighted_max_co2".into(),
        samples: Vec::with_capacity(runs.len()),
        runs: Vec::with_capacity(runs.len()),
    };
    let mut quanta_set = SampleSet {
        kind: EntityKind::Building,
        entity: "building".into(),
        parameter: "mean_inhaled_quanta".into(),
        samples: Vec::new(),
        runs: Vec::new(),
    };
    for (i, run) in runs.iter().enumerate() {
        co2_set.samples.push(run.building.volume_weighted_max_co2);
        co2_set.runs.push(i);
        if let Some(q) = run.building.mean_inhaled_quanta {
            quanta_set.samples.push(q);
            quanta_set.runs.push(i);
        }
    }
    out.push(co2_set);
    out.push(quanta_set);
    out
}

/// Coefficient of variation with the sample (n−1) standard deviation.
/// `None` when fewer than two samples or the mean is zero.
pub fn coefficient_of_variation(samples: &[f64]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(variance.sqrt() / mean)
}

/// The four critical outcome parameters tracked by the convergence study.
pub const CRITICAL_PARAMETERS: [(EntityKind, &str); 4] = [
    (EntityKind::Place, "max_co2"),
    (EntityKind::Place, "max_quanta"),
    (EntityKind::Department, "mean_inhaled_co2"),
    (EntityKind::Department, "mean_inhaled_quanta"),
];

/// CV of one critical parameter in one batch: per-entity CVs averaged over
/// the entities that have a defined CV. `None` when no entity has one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint {
    pub s_run: u32,
    pub repetition: u32,
    pub parameter: String,
    pub cv: Option<f64>,
}

fn batch_cv(result: &ExperimentResult, kind: EntityKind, parameter: &str) -> Option<f64> {
    let cvs: Vec<f64> = result
        .distributions
        .iter()
        .filter(|d| d.kind == kind && d.parameter == parameter)
        .filter_map(|d| coefficient_of_variation(&d.samples))
        .collect();
    if cvs.is_empty() {
        None
    } else {
        Some(cvs.iter().sum::<f64>() / cvs.len() as f64)
    }
}

/// Repeat batches over a grid of batch sizes and report the CV of each
/// critical outcome parameter per repetition. Repetition `r` at grid index
/// `g` roots its seeds at `split_seed(base_seed, g·1_000_003 + r)`.
pub fn cv_convergence(
    config: &SimulationConfig,
    base_seed: u64,
    grid: &[u32],
    repetitions: u32,
    parallelism: usize,
) -> Vec<CvPoint> {
    let mut out = Vec::new();
    for (g, &s_run) in grid.iter().enumerate() {
        for rep in 0..repetitions {
            let rep_seed = split_seed(base_seed, g as u64 * 1_000_003 + rep as u64);
            let result = run_batch(
                config,
                &format!("cv_s{s_run}_r{rep}"),
                s_run,
                rep_seed,
                parallelism,
                ExclusionMode::PerPlace,
            );
            for (kind, parameter) in CRITICAL_PARAMETERS {
                out.push(CvPoint {
                    s_run,
                    repetition: rep,
                    parameter: parameter.to_string(),
                    cv: batch_cv(&result, kind, parameter),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn small_config() -> SimulationConfig {
        parse_config(
            r#"{
              "events": [
                {"name": "work", "activity": "work",
                 "schedule": [["08:00", "17:00"]],
                 "duration_min": 30, "duration_max": 60},
                {"name": "coffee", "activity": "coffee",
                 "schedule": [["10:00", "10:30"]],
                 "duration_min": 5, "duration_max": 15, "repetitions_max": 2}
              ],
              "places": [
                {"name": "office", "activity": "work", "building": "b",
                 "area": 50.0, "height": 2.7, "capacity": 10,
                 "ventilation_natural": 1.5},
                {"name": "kitchen", "activity": "coffee", "building": "b",
                 "area": 20.0, "height": 2.7, "capacity": 4,
                 "ventilation_natural": 1.5}
              ],
              "people": [
                {"name": "p1", "building": "b", "department": "D1"},
                {"name": "p2", "building": "b", "department": "D1"},
                {"name": "p3", "building": "b", "department": "D1"},
                {"name": "p4", "building": "b", "department": "D1"}
              ],
              "options": {"n_infected": 1}
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn seed_splitting_has_no_collisions() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..1_000_000u64 {
            assert!(seen.insert(split_seed(42, i)));
        }
    }

    #[test]
    fn single_run_batch_equals_direct_run() {
        let config = small_config();
        let batch = run_batch(&config, "unit", 1, 99, 1, ExclusionMode::PerPlace);
        let direct = run_day(&config, split_seed(99, 0));
        let direct_metrics = metrics::compute(&direct, &config.places);
        assert_eq!(batch.runs.len(), 1);
        assert_eq!(batch.runs[0], direct_metrics);
    }

    #[test]
    fn batch_is_parallelism_invariant() {
        let config = small_config();
        let serial = run_batch(&config, "unit", 8, 7, 1, ExclusionMode::PerPlace);
        let parallel = run_batch(&config, "unit", 8, 7, 4, ExclusionMode::PerPlace);
        assert_eq!(serial.digest(), parallel.digest());
    }

    #[test]
    fn cv_conventions() {
        assert_eq!(coefficient_of_variation(&[1.0, 2.0, 3.0]), Some(0.5));
        assert_eq!(coefficient_of_variation(&[5.0, 5.0, 5.0]), Some(0.0));
        assert_eq!(coefficient_of_variation(&[1.0]), None);
        assert_eq!(coefficient_of_variation(&[-1.0, 1.0]), None);
    }

    #[test]
    fn distributions_cover_every_entity() {
        let config = small_config();
        let result = run_batch(&config, "unit", 4, 3, 2, ExclusionMode::PerPlace);
        // 2 places x (max_co2, max_quanta, final_quanta) + 1 dept x 2 + building x 2
        assert_eq!(result.distributions.len(), 2 * 3 + 2 + 2);
        let co2 = result
            .distribution(EntityKind::Place, "office", "max_co2")
            .unwrap();
        assert_eq!(co2.samples.len(), 4);
        assert_eq!(result.seeds.len(), 4);
    }
}
