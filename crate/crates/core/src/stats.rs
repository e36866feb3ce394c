//! Statistical comparison of experiment outcome distributions against a
//! baseline: Welch's t and Mann-Whitney U location tests, Cohen's d and
//! rank-based effect sizes, percentage differences, and the significance
//! rule (p < 0.001 and |effect| ≥ 0.5).
//!
//! Both test families are always computed and reported side by side. A
//! normality-gated protocol would pick Welch + Cohen's d for normal data
//! and Mann-Whitney + rank r otherwise; with both present the choice can be
//! made while reading the report.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::batch::{EntityKind, ExperimentResult, SampleSet};

/// Welch's unequal-variance t-test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Mann-Whitney U test result (normal approximation with tie and
/// continuity corrections).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyTest {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// The corrected standard score behind `p`; also feeds the rank-based
    /// effect size r = z/√(n_a+n_b).
    pub z: f64,
}

/// Welch's t-test. `None` when either sample has fewer than two values or
/// both have zero variance.
pub fn welch_t(a: &[f64], b: &[f64]) -> Option<WelchTest> {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a, ma), sample_variance(b, mb));
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return None;
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Some(WelchTest { t, df, p })
}

/// Mann-Whitney U with average ranks for ties, tie-corrected variance, and
/// a 0.5 continuity correction. `None` beloweight samples per side (the
/// normal-approximation regime this implementation is documented for);
/// fully tied data yields `p = 1`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Option<MannWhitneyTest> {
    let (na, nb) = (a.len(), b.len());
    if na < 8 || nb < 8 {
        return None;
    }
    let mut combined: Vec<f64> = Vec::with_capacity(na + nb);
    combined.extend_from_slice(a);
    combined.extend_from_slice(b);
    let (ranks, tie_term) = average_ranks(&combined);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let (naf, nbf) = (na as f64, nb as f64);
    let u = rank_sum_a - naf * (naf + 1.0) / 2.0;
    let mu = naf * nbf / 2.0;
    let n = naf + nbf;
    let variance = naf * nbf / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        // every observation tied with every other
        return Some(MannWhitneyTest { u, p: 1.0, z: 0.0 });
    }
    let sigma = variance.sqrt();
    let diff = u - mu;
    let corrected = diff - 0.5 * diff.signum();
    let z = if diff == 0.0 { 0.0 } else { corrected / sigma };
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = (2.0 * normal.cdf(-z.abs())).min(1.0);
    Some(MannWhitneyTest { u, p, z })
}

/// Cohen's d with the pooled-variance convention. `None` when a side has
/// fewer than two values or the pooled variance vanishes.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a, ma), sample_variance(b, mb));
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    if pooled == 0.0 {
        return None;
    }
    Some((ma - mb) / pooled.sqrt())
}

/// Rank-based effect size `r = z/√(n_a+n_b)` from the U test's corrected z.
pub fn rank_effect_size(a: &[f64], b: &[f64]) -> Option<f64> {
    let test = mann_whitney_u(a, b)?;
    Some(test.z / ((a.len() + b.len()) as f64).sqrt())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_variance(values: &[f64], mean: f64) -> f64 {
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// 1-based average ranks of `values` plus the tie-correction term
/// `Σ(t³ − t)` over tie groups.
fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite samples"));
    let mut ranks = vec![0.0; values.len()];
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let average = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = average;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    (ranks, tie_term)
}

/// Everything compared for one (entity, parameter) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub kind: EntityKind,
    pub entity: String,
    pub parameter: String,
    pub n_baseline: usize,
    pub n_experiment: usize,
    pub mean_baseline: f64,
    pub mean_experiment: f64,
    /// `(mean_exp − mean_base)/mean_base · 100`; absent when the baseline
    /// mean is zero.
    pub percent_difference: Option<f64>,
    pub welch: Option<WelchTest>,
    pub mann_whitney: Option<MannWhitneyTest>,
    pub cohens_d: Option<f64>,
    pub rank_r: Option<f64>,
    /// p < 0.001 and |d| ≥ 0.5 for the parametric family.
    pub significant_parametric: bool,
    /// p < 0.001 and |r| ≥ 0.5 for the non-parametric family.
    pub significant_nonparametric: bool,
    /// Either family satisfied the rule. Absent when a side's distribution
    /// is too small after exclusion to test.
    pub verdict: Option<bool>,
}

/// Full comparison of an experiment against baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: String,
    pub experiment: String,
    pub baseline_digest: String,
    pub experiment_digest: String,
    /// How a normality-gated protocol would read this report.
    pub protocol_note: String,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("entity sets differ between baseline and experiment:\n{differences}")]
    EntityMismatch { differences: String },
}

const SIGNIFICANCE_P: f64 = 0.001;
const SIGNIFICANCE_EFFECT: f64 = 0.5;

fn protocol_note() -> String {
    "both test families are reported; a normality-gated protocol selects \
     welch/cohens_d for normally distributed parameters and \
     mann_whitney/rank_r otherwise"
        .to_string()
}

/// Compare two batched experiments distribution by distribution. Both must
/// cover the same entities unless `intersect` is set, in which case only
/// shared (entity, parameter) pairs are compared. Quanta exclusion has
/// already been applied when the distributions were assembled.
pub fn compare_experiments(
    baseline: &ExperimentResult,
    experiment: &ExperimentResult,
    intersect: bool,
) -> Result<ComparisonReport, CompareError> {
    if !intersect {
        let missing: Vec<String> = baseline
            .distributions
            .iter()
            .filter(|d| find(&experiment.distributions, d).is_none())
            .map(describe)
            .collect();
        let extra: Vec<String> = experiment
            .distributions
            .iter()
            .filter(|d| find(&baseline.distributions, d).is_none())
            .map(describe)
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            let mut differences = String::new();
            if !missing.is_empty() {
                differences.push_str(&format!("missing in experiment: {}\n", missing.join(", ")));
            }
            if !extra.is_empty() {
                differences.push_str(&format!("missing in baseline: {}", extra.join(", ")));
            }
            return Err(CompareError::EntityMismatch {
                differences: differences.trim_end().to_string(),
            });
        }
    }

    let mut rows = Vec::new();
    for base_set in &baseline.distributions {
        let Some(exp_set) = find(&experiment.distributions, base_set) else {
            continue;
        };
        rows.push(compare_sets(base_set, exp_set));
    }
    Ok(ComparisonReport {
        baseline: baseline.experiment.clone(),
        experiment: experiment.experiment.clone(),
        baseline_digest: baseline.config_digest.clone(),
        experiment_digest: experiment.config_digest.clone(),
        protocol_note: protocol_note(),
        rows,
    })
}

fn find<'a>(haystack: &'a [SampleSet], needle: &SampleSet) -> Option<&'a SampleSet> {
    haystack
        .iter()
        .find(|d| d.kind == needle.kind && d.entity == needle.entity && d.parameter == needle.parameter)
}

fn describe(set: &SampleSet) -> String {
    format!("{:?}/{}/{}", set.kind, set.entity, set.parameter)
}

fn compare_sets(base: &SampleSet, exp: &SampleSet) -> ComparisonRow {
    let a = &exp.samples;
    let b = &base.samples;
    let testable = a.len() >= 2 && b.len() >= 2;
    let mean_baseline = if b.is_empty() { 0.0 } else { mean(b) };
    let mean_experiment = if a.is_empty() { 0.0 } else { mean(a) };
    let percent_difference = if mean_baseline != 0.0 {
        Some((mean_experiment - mean_baseline) / mean_baseline * 100.0)
    } else {
        None
    };
    let welch = if testable { welch_t(a, b) } else { None };
    let mann_whitney = if testable { mann_whitney_u(a, b) } else { None };
    let d = if testable { cohens_d(a, b) } else { None };
    let r = mann_whitney.map(|m| m.z / ((a.len() + b.len()) as f64).sqrt());
    let significant_parametric = matches!(
        (welch, d),
        (Some(w), Some(d)) if w.p < SIGNIFICANCE_P && d.abs() >= SIGNIFICANCE_EFFECT
    );
    let significant_nonparametric = matches!(
        (mann_whitney, r),
        (Some(m), Some(r)) if m.p < SIGNIFICANCE_P && r.abs() >= SIGNIFICANCE_EFFECT
    );
    let verdict = if testable {
        Some(significant_parametric || significant_nonparametric)
    } else {
        None
    };
    ComparisonRow {
        kind: base.kind,
        entity: base.entity.clone(),
        parameter: base.parameter.clone(),
        n_baseline: b.len(),
        n_experiment: a.len(),
        mean_baseline,
        mean_experiment,
        percent_difference,
        welch,
        mann_whitney,
        cohens_d: d,
        rank_r: r,
        significant_parametric,
        significant_nonparametric,
        verdict,
    }
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn row(&self, kind: EntityKind, entity: &str, parameter: &str) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.entity == entity && r.parameter == parameter)
    }

    /// Fixed-width human-readable table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "comparison: {} vs baseline {}\n{:<12} {:<22} {:<22} {:>10} {:>10} {:>8} {:>11} {:>11} {:>8} {:>8}  verdict\n",
            self.experiment,
            self.baseline,
            "kind",
            "entity",
            "parameter",
            "mean_base",
            "mean_exp",
            "diff_%",
            "welch_p",
            "mwu_p",
            "d",
            "r",
        );
        for row in &self.rows {
            let fmt_opt = |v: Option<f64>| match v {
                Some(v) => format!("{v:.3}"),
                None => "-".into(),
            };
            let fmt_p = |v: Option<f64>| match v {
                Some(p) => format!("{p:.2e}"),
                None => "-".into(),
            };
            out.push_str(&format!(
                "{:<12} {:<22} {:<22} {:>10.4} {:>10.4} {:>8} {:>11} {:>11} {:>8} {:>8}  {}\n",
                format!("{:?}", row.kind).to_lowercase(),
                row.entity,
                row.parameter,
                row.mean_baseline,
                row.mean_experiment,
                fmt_opt(row.percent_difference),
                fmt_p(row.welch.map(|w| w.p)),
                fmt_p(row.mann_whitney.map(|m| m.p)),
                fmt_opt(row.cohens_d),
                fmt_opt(row.rank_r),
                match row.verdict {
                    Some(true) => "significant",
                    Some(false) => "-",
                    None => "untestable",
                }
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn seq(range: std::ops::Range<i32>) -> Vec<f64> {
        range.map(f64::from).collect()
    }

    #[test]
    fn identical_samples_are_null() {
        let a = seq(1..21);
        let w = welch_t(&a, &a).unwrap();
        assert_eq!(w.t, 0.0);
        assert_eq!(w.p, 1.0);
        let m = mann_whitney_u(&a, &a).unwrap();
        assert_eq!(m.z, 0.0);
        assert_eq!(m.p, 1.0);
        assert_eq!(cohens_d(&a, &a), Some(0.0));
        assert_eq!(rank_effect_size(&a, &a), Some(0.0));
    }

    #[test]
    fn shifted_samples_are_extreme() {
        let a = seq(1..21);
        let b: Vec<f64> = a.iter().map(|v| v + 10.0).collect();
        let w = welch_t(&a, &b).unwrap();
        assert!(w.t < 0.0);
        assert!(w.p < 1e-4, "p = {}", w.p);
        let m = mann_whitney_u(&a, &b).unwrap();
        assert!(m.p < 1e-4, "p = {}", m.p);
        // fully disjoint supports: U of the lower sample is 0
        let low = seq(1..11);
        let high = seq(100..110);
        let m = mann_whitney_u(&low, &high).unwrap();
        assert_eq!(m.u, 0.0);
        assert!(m.p < 1e-3);
        let m = mann_whitney_u(&high, &low).unwrap();
        assert_eq!(m.u, (low.len() * high.len()) as f64);
    }

    #[test]
    fn degenerate_variance_is_reported_none() {
        let flat = vec![5.0; 10];
        assert!(welch_t(&flat, &flat).is_none());
        assert!(cohens_d(&flat, &flat).is_none());
        // fully tied data in the U test gives p = 1 instead
        let m = mann_whitney_u(&flat, &flat).unwrap();
        assert_eq!(m.p, 1.0);
    }

    #[test]
    fn swap_antisymmetry() {
        let a = vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.5, 3.5, 2.5, 7.0, 1.5];
        let b = vec![2.0, 4.0, 3.0, 6.0, 5.0, 7.5, 4.5, 3.5, 8.0, 2.5];
        let (w_ab, w_ba) = (welch_t(&a, &b).unwrap(), welch_t(&b, &a).unwrap());
        assert_relative_eq!(w_ab.t, -w_ba.t, max_relative = 1e-12);
        assert_relative_eq!(w_ab.p, w_ba.p, max_relative = 1e-12);
        let (d_ab, d_ba) = (cohens_d(&a, &b).unwrap(), cohens_d(&b, &a).unwrap());
        assert_relative_eq!(d_ab, -d_ba, max_relative = 1e-12);
        let (r_ab, r_ba) = (
            rank_effect_size(&a, &b).unwrap(),
            rank_effect_size(&b, &a).unwrap(),
        );
        assert_relative_eq!(r_ab, -r_ba, max_relative = 1e-12);
    }

    #[test]
    fn scale_invariance() {
        let a: Vec<f64> = (1..=12).map(|v| v as f64 * 1.3).collect();
        let b: Vec<f64> = (1..=12).map(|v| v as f64 * 1.3 + 2.0).collect();
        let scale = |s: &[f64], c: f64| s.iter().map(|v| v * c).collect::<Vec<_>>();
        let (a2, b2) = (scale(&a, 7.5), scale(&b, 7.5));
        assert_relative_eq!(
            welch_t(&a, &b).unwrap().p,
            welch_t(&a2, &b2).unwrap().p,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            mann_whitney_u(&a, &b).unwrap().p,
            mann_whitney_u(&a2, &b2).unwrap().p,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            cohens_d(&a, &b).unwrap(),
            cohens_d(&a2, &b2).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            rank_effect_size(&a, &b).unwrap(),
            rank_effect_size(&a2, &b2).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn full_separation_r_matches_analytic_max() {
        // n_a = n_b = 10, all a below all b: U = 0,
        // z = (0 - 50 + 0.5)/sqrt(10*10*21/12), r = z/sqrt(20)
        let a = seq(1..11);
        let b = seq(100..110);
        let sigma = (10.0f64 * 10.0 * 21.0 / 12.0).sqrt();
        let expected = (-49.5 / sigma) / 20.0f64.sqrt();
        let r = rank_effect_size(&a, &b).unwrap();
        assert_relative_eq!(r, expected, max_relative = 1e-12);
    }

    #[test]
    fn cohens_d_unit_difference() {
        // shifting a sample by exactly its pooled sd gives d = 1
        let base = vec![-1.0, 0.0, 1.0, -0.5, 0.5, 0.0, -1.5, 1.5];
        let sd = sample_variance(&base, mean(&base)).sqrt();
        let shifted: Vec<f64> = base.iter().map(|v| v + sd).collect();
        let d = cohens_d(&shifted, &base).unwrap();
        assert_relative_eq!(d, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn welch_p_is_calibrated_under_the_null() {
        // samples from the same normal: p should be uniform; check the
        // empirical CDF at a few quantiles over many trials
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut ps = Vec::new();
        for _ in 0..1000 {
            let normal = |rng: &mut rand_chacha::ChaCha8Rng| {
                // Box-Muller from two uniforms
                let u1: f64 = rng.random::<f64>().max(1e-12);
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            };
            let a: Vec<f64> = (0..20).map(|_| normal(&mut rng)).collect();
            let b: Vec<f64> = (0..20).map(|_| normal(&mut rng)).collect();
            ps.push(welch_t(&a, &b).unwrap().p);
        }
        ps.sort_by(|x, y| x.partial_cmp(y).unwrap());
        // Kolmogorov-Smirnov against U(0,1) at alpha = 0.01: D_crit ≈ 1.63/sqrt(n)
        let n = ps.len() as f64;
        let d_stat = ps
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let ecdf_hi = (i + 1) as f64 / n;
                let ecdf_lo = i as f64 / n;
                (ecdf_hi - p).abs().max((p - ecdf_lo).abs())
            })
            .fold(0.0f64, f64::max);
        assert!(d_stat < 1.63 / n.sqrt(), "KS statistic {d_stat}");
    }
}
