//! Agent decision-making: priority-weighted activity selection, duration
//! sampling, place assignment, and collective-event planning.
//!
//! The priority of an event model is a piecewise-linear function of the
//! agent's completed repetition count `e` with breakpoints at the minimum
//! `r` and maximum `R` repetitions:
//!
//! ```text
//! Priority(e) = 1 − (1−α)·e/r   for 0 ≤ e < r
//!             = α·(R−e)/(R−r)   for r ≤ e < R
//!             = 0               for e ≥ R
//! ```
//!
//! Degenerate parameters take the continuous limits: `r = 0` uses
//! `α·(R−e)/R`, an unbounded `R` holds the weight at `α` once `e ≥ r`, and
//! `r = R` drops to zero immediately after the mandatory repetitions.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::EventModel;

/// Piecewise-linear selection weight for a model with repetition count `e`,
/// bounds `r ≤ R` (`None` = unbounded), and mid-level `alpha`.
pub fn priority(e: u32, r: u32, rmax: Option<u32>, alpha: f64) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    if let Some(rmax) = rmax {
        debug_assert!(r <= rmax);
        if e >= rmax {
            return 0.0;
        }
        if e < r {
            return 1.0 - (1.0 - alpha) * e as f64 / r as f64;
        }
        if rmax == r {
            // e >= r == rmax handled above; nothing left between
            return 0.0;
        }
        if r == 0 {
            return alpha * (rmax - e) as f64 / rmax as f64;
        }
        alpha * (rmax - e) as f64 / (rmax - r) as f64
    } else if e < r {
        1.0 - (1.0 - alpha) * e as f64 / r as f64
    } else {
        alpha
    }
}

/// An event model eligible at the current minute, with its selection weight
/// and the end of the schedule window containing the minute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub model: usize,
    pub weight: f64,
    pub window_end: u32,
}

/// The window of `model` containing `minute`, if any.
pub fn open_window(model: &EventModel, minute: u32) -> Option<(u32, u32)> {
    model
        .schedule
        .iter()
        .find(|w| w.contains(minute))
        .map(|w| (w.start, w.end))
}

/// Collect the models an agent may start right now. A model is eligible when
/// a schedule window is open with enough remainder for `duration_min` before
/// both window end and day end, the repetition cap is not exhausted, and
/// `place_available` confirms a feasible place.
pub fn eligible_models<F>(
    models: &[EventModel],
    counts: &[u32],
    now: u32,
    day_end: u32,
    alpha: f64,
    mut place_available: F,
) -> Vec<Candidate>
where
    F: FnMut(usize) -> bool,
{
    let mut out = Vec::new();
    for (idx, model) in models.iter().enumerate() {
        if let Some(rmax) = model.repetitions_max {
            if counts[idx] >= rmax {
                continue;
            }
        }
        let Some((_, window_end)) = open_window(model, now) else {
            continue;
        };
        let horizon = window_end.min(day_end);
        if horizon < now + model.duration_min {
            continue;
        }
        if !place_available(idx) {
            continue;
        }
        let weight = priority(counts[idx], model.repetitions_min, model.repetitions_max, alpha);
        debug_assert!(weight > 0.0);
        out.push(Candidate {
            model: idx,
            weight,
            window_end,
        });
    }
    out
}

/// Sample one candidate with probability proportional to its weight.
pub fn select_weighted<R: Rng>(candidates: &[Candidate], rng: &mut R) -> Option<Candidate> {
    if candidates.is_empty() {
        return None;
    }
    let total: f64 = candidates.iter().map(|c| c.weight).sum();
    let mut target = rng.random::<f64>() * total;
    for candidate in candidates {
        target -= candidate.weight;
        if target <= 0.0 {
            return Some(*candidate);
        }
    }
    Some(candidates[candidates.len() - 1])
}

/// Uniform integer duration in `[duration_min, duration_max]`, truncated so
/// the activity ends within the current window and before day end. Callers
/// guarantee the remainder is at least `duration_min`.
pub fn sample_duration<R: Rng>(
    model: &EventModel,
    now: u32,
    window_end: u32,
    day_end: u32,
    rng: &mut R,
) -> u32 {
    let sampled = rng.random_range(model.duration_min..=model.duration_max);
    let remainder = window_end.min(day_end) - now;
    debug_assert!(remainder >= model.duration_min);
    sampled.min(remainder)
}

/// Uniform choice among feasible place indices.
pub fn select_place<R: Rng>(feasible: &[usize], rng: &mut R) -> Option<usize> {
    match feasible.len() {
        0 => None,
        1 => Some(feasible[0]),
        n => Some(feasible[rng.random_range(0..n)]),
    }
}

/// Plan a collective gathering: draw the target size uniformly in
/// `[2, min(capacity, 1 + available)]` and draft that many invitees from
/// `available` without replacement. Returns the drafted invitees in draw
/// order; empty when nobody can be drafted (the gathering proceeds solo).
pub fn draft_invitees<R: Rng>(capacity: u32, available: &[usize], rng: &mut R) -> Vec<usize> {
    if available.is_empty() || capacity < 2 {
        return Vec::new();
    }
    let max_size = capacity.min(1 + available.len() as u32);
    if max_size < 2 {
        return Vec::new();
    }
    let size = rng.random_range(2..=max_size);
    let mut pool: Vec<usize> = available.to_vec();
    let (drafted, _) = pool.partial_shuffle(rng, (size - 1) as usize);
    drafted.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TimeWindow;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn model(name: &str, windows: &[(u32, u32)], dur: (u32, u32), reps: (u32, Option<u32>)) -> EventModel {
        EventModel {
            name: name.into(),
            activity: name.into(),
            schedule: windows.iter().map(|&(start, end)| TimeWindow { start, end }).collect(),
            duration_min: dur.0,
            duration_max: dur.1,
            repetitions_min: reps.0,
            repetitions_max: reps.1,
            mask_efficiency: 0.0,
            collective: false,
        }
    }

    #[test]
    fn priority_fixed_points() {
        assert_eq!(priority(0, 2, Some(8), 0.5), 1.0);
        assert_eq!(priority(2, 2, Some(8), 0.5), 0.5);
        assert_eq!(priority(8, 2, Some(8), 0.5), 0.0);
        assert_eq!(priority(9, 2, Some(8), 0.5), 0.0);
        // first branch, hand-evaluated
        assert_eq!(priority(1, 2, Some(8), 0.5), 0.75);
    }

    #[test]
    fn priority_degenerate_cases() {
        // r = 0: first branch skipped
        assert_eq!(priority(0, 0, Some(4), 0.5), 0.5);
        assert_eq!(priority(2, 0, Some(4), 0.5), 0.25);
        // unbounded R: constant alpha after r
        assert_eq!(priority(0, 0, None, 0.5), 0.5);
        assert_eq!(priority(100, 0, None, 0.5), 0.5);
        assert_eq!(priority(0, 2, None, 0.5), 1.0);
        // r = R: mandatory-only models drop to zero immediately
        assert_eq!(priority(0, 1, Some(1), 0.5), 1.0);
        assert_eq!(priority(1, 1, Some(1), 0.5), 0.0);
    }

    #[test]
    fn priority_is_monotone_and_continuous() {
        let (r, rmax, alpha) = (3, 9, 0.4);
        let mut prev = f64::INFINITY;
        for e in 0..=rmax {
            let w = priority(e, r, Some(rmax), alpha);
            assert!(w <= prev + 1e-12, "not non-increasing at e={e}");
            prev = w;
        }
        // continuity at the breakpoint: both branches meet at alpha
        assert!((priority(r, r, Some(rmax), alpha) - alpha).abs() < 1e-12);
        // mandatory phase always outranks the optional phase
        for e_mand in 0..r {
            for e_opt in r..rmax {
                assert!(
                    priority(e_mand, r, Some(rmax), alpha)
                        > priority(e_opt, r, Some(rmax), alpha)
                );
            }
        }
    }

    #[test]
    fn single_eligible_model_always_selected() {
        let models = vec![model("work", &[(480, 1020)], (30, 60), (0, None))];
        let counts = vec![0];
        let mut r = rng();
        for _ in 0..50 {
            let cands = eligible_models(&models, &counts, 500, 1020, 0.5, |_| true);
            assert_eq!(select_weighted(&cands, &mut r).unwrap().model, 0);
        }
    }

    #[test]
    fn zero_weight_models_never_win() {
        let cands = vec![
            Candidate { model: 0, weight: 1.0, window_end: 1020 },
            Candidate { model: 1, weight: 0.0, window_end: 1020 },
        ];
        let mut r = rng();
        for _ in 0..200 {
            assert_eq!(select_weighted(&cands, &mut r).unwrap().model, 0);
        }
    }

    #[test]
    fn weighted_selection_ratio() {
        let cands = vec![
            Candidate { model: 0, weight: 0.75, window_end: 1020 },
            Candidate { model: 1, weight: 0.25, window_end: 1020 },
        ];
        let mut r = rng();
        let n = 100_000;
        let wins = (0..n)
            .filter(|_| select_weighted(&cands, &mut r).unwrap().model == 0)
            .count();
        let ratio = wins as f64 / n as f64;
        assert!((ratio - 0.75).abs() < 0.75 * 0.05, "ratio {ratio}");
    }

    #[test]
    fn window_remainder_gates_eligibility() {
        // 25 minutes left before window end but duration_min is 30
        let models = vec![model("work", &[(480, 1020)], (30, 60), (0, None))];
        let counts = vec![0];
        let cands = eligible_models(&models, &counts, 995, 1020, 0.5, |_| true);
        assert!(cands.is_empty());
        // exactly duration_min left is still fine
        let cands = eligible_models(&models, &counts, 990, 1020, 0.5, |_| true);
        assert_eq!(cands.len(), 1);
    }

    #[test]
    fn day_end_gates_eligibility() {
        let models = vec![model("work", &[(480, 1020)], (30, 60), (0, None))];
        let counts = vec![0];
        let cands = eligible_models(&models, &counts, 700, 720, 0.5, |_| true);
        assert!(cands.is_empty());
    }

    #[test]
    fn exhausted_repetitions_gate_eligibility() {
        let models = vec![model("coffee", &[(600, 630)], (5, 15), (0, Some(2)))];
        let cands = eligible_models(&models, &[2], 610, 1020, 0.5, |_| true);
        assert!(cands.is_empty());
        let cands = eligible_models(&models, &[1], 610, 1020, 0.5, |_| true);
        assert_eq!(cands.len(), 1);
    }

    #[test]
    fn duration_degenerate_and_truncated() {
        let m = model("x", &[(480, 1020)], (20, 20), (0, None));
        let mut r = rng();
        assert_eq!(sample_duration(&m, 500, 1020, 1020, &mut r), 20);
        let m = model("x", &[(480, 1020)], (30, 60), (0, None));
        // 35 minutes of window left: sampled values above 35 clamp down
        for _ in 0..100 {
            let d = sample_duration(&m, 985, 1020, 1020, &mut r);
            assert!((30..=35).contains(&d));
        }
    }

    #[test]
    fn duration_uniform_mean() {
        let m = model("x", &[(0, 1440)], (20, 45), (0, None));
        let mut r = rng();
        let n = 100_000;
        let sum: u64 = (0..n).map(|_| sample_duration(&m, 0, 1440, 1440, &mut r) as u64).sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 32.5).abs() < 0.5, "mean {mean}");
    }

    #[test]
    fn draft_respects_capacity_and_pool() {
        let mut r = rng();
        let available: Vec<usize> = (0..40).collect();
        for _ in 0..200 {
            let drafted = draft_invitees(4, &available, &mut r);
            // gathering size (initiator + invitees) within [2, 4]
            assert!((1..=3).contains(&drafted.len()));
            let mut seen = drafted.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), drafted.len(), "duplicate invitee");
        }
        assert!(draft_invitees(4, &[], &mut r).is_empty());
        assert!(draft_invitees(1, &available, &mut r).is_empty());
    }
}
