//! Well-mixed box model for per-room CO₂ and airborne quanta.
//!
//! Each room carries two scalar states, a CO₂ mixing ratio in ppm and an
//! average quanta concentration in quanta/m³, advanced over intervals of
//! constant occupancy by closed-form recurrences:
//!
//! ```text
//! C_avg ← E/(λ·V) · [1 − (1−e^{−λτ})/(λτ)] + C_avg · e^{−λτ}
//! CO₂   ← emit·3.6e6/(λa·V) · [1 − (1−e^{−λaτ})/(λaτ)] + back + (CO₂−back)·e^{−λaτ}
//! ```
//!
//! with `E = Q·(1−me·mf)·Ni·Qe` and `λ = λa + λr + λdep + k`. The state
//! carried between intervals is the recurrence value itself (an
//! interval-averaged concentration), so splitting one interval in two does
//! not reproduce the unsplit result exactly; interval boundaries are the
//! simulation's occupancy-change events. Quanta are removed by natural and
//! mechanical ventilation, deposition, and viral decay; CO₂ is removed by
//! natural (outdoor-air) ventilation only, so mechanical ventilation and
//! masks never change a CO₂ value.

use serde::{Deserialize, Serialize};

use crate::config::AerosolConstants;

/// Convert integer simulation minutes to hours for the recurrences.
pub fn minutes_to_hours(minutes: u32) -> f64 {
    minutes as f64 / 60.0
}

/// `[1 − (1−e^{−x})/x] / x`: the source-term shape factor divided by x,
/// extended continuously with `g(0) = 1/2`.
fn source_shape_over_x(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 1e-4 {
        // series of (e^{-x} - 1 + x)/x^2 around 0
        0.5 - x / 6.0 + x * x / 24.0 - x * x * x / 120.0
    } else {
        (1.0 + (-x).exp_m1() / x) / x
    }
}

/// Total CO₂ emission of `n_people` in L/s, adjusted from the reference
/// conditions (273.15 K, 1 atm) to building pressure and temperature.
pub fn co2_emission(n_people: u32, constants: &AerosolConstants) -> f64 {
    constants.co2_rate_per_person * (n_people as f64 / constants.pressure)
        * (273.15 + constants.temperature) / 273.15
}

/// Net quanta emission rate in quanta/h of `n_infected` emitters under the
/// interval's mask efficiency.
pub fn quanta_emission(n_infected: u32, mask_efficiency: f64, constants: &AerosolConstants) -> f64 {
    constants.quanta_exhalation
        * (1.0 - mask_efficiency * constants.mask_fraction)
        * n_infected as f64
        * constants.quanta_enhancement
}

/// Total first-order quanta loss rate in 1/h.
pub fn total_loss_rate(lambda_a: f64, lambda_r: f64, constants: &AerosolConstants) -> f64 {
    lambda_a + lambda_r + constants.deposition + constants.virus_decay
}

/// Advance the average quanta concentration over `tau_hours` with emission
/// `E` (quanta/h), loss rate `lambda` (1/h) and room volume (m³).
pub fn advance_quanta(c_avg: f64, tau_hours: f64, emission: f64, lambda: f64, volume: f64) -> f64 {
    let x = lambda * tau_hours;
    emission * tau_hours / volume * source_shape_over_x(x) + c_avg * (-x).exp()
}

/// Advance the CO₂ mixing ratio over `tau_hours` with total emission in L/s
/// and natural ventilation `lambda_a` (1/h).
///
/// `lambda_a = 0` takes the analytic limit of the recurrence: no decay and
/// an interval-average rise of `emit·3.6e6·τ/(2V)`.
pub fn advance_co2(
    co2: f64,
    tau_hours: f64,
    emission_l_s: f64,
    lambda_a: f64,
    volume: f64,
    background: f64,
) -> f64 {
    let x = lambda_a * tau_hours;
    let source = emission_l_s * 3.6e6 * tau_hours / volume * source_shape_over_x(x);
    source + background + (co2 - background) * (-x).exp()
}

/// Quanta inhaled by one person exposed to `c_avg` for `tau_hours` while
/// wearing a mask of efficiency `mask_efficiency`.
pub fn inhaled_quanta(
    c_avg: f64,
    tau_hours: f64,
    mask_efficiency: f64,
    constants: &AerosolConstants,
) -> f64 {
    c_avg * constants.breathing_rate * tau_hours
        * (1.0 - mask_efficiency * constants.mask_fraction)
}

/// Wells-Riley infection probability `p = 1 − e^{−n}` for `n` inhaled
/// quanta. Interpretive helper only; no core metric uses it.
pub fn infection_probability(n: f64) -> f64 {
    -(-n).exp_m1()
}

/// Per-room aerosol state plus the occupancy context of the running
/// interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AerosolState {
    /// CO₂ mixing ratio in ppm; never below background.
    pub co2: f64,
    /// Average quanta concentration in quanta/m³.
    pub quanta: f64,
    /// Minute of the last state advance.
    pub last_update: u32,
    /// Occupants during the running interval.
    pub occupants: u32,
    /// Infected occupants during the running interval.
    pub infected: u32,
    /// Mask efficiency during the running interval (max over occupants'
    /// current event models).
    pub mask_efficiency: f64,
}

/// Telemetry of one completed constant-occupancy interval, used to credit
/// occupant exposure ledgers.
#[derive(Debug, Clone, Copy)]
pub struct IntervalExposure {
    pub tau_minutes: u32,
    /// CO₂ value over the interval (the recurrence output).
    pub co2: f64,
    /// Quanta concentration over the interval (the recurrence output).
    pub quanta: f64,
    /// Quanta inhaled by each occupant over the interval.
    pub inhaled_per_person: f64,
}

impl AerosolState {
    pub fn new(background: f64, start_minute: u32) -> Self {
        AerosolState {
            co2: background,
            quanta: 0.0,
            last_update: start_minute,
            occupants: 0,
            infected: 0,
            mask_efficiency: 0.0,
        }
    }

    /// Advance the state to `now` using the running interval's context.
    /// Returns `None` for a zero-length interval (no state change, no
    /// exposure credit). `now` must not precede the last update.
    pub fn advance_to(
        &mut self,
        now: u32,
        lambda_a: f64,
        lambda_r: f64,
        volume: f64,
        constants: &AerosolConstants,
    ) -> Option<IntervalExposure> {
        assert!(
            now >= self.last_update,
            "aerosol state advanced backwards: {} -> {}",
            self.last_update,
            now
        );
        let tau_minutes = now - self.last_update;
        if tau_minutes == 0 {
            return None;
        }
        let tau = minutes_to_hours(tau_minutes);
        let emission = quanta_emission(self.infected, self.mask_efficiency, constants);
        let lambda = total_loss_rate(lambda_a, lambda_r, constants);
        self.quanta = advance_quanta(self.quanta, tau, emission, lambda, volume);
        self.co2 = advance_co2(
            self.co2,
            tau,
            co2_emission(self.occupants, constants),
            lambda_a,
            volume,
            constants.co2_background,
        );
        self.last_update = now;
        Some(IntervalExposure {
            tau_minutes,
            co2: self.co2,
            quanta: self.quanta,
            inhaled_per_person: inhaled_quanta(self.quanta, tau, self.mask_efficiency, constants),
        })
    }

    /// Replace the occupancy context after a membership change.
    pub fn set_context(&mut self, occupants: u32, infected: u32, mask_efficiency: f64) {
        debug_assert!(infected <= occupants);
        self.occupants = occupants;
        self.infected = infected;
        self.mask_efficiency = mask_efficiency;
    }
}

/// Cumulative physiological exposure of one person.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Exposure {
    /// Total quanta inhaled.
    pub quanta: f64,
    /// Time-weighted CO₂ integral in ppm·minutes.
    pub co2_ppm_minutes: f64,
    /// Minutes of exposure accounted for.
    pub minutes: u32,
}

impl Exposure {
    pub fn credit(&mut self, interval: &IntervalExposure) {
        self.quanta += interval.inhaled_per_person;
        self.co2_ppm_minutes += interval.co2 * interval.tau_minutes as f64;
        self.minutes += interval.tau_minutes;
    }

    /// Time-weighted mean inhaled CO₂ in ppm.
    pub fn mean_co2(&self) -> f64 {
        if self.minutes == 0 {
            0.0
        } else {
            self.co2_ppm_minutes / self.minutes as f64
        }
    }
}
