//! Global temperature response to a CO₂ pulse.
//!
//! The response to 1 GtC is a sum of three exponentials, in mK:
//!
//! ```text
//! ΔT(t) = -(a1 + a2 + a3) + Σ a_i exp(-(t - t0) / τ_i)
//! ```
//!
//! which is zero at the pulse year and settles at `-(a1 + a2 + a3)`.

use crate::climate::GlobalTrajectory;
use serde::{Deserialize, Serialize};

/// Tonnes of CO₂ per tonne of carbon (molar-mass ratio 44.01 / 12.011).
pub const CO2_PER_C: f64 = 44.01 / 12.011;

/// Tonnes of CO₂ in one GtC.
pub const TCO2_PER_GTC: f64 = CO2_PER_C * 1.0e9;

const MK_TO_DEGC: f64 = 1.0e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PulseError {
    #[error("pulse year {year} lies outside the trajectory axis {first}-{last}")]
    PulseOutsideAxis { year: i32, first: i32, last: i32 },
    #[error("pulse timescales must be positive, got {0:?}")]
    NonPositiveTimescale([f64; 3]),
    #[error("pulse size must be positive, got {0}")]
    NonPositiveSize(f64),
    #[error("pulse response scale must be finite and non-negative, got {0}")]
    InvalidScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    /// mK per GtC.
    pub amplitudes: [f64; 3],
    /// Years.
    pub timescales: [f64; 3],
    /// Year the pulse is emitted.
    pub year: i32,
    /// GtC.
    pub size_gtc: f64,
}

impl Default for PulseParams {
    fn default() -> Self {
        Self {
            amplitudes: [-2.308, 0.743, -0.191],
            timescales: [2.241, 35.750, 97.180],
            year: 2010,
            size_gtc: 1.0,
        }
    }
}

impl PulseParams {
    pub fn validate(&self) -> Result<(), PulseError> {
        if self.timescales.iter().any(|&t| !(t > 0.0)) {
            return Err(PulseError::NonPositiveTimescale(self.timescales));
        }
        if !(self.size_gtc > 0.0 && self.size_gtc.is_finite()) {
            return Err(PulseError::NonPositiveSize(self.size_gtc));
        }
        Ok(())
    }

    /// Long-run warming per GtC, in mK.
    pub fn asymptote_mk(&self) -> f64 {
        -(self.amplitudes[0] + self.amplitudes[1] + self.amplitudes[2])
    }

    /// Tonnes of CO₂ in the pulse.
    pub fn tonnes_co2(&self) -> f64 {
        self.size_gtc * TCO2_PER_GTC
    }

    /// Warming in °C `elapsed` years after the pulse (zero before it).
    pub fn response(&self, elapsed: f64) -> f64 {
        if elapsed < 0.0 {
            return 0.0;
        }
        let [a1, a2, a3] = self.amplitudes;
        let [t1, t2, t3] = self.timescales;
        let decaying = a1 * (-elapsed / t1).exp() + a2 * (-elapsed / t2).exp() + a3 * (-elapsed / t3).exp();
        (self.asymptote_mk() + decaying) * self.size_gtc * MK_TO_DEGC
    }
}

/// Pulse-induced warming in °C for a calendar year.
pub fn pulse_delta_t(params: &PulseParams, year: i32) -> f64 {
    params.response(f64::from(year - params.year))
}

/// Adds the pulse response to a trajectory; years before the pulse are
/// left untouched.
pub fn perturbed_trajectory(base: &GlobalTrajectory, params: &PulseParams) -> Result<GlobalTrajectory, PulseError> {
    perturbed_trajectory_scaled(base, params, 1.0)
}

/// As [`perturbed_trajectory`] with the response multiplied by `scale`
/// (e.g. `ecs / 3.0` for sensitivity studies).
pub fn perturbed_trajectory_scaled(base: &GlobalTrajectory, params: &PulseParams, scale: f64) -> Result<GlobalTrajectory, PulseError> {
    params.validate()?;
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(PulseError::InvalidScale(scale));
    }
    let axis = base.axis();
    if !axis.contains(params.year) {
        return Err(PulseError::PulseOutsideAxis {
            year: params.year,
            first: axis.first(),
            last: axis.last(),
        });
    }
    let label = format!("{}+pulse{}", base.label(), params.year);
    Ok(base.map_values(label, |year, v| {
        if year < params.year {
            v
        } else {
            v + scale * pulse_delta_t(params, year)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axis::YearAxis;
    use proptest::prelude::*;

    /// Dense-grid evaluation of the closed form, written out term by term.
    fn oracle_mk(elapsed: f64) -> f64 {
        let a = [-2.308, 0.743, -0.191];
        let tau = [2.241, 35.750, 97.180];
        let mut v = -(a[0] + a[1] + a[2]);
        for i in 0..3 {
            v += a[i] * (-elapsed / tau[i]).exp();
        }
        v
    }

    #[test]
    fn zero_at_pulse_year() {
        let p = PulseParams::default();
        assert!(pulse_delta_t(&p, 2010).abs() < 1e-12);
        assert_eq!(pulse_delta_t(&p, 2009), 0.0);
    }

    #[test]
    fn asymptote() {
        let p = PulseParams::default();
        assert!((p.asymptote_mk() - 1.756).abs() < 1e-12);
        assert!((p.response(1e5) - 1.756e-3).abs() < 1e-9);
    }

    #[test]
    fn peak_about_a_decade_after() {
        let p = PulseParams::default();
        let argmax = (2010..=2110).max_by(|&a, &b| pulse_delta_t(&p, a).total_cmp(&pulse_delta_t(&p, b))).unwrap();
        // dense-grid oracle: continuous maximum near 9.62 years, annual maximum at +10
        let dense = (0..=100_000)
            .map(|i| i as f64 * 1e-3)
            .max_by(|a, b| oracle_mk(*a).total_cmp(&oracle_mk(*b)))
            .unwrap();
        assert!((dense - 9.62).abs() < 0.01, "{dense}");
        assert_eq!(argmax, 2020);
    }

    #[test]
    fn matches_oracle_and_stays_positive() {
        let p = PulseParams::default();
        for k in 1..=100 {
            let got = pulse_delta_t(&p, 2010 + k);
            let want = oracle_mk(f64::from(k)) * 1e-3;
            assert!((got - want).abs() < 1e-15);
            assert!(got > 0.0);
        }
        // ΔT(t0 + 20) from the oracle: 2.0248660522 mK
        assert!((pulse_delta_t(&p, 2030) - 2.024_866_052_237_754e-3).abs() < 1e-15);
    }

    #[test]
    fn perturbation() {
        let axis = YearAxis::new(2008, 2040).unwrap();
        let zero = GlobalTrajectory::new("z", axis, vec![0.0; axis.len()]).unwrap();
        let p = PulseParams::default();
        let pulsed = perturbed_trajectory(&zero, &p).unwrap();
        for y in axis.years() {
            assert_eq!(pulsed.at(y).unwrap(), pulse_delta_t(&p, y));
        }
        let base = GlobalTrajectory::new("b", axis, vec![2.0; axis.len()]).unwrap();
        let pulsed = perturbed_trajectory(&base, &p).unwrap();
        assert_eq!(pulsed.at(2009), Some(2.0));
        assert_eq!(pulsed.at(2030), Some(2.0 + oracle_mk(20.0) * 1e-3));

        let late = GlobalTrajectory::new("l", YearAxis::new(2020, 2030).unwrap(), vec![1.0; 11]).unwrap();
        assert!(matches!(perturbed_trajectory(&late, &p), Err(PulseError::PulseOutsideAxis { .. })));
    }

    #[test]
    fn unit_chain() {
        assert!((TCO2_PER_GTC - 3.664_141_2e9).abs() < 1e2);
    }

    proptest! {
        #[test]
        fn linear_in_size(k in 1i32..300, size in 0.01f64..10.0) {
            let one = PulseParams::default();
            let many = PulseParams { size_gtc: size, ..one };
            let y = 2010 + k;
            prop_assert!((pulse_delta_t(&many, y) - size * pulse_delta_t(&one, y)).abs() < 1e-15 * (1.0 + size));
        }
    }
}
