//! Closed forms for a Gaussian packet measured through Gaussian kernels, and
//! for the oscillator ground state. Every numerical path is checked against
//! these.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{error_indicators, EntropyReport, ErrorIndicators, MotionalEntropy};
use crate::observables::{ParameterSet, Reading};
use crate::state::PhysicalConstants;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianScenario {
    pub x0: f64,
    pub alpha: f64,
    pub k: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub constants: PhysicalConstants,
}

impl GaussianScenario {
    pub fn new(x0: f64, alpha: f64, k: f64, sigma: f64, lambda: f64) -> Self {
        Self {
            x0,
            alpha,
            k,
            sigma,
            lambda,
            constants: PhysicalConstants::default(),
        }
    }

    pub fn with_constants(mut self, constants: PhysicalConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {}", self.alpha)));
        }
        for (name, w) in [("sigma", self.sigma), ("lambda", self.lambda)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be nonnegative, got {w}")));
            }
        }
        if !self.x0.is_finite() || !self.k.is_finite() {
            return Err(Error::InvalidInput("x0 and k must be finite".into()));
        }
        Ok(())
    }

    /// The recorded momentum spread is finite only while
    /// `α² + 2σ² > λ²`; with `k = 0` the divergent term drops out.
    pub fn check_domain(&self) -> Result<()> {
        self.validate()?;
        let lhs = self.alpha * self.alpha + 2.0 * self.sigma * self.sigma;
        let rhs = self.lambda * self.lambda;
        if self.k != 0.0 && lhs <= rhs {
            return Err(Error::DomainViolation { lhs, rhs });
        }
        Ok(())
    }

    pub fn density_variance_pr(&self) -> f64 {
        self.alpha * self.alpha + self.sigma * self.sigma
    }

    pub fn current_variance_pr(&self) -> f64 {
        self.alpha * self.alpha + self.lambda * self.lambda
    }

    /// Half-width of the region carrying `J_PR²/ρ_PR`, the slowest-decaying
    /// integrand on the recorded side (infinite outside the domain).
    pub fn velocity_weight_width(&self) -> f64 {
        if self.k == 0.0 {
            return 0.0;
        }
        let s = self.density_variance_pr();
        let l = self.current_variance_pr();
        if 2.0 * s <= l {
            return f64::INFINITY;
        }
        (s * l / (2.0 * s - l)).sqrt()
    }
}

/// `amplitude · N(x; center, variance)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCurve {
    pub amplitude: f64,
    pub center: f64,
    pub variance: f64,
}

impl GaussianCurve {
    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.center;
        self.amplitude * (-d * d / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).sqrt()
    }

    /// `−∫|c·N| ln|c·N| dx` in closed form.
    pub fn entropy(&self) -> f64 {
        let c = self.amplitude.abs();
        if c == 0.0 {
            return 0.0;
        }
        -c * c.ln() + c * 0.5 * (2.0 * PI * E * self.variance).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormFields {
    pub density_in: GaussianCurve,
    pub current_in: GaussianCurve,
    pub density_pr: GaussianCurve,
    pub current_pr: GaussianCurve,
}

pub fn closed_form_fields(s: &GaussianScenario) -> Result<ClosedFormFields> {
    s.validate()?;
    let a2 = s.alpha * s.alpha;
    let flux = s.constants.hbar * s.k / s.constants.mass;
    let curve = |amplitude, variance| GaussianCurve {
        amplitude,
        center: s.x0,
        variance,
    };
    Ok(ClosedFormFields {
        density_in: curve(1.0, a2),
        current_in: curve(flux, a2),
        density_pr: curve(1.0, s.density_variance_pr()),
        current_pr: curve(flux, s.current_variance_pr()),
    })
}

/// Recorded momentum spread of the Gaussian packet.
pub fn momentum_spread_pr(s: &GaussianScenario) -> Result<f64> {
    s.check_domain()?;
    let hbar = s.constants.hbar;
    let (a2, s2, l2) = (s.alpha * s.alpha, s.sigma * s.sigma, s.lambda * s.lambda);
    let var_x = a2 + s2;
    if s.k == 0.0 {
        return Ok(hbar / (2.0 * var_x.sqrt()));
    }
    let k2 = s.k * s.k;
    let radicand = a2 * a2 - l2 * l2 + 2.0 * s2 * (a2 + l2);
    let inner = k2 * var_x / radicand.sqrt() - k2 + 1.0 / (4.0 * var_x);
    Ok(hbar * inner.sqrt())
}

fn gaussian_set(reading: Reading, x_mean: f64, p_mean: f64, dx: f64, dp: f64, hbar: f64) -> ParameterSet {
    let mut set = ParameterSet::empty(reading);
    set.labels = vec!["x".into(), "p".into()];
    set.means.insert("x".into(), x_mean);
    set.means.insert("p".into(), p_mean);
    set.stddevs.insert("x".into(), dx);
    set.stddevs.insert("p".into(), dp);
    set.set_correlation("x", "x", Complex64::new(dx * dx, 0.0));
    set.set_correlation("x", "p", Complex64::new(0.0, hbar / 2.0));
    set.set_correlation("p", "x", Complex64::new(0.0, -hbar / 2.0));
    set.set_correlation("p", "p", Complex64::new(dp * dp, 0.0));
    set
}

/// Exact IN and PR parameter sets for `{x, p}`.
pub fn closed_form_parameters(s: &GaussianScenario) -> Result<(ParameterSet, ParameterSet)> {
    let dp_pr = momentum_spread_pr(s)?;
    let hbar = s.constants.hbar;
    let p_mean = hbar * s.k;
    let intrinsic = gaussian_set(Reading::Intrinsic, s.x0, p_mean, s.alpha, hbar / (2.0 * s.alpha), hbar);
    let recorded = gaussian_set(
        Reading::Prognosticated,
        s.x0,
        p_mean,
        s.density_variance_pr().sqrt(),
        dp_pr,
        hbar,
    );
    Ok((intrinsic, recorded))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormIndicators {
    pub errors: ErrorIndicators,
    /// `Δ_PR p − Δ_IN p` without the absolute value.
    pub momentum_spread_shift: f64,
    pub entropy: EntropyReport,
}

pub fn closed_form_indicators(s: &GaussianScenario) -> Result<ClosedFormIndicators> {
    let (intrinsic, recorded) = closed_form_parameters(s)?;
    let errors = error_indicators(&recorded, &intrinsic)?;
    let fields = closed_form_fields(s)?;
    let defined = s.k != 0.0;
    let tau = |c: &GaussianCurve| MotionalEntropy {
        value: if defined { c.entropy() } else { 0.0 },
        defined,
    };
    let entropy = EntropyReport::new(
        fields.density_in.entropy(),
        fields.density_pr.entropy(),
        tau(&fields.current_in),
        tau(&fields.current_pr),
    );
    Ok(ClosedFormIndicators {
        momentum_spread_shift: errors.stddev_shifts["p"],
        errors,
        entropy,
    })
}

/// `δH = ½ ln(1 + σ²/α²)`
pub fn positional_entropy_gain(s: &GaussianScenario) -> f64 {
    0.5 * (1.0 + (s.sigma / s.alpha).powi(2)).ln()
}

/// `δτ = (ħ|k|/2m) ln(1 + λ²/α²)`
pub fn motional_entropy_gain(s: &GaussianScenario) -> f64 {
    s.constants.hbar * s.k.abs() / (2.0 * s.constants.mass) * (1.0 + (s.lambda / s.alpha).powi(2)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorScenario {
    pub omega: f64,
    pub sigma: f64,
    pub constants: PhysicalConstants,
}

impl OscillatorScenario {
    pub fn new(omega: f64, sigma: f64) -> Self {
        Self {
            omega,
            sigma,
            constants: PhysicalConstants::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidInput(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Ground-state width `√(ħ/2mω)`.
    pub fn alpha(&self) -> f64 {
        (self.constants.hbar / (2.0 * self.constants.mass * self.omega)).sqrt()
    }

    pub fn as_gaussian(&self) -> GaussianScenario {
        GaussianScenario::new(0.0, self.alpha(), 0.0, self.sigma, 0.0).with_constants(self.constants)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorClosedForms {
    pub mean_in: f64,
    pub stddev_in: f64,
    pub mean_pr: f64,
    pub stddev_pr: f64,
    pub mean_error: f64,
    pub stddev_error: f64,
}

pub fn oscillator_closed_forms(s: &OscillatorScenario) -> Result<OscillatorClosedForms> {
    s.validate()?;
    let PhysicalConstants { hbar, mass } = s.constants;
    let (w, s2) = (s.omega, s.sigma * s.sigma);
    let stiff = hbar + 2.0 * mass * w * s2;
    let mean_in = hbar * w / 2.0;
    let mean_pr = w * (hbar * hbar + stiff * stiff) / (4.0 * stiff);
    let stddev_pr = 2f64.sqrt() * mass * w * w * s2 * (hbar + mass * w * s2) / stiff;
    Ok(OscillatorClosedForms {
        mean_in,
        stddev_in: 0.0,
        mean_pr,
        stddev_pr,
        mean_error: mean_pr - mean_in,
        stddev_error: stddev_pr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_scenario_has_identical_curves() {
        let f = closed_form_fields(&GaussianScenario::new(0.3, 1.2, 2.0, 0.0, 0.0)).unwrap();
        assert_eq!(f.density_in, f.density_pr);
        assert_eq!(f.current_in, f.current_pr);
    }

    #[test]
    fn recorded_density_variance() {
        let f = closed_form_fields(&GaussianScenario::new(0.0, 1.0, 0.0, 0.5, 0.0)).unwrap();
        assert_eq!(f.density_pr.variance, 1.25);
    }

    #[test]
    fn recorded_current_integrates_to_flux() {
        let f = closed_form_fields(&GaussianScenario::new(0.0, 1.0, 1.0, 0.0, 0.5)).unwrap();
        // trapezoid over ±40 as an independent quadrature
        let h = 1e-3;
        let total: f64 = (-40_000..=40_000).map(|i| f.current_pr.eval(i as f64 * h) * h).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn means_are_unaffected_by_measurement() {
        let s = GaussianScenario::new(-0.7, 0.8, 2.5, 0.3, 0.4);
        let (i, p) = closed_form_parameters(&s).unwrap();
        for set in [&i, &p] {
            assert_eq!(set.mean("x"), Some(-0.7));
            assert_eq!(set.mean("p"), Some(2.5));
            assert_eq!(set.correlation("x", "p"), Some(Complex64::new(0.0, 0.5)));
        }
    }

    #[test]
    fn recorded_spreads() {
        let (_, p) = closed_form_parameters(&GaussianScenario::new(0.0, 1.0, 0.0, 0.5, 0.0)).unwrap();
        assert!((p.stddev("x").unwrap() - 1.25f64.sqrt()).abs() < 1e-15);
        let (_, p) = closed_form_parameters(&GaussianScenario::new(0.0, 1.0, 1.0, 0.5, 0.5)).unwrap();
        assert!((p.stddev("p").unwrap() - 0.2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn domain_violation_is_reported() {
        let s = GaussianScenario::new(0.0, 1.0, 1.0, 0.0, 1.5);
        assert!(matches!(closed_form_parameters(&s), Err(Error::DomainViolation { .. })));
        // boundary itself is excluded
        let s = GaussianScenario::new(0.0, 1.0, 1.0, 0.0, 1.0);
        assert!(closed_form_parameters(&s).is_err());
        // without current the spread is finite for any lambda
        let s = GaussianScenario::new(0.0, 1.0, 0.0, 0.0, 1.5);
        assert!((momentum_spread_pr(&s).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn entropic_spot_values() {
        let s = GaussianScenario::new(0.0, 1.0, 2.0, 1.0, 1.0);
        let ind = closed_form_indicators(&s).unwrap();
        assert!((ind.entropy.delta_h - 0.5 * 2f64.ln()).abs() < 1e-14);
        assert!((ind.entropy.delta_tau - 2f64.ln()).abs() < 1e-14);
        assert!((positional_entropy_gain(&s) - 0.346_573_590_279_972_6).abs() < 1e-15);
        assert!((motional_entropy_gain(&s) - 0.693_147_180_559_945_3).abs() < 1e-15);
    }

    #[test]
    fn ideal_measurement_has_no_indicators() {
        let ind = closed_form_indicators(&GaussianScenario::new(1.0, 0.7, 3.0, 0.0, 0.0)).unwrap();
        assert!(ind.errors.max() < 1e-15);
        assert_eq!(ind.entropy.delta_h, 0.0);
        assert_eq!(ind.entropy.delta_tau, 0.0);
    }

    #[test]
    fn spread_shift_can_be_negative() {
        let ind = closed_form_indicators(&GaussianScenario::new(0.0, 1.0, 1.0, 0.5, 0.5)).unwrap();
        assert!(ind.momentum_spread_shift < 0.0);
        assert_eq!(ind.errors.stddev_error("p"), Some(-ind.momentum_spread_shift));
    }

    #[test]
    fn oscillator_spot_values() {
        let ideal = oscillator_closed_forms(&OscillatorScenario::new(1.0, 0.0)).unwrap();
        assert_eq!(ideal.mean_pr, 0.5);
        assert_eq!(ideal.stddev_pr, 0.0);
        let s = OscillatorScenario::new(1.0, 0.5f64.sqrt());
        let c = oscillator_closed_forms(&s).unwrap();
        assert!((c.mean_pr - 0.625).abs() < 1e-15);
        assert!((c.mean_error - 0.125).abs() < 1e-15);
        assert!((c.stddev_pr - 2f64.sqrt() * 0.5 * 1.5 / 2.0).abs() < 1e-15);
        assert!(oscillator_closed_forms(&OscillatorScenario::new(0.0, 0.1)).is_err());
    }

    #[test]
    fn monotone_in_device_width() {
        let mut prev = (-1.0, -1.0, -1.0);
        for i in 1..50 {
            let w = i as f64 * 0.1;
            let s = GaussianScenario::new(0.0, 1.0, 2.0, w, w);
            let d = closed_form_indicators(&s).unwrap();
            let now = (d.errors.stddev_error("x").unwrap(), d.entropy.delta_h, d.entropy.delta_tau);
            assert!(now.0 > prev.0 && now.1 > prev.1 && now.2 > prev.2);
            prev = now;
        }
    }
}
