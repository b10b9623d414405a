//! Uncertainty indicators: absolute differences between recorded and
//! intrinsic parameters, and Shannon-type entropies of density and current.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{simpson, GridFunction};
use crate::observables::{ParameterSet, Reading};
use crate::state::{ProbabilityFields, NORM_TOL};

/// Tolerated negative entropy gain from discretization.
pub const ENTROPY_GAIN_TOL: f64 = 1e-9;

/// `∫|J| dx` below which the motional entropy is undefined.
pub const CURRENT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationError {
    pub a: String,
    pub b: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorIndicators {
    pub reading: Reading,
    pub mean_errors: BTreeMap<String, f64>,
    pub correlation_errors: Vec<CorrelationError>,
    pub stddev_errors: BTreeMap<String, f64>,
    /// `Δ_recorded − Δ_IN` before taking the absolute value.
    pub stddev_shifts: BTreeMap<String, f64>,
}

impl ErrorIndicators {
    pub fn mean_error(&self, label: &str) -> Option<f64> {
        self.mean_errors.get(label).copied()
    }

    pub fn stddev_error(&self, label: &str) -> Option<f64> {
        self.stddev_errors.get(label).copied()
    }

    pub fn correlation_error(&self, a: &str, b: &str) -> Option<f64> {
        self.correlation_errors
            .iter()
            .find(|c| c.a == a && c.b == b)
            .map(|c| c.value)
    }

    /// Largest entry across all three families.
    pub fn max(&self) -> f64 {
        self.mean_errors
            .values()
            .chain(self.stddev_errors.values())
            .chain(self.correlation_errors.iter().map(|c| &c.value))
            .fold(0.0, |m, v| m.max(*v))
    }
}

fn sorted_labels(set: &ParameterSet) -> Vec<&String> {
    let mut labels: Vec<_> = set.means.keys().collect();
    labels.sort();
    labels
}

/// Elementwise `|recorded − intrinsic|`. Means and deviations need identical
/// label sets; correlations are compared wherever the recorded set has them.
pub fn error_indicators(recorded: &ParameterSet, intrinsic: &ParameterSet) -> Result<ErrorIndicators> {
    if sorted_labels(recorded) != sorted_labels(intrinsic) {
        return Err(Error::LabelMismatch(format!(
            "{} has {:?}, {} has {:?}",
            recorded.reading,
            sorted_labels(recorded),
            intrinsic.reading,
            sorted_labels(intrinsic)
        )));
    }
    let mut out = ErrorIndicators {
        reading: recorded.reading,
        mean_errors: BTreeMap::new(),
        correlation_errors: Vec::new(),
        stddev_errors: BTreeMap::new(),
        stddev_shifts: BTreeMap::new(),
    };
    for (label, rec) in &recorded.means {
        out.mean_errors.insert(label.clone(), (rec - intrinsic.means[label]).abs());
    }
    for (label, rec) in &recorded.stddevs {
        let base = intrinsic.stddevs.get(label).ok_or_else(|| {
            Error::LabelMismatch(format!("no intrinsic deviation for '{label}'"))
        })?;
        out.stddev_errors.insert(label.clone(), (rec - base).abs());
        out.stddev_shifts.insert(label.clone(), rec - base);
    }
    for c in &recorded.correlations {
        let base = intrinsic.correlation(&c.a, &c.b).ok_or_else(|| {
            Error::LabelMismatch(format!("no intrinsic correlation for ('{}', '{}')", c.a, c.b))
        })?;
        out.correlation_errors.push(CorrelationError {
            a: c.a.clone(),
            b: c.b.clone(),
            value: (c.value() - base).norm(),
        });
    }
    Ok(out)
}

pub fn pr_error_indicators(in_params: &ParameterSet, pr_params: &ParameterSet) -> Result<ErrorIndicators> {
    if sorted_labels(in_params) != sorted_labels(pr_params) {
        return Err(Error::LabelMismatch(format!(
            "IN has {:?}, PR has {:?}",
            sorted_labels(in_params),
            sorted_labels(pr_params)
        )));
    }
    error_indicators(pr_params, in_params)
}

fn neg_x_ln_x(v: f64) -> f64 {
    if v > 0.0 {
        -v * v.ln()
    } else {
        0.0
    }
}

/// `−∫ρ ln ρ dx` with `0·ln 0 = 0`.
pub fn positional_entropy(density: &GridFunction) -> Result<f64> {
    let integral = simpson(density.values(), density.grid().dx());
    if (integral - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { integral });
    }
    if let Some(min) = density.values().iter().copied().find(|v| *v < 0.0) {
        return Err(Error::NegativeDensity { min });
    }
    let terms: Vec<f64> = density.values().iter().map(|&v| neg_x_ln_x(v)).collect();
    Ok(simpson(&terms, density.grid().dx()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionalEntropy {
    pub value: f64,
    pub defined: bool,
}

/// `−∫|J| ln|J| dx`; undefined (reported as 0) for a vanishing current.
pub fn motional_entropy(current: &GridFunction) -> MotionalEntropy {
    let dx = current.grid().dx();
    let abs: Vec<f64> = current.values().iter().map(|v| v.abs()).collect();
    if simpson(&abs, dx) < CURRENT_FLOOR {
        return MotionalEntropy {
            value: 0.0,
            defined: false,
        };
    }
    let terms: Vec<f64> = abs.iter().map(|&v| neg_x_ln_x(v)).collect();
    MotionalEntropy {
        value: simpson(&terms, dx),
        defined: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadingPair {
    #[serde(rename = "IN")]
    pub intrinsic: f64,
    #[serde(rename = "PR")]
    pub recorded: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub positional: ReadingPair,
    pub motional: ReadingPair,
    pub delta_h: f64,
    /// Zero when `motional_defined` is false.
    pub delta_tau: f64,
    pub motional_defined: bool,
    /// Natural log of densities in the caller's length unit; absolute values
    /// shift with the unit, the deltas do not.
    pub units: String,
}

impl EntropyReport {
    pub fn new(h_in: f64, h_pr: f64, tau_in: MotionalEntropy, tau_pr: MotionalEntropy) -> Self {
        let motional_defined = tau_in.defined && tau_pr.defined;
        Self {
            positional: ReadingPair {
                intrinsic: h_in,
                recorded: h_pr,
            },
            motional: ReadingPair {
                intrinsic: tau_in.value,
                recorded: tau_pr.value,
            },
            delta_h: h_pr - h_in,
            delta_tau: if motional_defined {
                tau_pr.value - tau_in.value
            } else {
                0.0
            },
            motional_defined,
            units: "nats; density in 1/length, current in 1/time".into(),
        }
    }
}

pub fn entropy_indicators(fields_in: &ProbabilityFields, fields_pr: &ProbabilityFields) -> Result<EntropyReport> {
    let h_in = positional_entropy(fields_in.density())?;
    let h_pr = positional_entropy(fields_pr.density())?;
    let report = EntropyReport::new(
        h_in,
        h_pr,
        motional_entropy(fields_in.current()),
        motional_entropy(fields_pr.current()),
    );
    if report.delta_h < -ENTROPY_GAIN_TOL {
        return Err(Error::EntropyLoss(-report.delta_h));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{transform, MeasurementSpec};
    use crate::numerics::Grid;
    use crate::observables::Correlation;
    use crate::state::{make_gaussian_state, GaussianStateSpec, PhysicalConstants};
    use std::f64::consts::{E, PI};

    fn normal(x: f64, var: f64) -> f64 {
        (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    fn fields(alpha: f64, k: f64, half: f64) -> ProbabilityFields {
        make_gaussian_state(
            GaussianStateSpec { x0: 0.0, alpha, k },
            PhysicalConstants::default(),
            Grid::centered(0.0, half, 4096).unwrap(),
        )
        .unwrap()
        .to_probability_fields()
    }

    fn params(reading: Reading, mx: f64, sx: f64) -> ParameterSet {
        let mut p = ParameterSet::empty(reading);
        p.labels = vec!["x".into()];
        p.means.insert("x".into(), mx);
        p.stddevs.insert("x".into(), sx);
        p.correlations.push(Correlation {
            a: "x".into(),
            b: "x".into(),
            re: sx * sx,
            im: 0.0,
        });
        p
    }

    #[test]
    fn identical_sets_give_zero_indicators() {
        let a = params(Reading::Intrinsic, 0.3, 1.0);
        let b = params(Reading::Prognosticated, 0.3, 1.0);
        let d = pr_error_indicators(&a, &b).unwrap();
        assert_eq!(d.max(), 0.0);
    }

    #[test]
    fn indicators_are_absolute_differences() {
        let a = params(Reading::Intrinsic, 0.0, 1.0);
        let b = params(Reading::Prognosticated, -0.2, 1.25f64.sqrt());
        let d = pr_error_indicators(&a, &b).unwrap();
        assert!((d.mean_error("x").unwrap() - 0.2).abs() < 1e-15);
        assert!((d.stddev_error("x").unwrap() - (1.25f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((d.correlation_error("x", "x").unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        let a = params(Reading::Intrinsic, 0.0, 1.0);
        let mut b = params(Reading::Prognosticated, 0.0, 1.0);
        b.means.insert("p".into(), 0.0);
        assert!(matches!(pr_error_indicators(&a, &b), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn standard_normal_entropy() {
        let g = Grid::centered(0.0, 12.0, 4096).unwrap();
        let rho = GridFunction::from_fn(g, |x| normal(x, 1.0)).unwrap();
        let h = positional_entropy(&rho).unwrap();
        assert!((h - 0.5 * (2.0 * PI * E).ln()).abs() < 1e-9);
    }

    #[test]
    fn uniform_unit_box_has_zero_entropy() {
        // Box of length 1 inside a grid whose nodes land on its edges.
        let g = Grid::new(-2.0, 0.001, 4001).unwrap();
        let rho = GridFunction::from_fn(g, |x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        let norm = simpson(rho.values(), g.dx());
        let rho = rho.scaled(1.0 / norm).unwrap();
        assert!(positional_entropy(&rho).unwrap().abs() < 2e-3);
    }

    #[test]
    fn unnormalized_density_is_rejected() {
        let g = Grid::centered(0.0, 12.0, 4096).unwrap();
        let rho = GridFunction::from_fn(g, |x| 2.0 * normal(x, 1.0)).unwrap();
        assert!(matches!(positional_entropy(&rho), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn entropy_gap_between_gaussians() {
        let g = Grid::centered(0.0, 15.0, 4096).unwrap();
        let a = GridFunction::from_fn(g, |x| normal(x, 1.25)).unwrap();
        let b = GridFunction::from_fn(g, |x| normal(x, 1.0)).unwrap();
        let gap = positional_entropy(&a).unwrap() - positional_entropy(&b).unwrap();
        assert!((gap - 0.5 * 1.25f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn motional_entropy_of_moving_packet() {
        let f = fields(1.0, 2.0, 12.0);
        let tau = motional_entropy(f.current());
        assert!(tau.defined);
        let want = -2.0 * 2f64.ln() + (2.0 * PI * E).ln();
        assert!((tau.value - want).abs() < 1e-9);
    }

    #[test]
    fn motional_entropy_undefined_without_current() {
        let f = fields(1.0, 0.0, 12.0);
        let tau = motional_entropy(f.current());
        assert!(!tau.defined);
        assert_eq!(tau.value, 0.0);
    }

    #[test]
    fn motional_gain_for_wide_current_kernel() {
        let f = fields(1.0, 2.0, 10.0 * 2f64.sqrt());
        let pr = transform(&f, &MeasurementSpec::gaussian(0.0, 1.0)).unwrap().fields;
        let report = entropy_indicators(&f, &pr).unwrap();
        assert!((report.delta_tau - 2f64.ln()).abs() < 1e-9);
        assert!(report.delta_h.abs() < 1e-12);
    }

    #[test]
    fn positional_gain_for_unit_kernel() {
        let f = fields(1.0, 0.0, 10.0 * 2f64.sqrt());
        let pr = transform(&f, &MeasurementSpec::gaussian(1.0, 0.0)).unwrap().fields;
        let report = entropy_indicators(&f, &pr).unwrap();
        assert!((report.delta_h - 0.5 * 2f64.ln()).abs() < 1e-9);
        assert!(!report.motional_defined);
        assert_eq!(report.delta_tau, 0.0);
    }

    #[test]
    fn ideal_transform_changes_nothing() {
        let f = fields(1.0, 1.0, 10.0);
        let pr = transform(&f, &MeasurementSpec::ideal()).unwrap().fields;
        let report = entropy_indicators(&f, &pr).unwrap();
        assert!(report.delta_h.abs() < 1e-9);
        assert!(report.delta_tau.abs() < 1e-9);
    }
}
