//! Observables built from terms `c·f(x)·(d/dx)^n` with `n ≤ 2`, and the
//! mean / correlation / standard-deviation parameters they induce.
//!
//! Two routes compute expectation values:
//!
//! * the wave-function route applies the operator to `Ψ` and takes the
//!   inner product;
//! * the substitution route never forms `Ψ`: it rewrites `Ψ*ÂΨ` in terms of
//!   the density and current only.
//!
//! Operators act in the co-moving frame `Ψ = e^{iΦ}·g`, where
//! `(e^{iΦ}g)' = e^{iΦ}(g' + iΦ'g)`. Only the smooth envelope `g` and the
//! phase are differentiated, so fast phase winding never has to be resolved
//! by the grid, and inner products of two images of the same state reduce
//! to `∫ conj(g_a)·g_b dx`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{differentiate, simpson, ComplexGridFunction, Grid, GridFunction};
use crate::state::{reconstruct_wavefunction, PhysicalConstants, ProbabilityFields, WaveFunction};

/// Imaginary residual (relative to `max(1, |mean|)`) above which a mean is
/// flagged as coming from a non-hermitian observable.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Agreement required between the two expectation routes, relative to
/// `max(1, |mean|)`.
pub const PATH_TOL: f64 = 1e-6;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    coefficient: Complex64,
    field: Option<GridFunction>,
    order: u8,
}

impl Term {
    pub fn new(coefficient: Complex64, field: Option<GridFunction>, order: u8) -> Result<Self> {
        if order > 2 {
            return Err(Error::InvalidInput(format!(
                "derivative order {order} exceeds 2"
            )));
        }
        if !coefficient.is_finite() {
            return Err(Error::InvalidInput("term coefficient must be finite".into()));
        }
        Ok(Self {
            coefficient,
            field,
            order,
        })
    }

    pub fn coefficient(&self) -> Complex64 {
        self.coefficient
    }

    pub fn field(&self) -> Option<&GridFunction> {
        self.field.as_ref()
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    fn weight(&self, i: usize) -> Complex64 {
        match &self.field {
            Some(f) => self.coefficient * f.values()[i],
            None => self.coefficient,
        }
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        match &self.field {
            Some(f) if f.grid() != grid => Err(Error::GridMismatch),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    label: String,
    terms: Vec<Term>,
}

impl Observable {
    pub fn new(label: impl Into<String>, terms: Vec<Term>) -> Result<Self> {
        let label = label.into();
        if terms.is_empty() {
            return Err(Error::InvalidInput(format!("observable '{label}' has no terms")));
        }
        let grids: Vec<_> = terms.iter().filter_map(|t| t.field.as_ref().map(|f| *f.grid())).collect();
        if grids.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { label, terms })
    }

    /// `x̂ = x·`
    pub fn position(grid: Grid) -> Self {
        let x = GridFunction::from_fn(grid, |x| x).expect("finite grid");
        Self::new("x", vec![Term::new(Complex64::new(1.0, 0.0), Some(x), 0).unwrap()]).unwrap()
    }

    /// `p̂ = −iħ d/dx`
    pub fn momentum(hbar: f64) -> Self {
        Self::new("p", vec![Term::new(Complex64::new(0.0, -hbar), None, 1).unwrap()]).unwrap()
    }

    /// `p̂² = −ħ² d²/dx²`
    pub fn momentum_squared(hbar: f64) -> Self {
        Self::new("p2", vec![Term::new(Complex64::new(-hbar * hbar, 0.0), None, 2).unwrap()]).unwrap()
    }

    /// Multiplication by a potential `V(x)`.
    pub fn potential(label: impl Into<String>, field: GridFunction) -> Self {
        Self::new(label, vec![Term::new(Complex64::new(1.0, 0.0), Some(field), 0).unwrap()]).unwrap()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn max_order(&self) -> u8 {
        self.terms.iter().map(|t| t.order).max().unwrap_or(0)
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.check_grid(grid))
    }
}

/// `Ĥ = p̂²/2m + mω²x̂²/2`
pub fn harmonic_hamiltonian(constants: PhysicalConstants, omega: f64, grid: Grid) -> Result<Observable> {
    constants.validate()?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidInput(format!("omega must be positive, got {omega}")));
    }
    let PhysicalConstants { hbar, mass } = constants;
    let spring = GridFunction::from_fn(grid, |x| 0.5 * mass * omega * omega * x * x)?;
    Observable::new(
        "H",
        vec![
            Term::new(Complex64::new(-hbar * hbar / (2.0 * mass), 0.0), None, 2)?,
            Term::new(Complex64::new(1.0, 0.0), Some(spring), 0)?,
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reading {
    #[serde(rename = "IN")]
    Intrinsic,
    #[serde(rename = "PR")]
    Prognosticated,
    #[serde(rename = "FR")]
    Factual,
}

impl std::fmt::Display for Reading {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Reading::Intrinsic => "IN",
            Reading::Prognosticated => "PR",
            Reading::Factual => "FR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub a: String,
    pub b: String,
    pub re: f64,
    pub im: f64,
}

impl Correlation {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub reading: Reading,
    pub labels: Vec<String>,
    pub means: BTreeMap<String, f64>,
    pub correlations: Vec<Correlation>,
    pub stddevs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ParameterSet {
    pub fn empty(reading: Reading) -> Self {
        Self {
            reading,
            labels: Vec::new(),
            means: BTreeMap::new(),
            correlations: Vec::new(),
            stddevs: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn mean(&self, label: &str) -> Option<f64> {
        self.means.get(label).copied()
    }

    pub fn stddev(&self, label: &str) -> Option<f64> {
        self.stddevs.get(label).copied()
    }

    pub fn correlation(&self, a: &str, b: &str) -> Option<Complex64> {
        self.correlations
            .iter()
            .find(|c| c.a == a && c.b == b)
            .map(Correlation::value)
    }

    pub fn set_correlation(&mut self, a: &str, b: &str, value: Complex64) {
        match self.correlations.iter_mut().find(|c| c.a == a && c.b == b) {
            Some(c) => {
                c.re = value.re;
                c.im = value.im;
            }
            None => self.correlations.push(Correlation {
                a: a.into(),
                b: b.into(),
                re: value.re,
                im: value.im,
            }),
        }
    }
}

/// Phase derivatives of a wave function, shared by every operator image.
struct Frame {
    dx: f64,
    phase1: Vec<f64>,
    phase2: Vec<f64>,
}

impl Frame {
    fn new(psi: &WaveFunction) -> Result<Self> {
        let dx = psi.grid().dx();
        Ok(Self {
            dx,
            phase1: psi.phase_gradient().values().to_vec(),
            phase2: differentiate(psi.phase_gradient().values(), dx, 1)?,
        })
    }

    /// Envelope of `Â(e^{iΦ}g)`.
    fn apply(&self, obs: &Observable, g: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = g.len();
        let mut out = vec![Complex64::default(); n];
        let mut d1: Option<Vec<Complex64>> = None;
        let mut d2: Option<Vec<Complex64>> = None;
        for term in &obs.terms {
            match term.order {
                0 => {
                    for i in 0..n {
                        out[i] += term.weight(i) * g[i];
                    }
                }
                1 => {
                    let g1 = d1.get_or_insert_with(|| differentiate(g, self.dx, 1).expect("grid ≥ 8"));
                    for i in 0..n {
                        out[i] += term.weight(i) * (g1[i] + I * self.phase1[i] * g[i]);
                    }
                }
                2 => {
                    let g1 = d1
                        .get_or_insert_with(|| differentiate(g, self.dx, 1).expect("grid ≥ 8"))
                        .clone();
                    let g2 = d2.get_or_insert_with(|| differentiate(g, self.dx, 2).expect("grid ≥ 8"));
                    for i in 0..n {
                        let (p1, p2) = (self.phase1[i], self.phase2[i]);
                        let lap = g2[i] + I * (2.0 * p1) * g1[i] + (I * p2 - p1 * p1) * g[i];
                        out[i] += term.weight(i) * lap;
                    }
                }
                order => {
                    return Err(Error::SubstitutionUnavailable {
                        label: obs.label.clone(),
                        order,
                    })
                }
            }
        }
        Ok(out)
    }
}

fn inner(a: &[Complex64], b: &[Complex64], dx: f64) -> Complex64 {
    let prod: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x.conj() * y).collect();
    simpson(&prod, dx)
}

/// `ÂΨ` sampled on the grid.
pub fn apply_observable(psi: &WaveFunction, obs: &Observable) -> Result<ComplexGridFunction> {
    obs.check_grid(psi.grid())?;
    let frame = Frame::new(psi)?;
    let g: Vec<Complex64> = psi.modulus().values().iter().map(|&r| r.into()).collect();
    let image = frame.apply(obs, &g)?;
    let values = image
        .iter()
        .zip(psi.phase().values())
        .map(|(v, &phi)| v * Complex64::from_polar(1.0, phi))
        .collect();
    ComplexGridFunction::new(*psi.grid(), values)
}

/// `(Ψ, ÂΨ)` on the wave-function route.
pub fn expectation(psi: &WaveFunction, obs: &Observable) -> Result<Complex64> {
    obs.check_grid(psi.grid())?;
    let frame = Frame::new(psi)?;
    let g: Vec<Complex64> = psi.modulus().values().iter().map(|&r| r.into()).collect();
    Ok(inner(&g, &frame.apply(obs, &g)?, frame.dx))
}

/// `∫Ψ*ÂΨ dx` from density and current alone.
pub fn expectation_substitution(fields: &ProbabilityFields, obs: &Observable) -> Result<Complex64> {
    let grid = *fields.grid();
    obs.check_grid(&grid)?;
    let dx = grid.dx();
    let n = grid.len();
    let PhysicalConstants { hbar, mass } = fields.constants();
    let rho = fields.density().values();
    let current = fields.current().values();
    let m_over_hbar = mass / hbar;

    let mut integrand = vec![Complex64::default(); n];
    let mut drho: Option<Vec<f64>> = None;
    let mut order2: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    for term in &obs.terms {
        match term.order {
            0 => {
                for i in 0..n {
                    integrand[i] += term.weight(i) * rho[i];
                }
            }
            1 => {
                let drho = drho.get_or_insert_with(|| differentiate(rho, dx, 1).expect("grid ≥ 8"));
                for i in 0..n {
                    let local = Complex64::new(0.5 * drho[i], m_over_hbar * current[i]);
                    integrand[i] += term.weight(i) * local;
                }
            }
            2 => {
                let (root, lap_root, dj, ratio) = order2.get_or_insert_with(|| {
                    let root: Vec<f64> = rho.iter().map(|r| r.sqrt()).collect();
                    let lap_root = differentiate(&root, dx, 2).expect("grid ≥ 8");
                    let dj = differentiate(current, dx, 1).expect("grid ≥ 8");
                    (root, lap_root, dj, fields.velocity_ratio())
                });
                for i in 0..n {
                    let re = root[i] * lap_root[i] - m_over_hbar * m_over_hbar * current[i] * ratio[i];
                    let local = Complex64::new(re, m_over_hbar * dj[i]);
                    integrand[i] += term.weight(i) * local;
                }
            }
            order => {
                return Err(Error::SubstitutionUnavailable {
                    label: obs.label.clone(),
                    order,
                })
            }
        }
    }
    Ok(simpson(&integrand, dx))
}

/// Means, correlations `(δÂΨ, δB̂Ψ)` and standard deviations on the
/// wave-function route.
pub fn parameters(psi: &WaveFunction, observables: &[Observable], reading: Reading) -> Result<ParameterSet> {
    let grid = *psi.grid();
    for obs in observables {
        obs.check_grid(&grid)?;
    }
    let frame = Frame::new(psi)?;
    let dx = grid.dx();
    let g: Vec<Complex64> = psi.modulus().values().iter().map(|&r| r.into()).collect();

    let mut set = ParameterSet::empty(reading);
    let mut deltas = Vec::with_capacity(observables.len());
    for obs in observables {
        let image = frame.apply(obs, &g)?;
        let mean = inner(&g, &image, dx);
        if mean.im.abs() > HERMITIAN_TOL * mean.re.abs().max(1.0) {
            set.warnings.push(format!(
                "'{}' looks non-hermitian: imaginary mean residual {:.3e}",
                obs.label, mean.im
            ));
        }
        let delta: Vec<Complex64> = image.iter().zip(&g).map(|(a, b)| a - b * mean.re).collect();
        set.labels.push(obs.label.clone());
        set.means.insert(obs.label.clone(), mean.re);
        deltas.push(delta);
    }
    for (a, da) in observables.iter().zip(&deltas) {
        for (b, db) in observables.iter().zip(&deltas) {
            let c = inner(da, db, dx);
            set.set_correlation(&a.label, &b.label, c);
            if a.label == b.label {
                set.stddevs.insert(a.label.clone(), c.re.max(0.0).sqrt());
            }
        }
    }
    Ok(set)
}

/// PR parameters: rebuild `Ψ_PR` from the recorded fields, evaluate on the
/// wave-function route and cross-check every mean against the substitution
/// route.
pub fn pr_parameters(fields_pr: &ProbabilityFields, observables: &[Observable]) -> Result<ParameterSet> {
    let rec = reconstruct_wavefunction(fields_pr)?;
    let mut set = parameters(&rec.wavefunction, observables, Reading::Prognosticated)?;
    if rec.flagged {
        set.warnings.push(format!(
            "current {:.3e} where the density is below the cutoff",
            rec.orphan_current
        ));
    }
    for obs in observables {
        let sub = expectation_substitution(fields_pr, obs)?.re;
        let wf = set.means[&obs.label];
        if (sub - wf).abs() > PATH_TOL * wf.abs().max(1.0) {
            return Err(Error::PathMismatch {
                label: obs.label.clone(),
                substitution: sub,
                wavefunction: wf,
            });
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_gaussian_state, GaussianStateSpec};

    fn state(x0: f64, alpha: f64, k: f64) -> WaveFunction {
        make_gaussian_state(
            GaussianStateSpec { x0, alpha, k },
            PhysicalConstants::default(),
            Grid::centered(x0, 10.0 * alpha, 4096).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn substitution_position_mean() {
        let psi = state(2.0, 1.0, 0.0);
        let x = Observable::position(*psi.grid());
        let m = expectation_substitution(&psi.to_probability_fields(), &x).unwrap();
        assert!((m.re - 2.0).abs() < 1e-8);
    }

    #[test]
    fn substitution_momentum_mean() {
        let psi = state(0.0, 1.0, 3.0);
        let m = expectation_substitution(&psi.to_probability_fields(), &Observable::momentum(1.0)).unwrap();
        assert!((m.re - 3.0).abs() < 1e-8);
        assert!(m.im.abs() < 1e-8);
    }

    #[test]
    fn substitution_momentum_squared() {
        let psi = state(0.0, 1.0, 0.0);
        let m = expectation_substitution(&psi.to_probability_fields(), &Observable::momentum_squared(1.0))
            .unwrap();
        assert!((m.re - 0.25).abs() < 1e-6);
    }

    #[test]
    fn canonical_correlation_and_spreads() {
        let psi = state(0.0, 1.0, 0.0);
        let obs = [Observable::position(*psi.grid()), Observable::momentum(1.0)];
        let set = parameters(&psi, &obs, Reading::Intrinsic).unwrap();
        let c = set.correlation("x", "p").unwrap();
        assert!(c.re.abs() < 1e-9);
        assert!((c.im - 0.5).abs() < 1e-9);
        assert!((set.stddev("x").unwrap() - 1.0).abs() < 1e-9);
        assert!((set.stddev("p").unwrap() - 0.5).abs() < 1e-9);
        let back = set.correlation("p", "x").unwrap();
        assert!((back - c.conj()).norm() < 1e-12);
        assert!(set.warnings.is_empty(), "{:?}", set.warnings);
    }

    #[test]
    fn oscillator_ground_state_is_sharp() {
        let c = PhysicalConstants::default();
        let alpha = 0.5f64.sqrt();
        let psi = state(0.0, alpha, 0.0);
        let h = harmonic_hamiltonian(c, 1.0, *psi.grid()).unwrap();
        let set = parameters(&psi, &[h], Reading::Intrinsic).unwrap();
        assert!((set.mean("H").unwrap() - 0.5).abs() < 1e-6);
        assert!(set.stddev("H").unwrap() < 1e-6);
    }

    #[test]
    fn hamiltonian_rejects_bad_frequency() {
        let g = Grid::centered(0.0, 5.0, 64).unwrap();
        assert!(harmonic_hamiltonian(PhysicalConstants::default(), 0.0, g).is_err());
        assert!(harmonic_hamiltonian(PhysicalConstants::default(), -1.0, g).is_err());
        assert_eq!(harmonic_hamiltonian(PhysicalConstants::default(), 1.0, g).unwrap().terms().len(), 2);
    }

    #[test]
    fn spring_term_gives_half_second_moment() {
        let psi = state(0.0, 1.0, 0.0);
        let h = harmonic_hamiltonian(PhysicalConstants::default(), 1.0, *psi.grid()).unwrap();
        let spring = Observable::new("V", vec![h.terms()[1].clone()]).unwrap();
        let m = expectation(&psi, &spring).unwrap();
        assert!((m.re - 0.5).abs() < 1e-10);
    }

    #[test]
    fn routes_agree_for_moving_packet() {
        let psi = state(0.3, 0.8, 2.5);
        let fields = psi.to_probability_fields();
        let grid = *psi.grid();
        let obs = [
            Observable::position(grid),
            Observable::momentum(1.0),
            Observable::momentum_squared(1.0),
            harmonic_hamiltonian(PhysicalConstants::default(), 1.3, grid).unwrap(),
        ];
        for o in &obs {
            let a = expectation(&psi, o).unwrap();
            let b = expectation_substitution(&fields, o).unwrap();
            assert!((a - b).norm() < 1e-6, "{}: {a} vs {b}", o.label());
        }
    }

    #[test]
    fn applied_momentum_matches_plane_wave_derivative() {
        let psi = state(0.0, 1.0, 1.5);
        let image = apply_observable(&psi, &Observable::momentum(1.0)).unwrap();
        let raw = psi.to_complex();
        let g = psi.grid();
        for i in (100..g.len() - 100).step_by(211) {
            let x = g.x(i);
            // −i d/dx of ψ = (k + i x/(2α²))·ψ
            let want = raw.values()[i] * Complex64::new(1.5, x / 2.0);
            assert!((image.values()[i] - want).norm() < 1e-8);
        }
    }

    #[test]
    fn mismatched_observable_grid_is_rejected() {
        let psi = state(0.0, 1.0, 0.0);
        let other = Grid::centered(0.0, 5.0, 128).unwrap();
        let err = parameters(&psi, &[Observable::position(other)], Reading::Intrinsic);
        assert_eq!(err, Err(Error::GridMismatch));
    }

    #[test]
    fn term_order_above_two_is_rejected() {
        assert!(Term::new(Complex64::new(1.0, 0.0), None, 3).is_err());
        assert!(Observable::new("empty", vec![]).is_err());
    }

    #[test]
    fn non_hermitian_observable_is_flagged() {
        let psi = state(0.0, 1.0, 0.0);
        let x = GridFunction::from_fn(*psi.grid(), |x| x).unwrap();
        // x·d/dx is anti-hermitian-ish; its mean is −1/2.
        let odd = Observable::new(
            "xD",
            vec![Term::new(Complex64::new(0.0, 1.0), Some(x), 1).unwrap()],
        )
        .unwrap();
        let set = parameters(&psi, &[odd], Reading::Intrinsic).unwrap();
        assert!(!set.warnings.is_empty());
    }
}
