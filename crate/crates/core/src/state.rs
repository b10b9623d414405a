//! Wave functions in modulus-phase form and the probability density and
//! current they carry, in both directions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    cumulative_integral, derivative, integrate, ComplexGridFunction, Grid, GridFunction,
};

/// Normalization tolerance shared by wave functions and density fields.
pub const NORM_TOL: f64 = 1e-6;

/// Relative density below which the velocity field `J/ρ` is taken as zero.
///
/// The value sits just above the subnormal range: `J²/ρ` stays significant
/// deep into the tails whenever the current kernel is wider than the density
/// kernel, so only cells where `ρ` can no longer be represented are dropped.
pub const DENSITY_CUTOFF: f64 = 1e-280;

/// Boundary modulus allowed by [`make_gaussian_state`], relative to the peak.
pub const TAIL_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        let c = Self { hbar, mass };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidInput(format!("hbar must be positive, got {}", self.hbar)));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidInput(format!("mass must be positive, got {}", self.mass)));
        }
        Ok(())
    }
}

/// Gaussian packet centred at `x0` with width `alpha` and plane-wave phase `k·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStateSpec {
    pub x0: f64,
    pub alpha: f64,
    pub k: f64,
}

impl GaussianStateSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !self.x0.is_finite() || !self.k.is_finite() {
            return Err(Error::InvalidInput("x0 and k must be finite".into()));
        }
        Ok(())
    }
}

fn check_density(density: &GridFunction) -> Result<()> {
    let min = density.values().iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        return Err(Error::NegativeDensity { min });
    }
    let integral = integrate(density);
    if (integral - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { integral });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    modulus: GridFunction,
    phase: GridFunction,
    gradient: GridFunction,
    constants: PhysicalConstants,
}

impl WaveFunction {
    /// The phase gradient is taken by finite differences of `phase`.
    pub fn new(modulus: GridFunction, phase: GridFunction, constants: PhysicalConstants) -> Result<Self> {
        let gradient = derivative(&phase, 1)?;
        Self::with_gradient(modulus, phase, gradient, constants)
    }

    /// Use a known `∂Φ/∂x` instead of differentiating `phase`.
    pub fn with_gradient(
        modulus: GridFunction,
        phase: GridFunction,
        gradient: GridFunction,
        constants: PhysicalConstants,
    ) -> Result<Self> {
        constants.validate()?;
        if modulus.grid() != phase.grid() || phase.grid() != gradient.grid() {
            return Err(Error::GridMismatch);
        }
        if modulus.values().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("modulus must be nonnegative".into()));
        }
        check_density(&modulus.map(|v| v * v)?)?;
        Ok(Self {
            modulus,
            phase,
            gradient,
            constants,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.modulus.grid()
    }

    pub fn modulus(&self) -> &GridFunction {
        &self.modulus
    }

    pub fn phase(&self) -> &GridFunction {
        &self.phase
    }

    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    pub fn phase_gradient(&self) -> &GridFunction {
        &self.gradient
    }

    /// `Ψ(x) = |Ψ(x)|·exp(iΦ(x))` sampled on the grid.
    pub fn to_complex(&self) -> ComplexGridFunction {
        let values = self
            .modulus
            .values()
            .iter()
            .zip(self.phase.values())
            .map(|(&r, &phi)| Complex64::from_polar(r, phi))
            .collect();
        ComplexGridFunction::new(*self.grid(), values).expect("finite polar samples")
    }

    /// `ρ = |Ψ|²`, `J = (ħ/m)·|Ψ|²·∂Φ/∂x`.
    pub fn to_probability_fields(&self) -> ProbabilityFields {
        let density = self.modulus.map(|v| v * v).expect("finite");
        let velocity = self.constants.hbar / self.constants.mass;
        let grad = self.phase_gradient();
        let current = GridFunction::new(
            *self.grid(),
            density
                .values()
                .iter()
                .zip(grad.values())
                .map(|(rho, g)| velocity * rho * g)
                .collect(),
        )
        .expect("finite current");
        ProbabilityFields {
            density,
            current,
            constants: self.constants,
        }
    }
}

pub fn make_gaussian_state(
    spec: GaussianStateSpec,
    constants: PhysicalConstants,
    grid: Grid,
) -> Result<WaveFunction> {
    spec.validate()?;
    constants.validate()?;
    let GaussianStateSpec { x0, alpha, k } = spec;
    let amplitude = (alpha * (2.0 * std::f64::consts::PI).sqrt()).powf(-0.5);
    let modulus = GridFunction::from_fn(grid, |x| {
        amplitude * (-(x - x0) * (x - x0) / (4.0 * alpha * alpha)).exp()
    })?;
    let peak = if (grid.x_min()..=grid.x_max()).contains(&x0) {
        amplitude
    } else {
        modulus.max_abs()
    };
    let edge = modulus.values()[0].max(modulus.values()[grid.len() - 1]);
    if peak == 0.0 || edge > TAIL_LIMIT * peak {
        return Err(Error::TailTooHeavy {
            ratio: if peak == 0.0 { f64::INFINITY } else { edge / peak },
            limit: TAIL_LIMIT,
        });
    }
    let phase = GridFunction::from_fn(grid, |x| k * x)?;
    WaveFunction::with_gradient(modulus, phase, GridFunction::from_fn(grid, |_| k)?, constants)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityFields {
    density: GridFunction,
    current: GridFunction,
    constants: PhysicalConstants,
}

impl ProbabilityFields {
    pub fn new(density: GridFunction, current: GridFunction, constants: PhysicalConstants) -> Result<Self> {
        constants.validate()?;
        if density.grid() != current.grid() {
            return Err(Error::GridMismatch);
        }
        check_density(&density)?;
        Ok(Self {
            density,
            current,
            constants,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.density.grid()
    }

    pub fn density(&self) -> &GridFunction {
        &self.density
    }

    pub fn current(&self) -> &GridFunction {
        &self.current
    }

    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    /// `J/ρ` where `ρ > DENSITY_CUTOFF·max ρ`, zero elsewhere.
    pub fn velocity_ratio(&self) -> Vec<f64> {
        let floor = DENSITY_CUTOFF * self.density.max_abs();
        self.density
            .values()
            .iter()
            .zip(self.current.values())
            .map(|(&rho, &j)| if rho > floor { j / rho } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub wavefunction: WaveFunction,
    /// Largest `|J|` found where the density is below the cutoff.
    pub orphan_current: f64,
    /// `orphan_current` exceeds 1e-12 of the peak current.
    pub flagged: bool,
}

/// Rebuild `Ψ` from `(ρ, J)`: `|Ψ| = √ρ` and `Φ` the running integral of
/// `(m/ħ)·J/ρ`, anchored to zero at the grid centre.
pub fn reconstruct_wavefunction(fields: &ProbabilityFields) -> Result<Reconstruction> {
    check_density(&fields.density)?;
    let grid = *fields.grid();
    let PhysicalConstants { hbar, mass } = fields.constants;
    let floor = DENSITY_CUTOFF * fields.density.max_abs();

    let ratio = fields.velocity_ratio();
    let gradient = GridFunction::new(grid, ratio.iter().map(|r| r * mass / hbar).collect())?;
    let phase = cumulative_integral(&gradient, grid.center_index())?;
    let modulus = fields.density.map(f64::sqrt)?;

    let orphan_current = fields
        .density
        .values()
        .iter()
        .zip(fields.current.values())
        .filter(|(&rho, _)| rho <= floor)
        .fold(0.0f64, |m, (_, j)| m.max(j.abs()));
    let flagged = orphan_current > 1e-12 * fields.current.max_abs().max(f64::MIN_POSITIVE);

    Ok(Reconstruction {
        wavefunction: WaveFunction::with_gradient(modulus, phase, gradient, fields.constants)?,
        orphan_current,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(half: f64) -> Grid {
        Grid::centered(0.0, half, 4096).unwrap()
    }

    fn gaussian(x0: f64, alpha: f64, k: f64) -> WaveFunction {
        make_gaussian_state(
            GaussianStateSpec { x0, alpha, k },
            PhysicalConstants::default(),
            Grid::centered(x0, 10.0 * alpha, 4096).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn gaussian_peak_density() {
        let psi = make_gaussian_state(
            GaussianStateSpec { x0: 0.0, alpha: 1.0, k: 0.0 },
            PhysicalConstants::default(),
            Grid::centered(0.0, 10.0, 4097).unwrap(),
        )
        .unwrap();
        let mid = psi.modulus().values()[2048];
        assert!((mid * mid - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_is_normalized() {
        for (x0, alpha, k) in [(0.0, 1.0, 0.0), (2.0, 0.3, 5.0), (-1.5, 2.5, -1.0)] {
            let psi = gaussian(x0, alpha, k);
            let rho = psi.modulus().map(|v| v * v).unwrap();
            assert!((integrate(&rho) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_phase_is_linear() {
        let psi = make_gaussian_state(
            GaussianStateSpec { x0: 2.0, alpha: 1.0, k: 3.0 },
            PhysicalConstants::default(),
            grid(12.0),
        )
        .unwrap();
        let g = psi.grid();
        for i in (0..g.len()).step_by(97) {
            assert!((psi.phase().values()[i] - 3.0 * g.x(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let err = make_gaussian_state(
            GaussianStateSpec { x0: 0.0, alpha: 1.0, k: 0.0 },
            PhysicalConstants::default(),
            Grid::centered(0.0, 3.0, 512).unwrap(),
        );
        assert!(matches!(err, Err(Error::TailTooHeavy { .. })));
    }

    #[test]
    fn rejects_bad_constants_and_width() {
        assert!(PhysicalConstants::new(0.0, 1.0).is_err());
        assert!(PhysicalConstants::new(1.0, -2.0).is_err());
        let spec = GaussianStateSpec { x0: 0.0, alpha: 0.0, k: 0.0 };
        assert!(make_gaussian_state(spec, PhysicalConstants::default(), grid(10.0)).is_err());
    }

    #[test]
    fn peak_current_of_moving_packet() {
        let psi = make_gaussian_state(
            GaussianStateSpec { x0: 0.0, alpha: 1.0, k: 2.0 },
            PhysicalConstants::default(),
            Grid::centered(0.0, 10.0, 4097).unwrap(),
        )
        .unwrap();
        let fields = psi.to_probability_fields();
        let j0 = fields.current().values()[2048];
        assert!((j0 - 2.0 / (2.0 * PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn real_state_has_no_current() {
        let fields = gaussian(0.5, 1.0, 0.0).to_probability_fields();
        assert_eq!(fields.current().max_abs(), 0.0);
    }

    #[test]
    fn current_over_density_is_group_velocity() {
        let fields = gaussian(0.0, 1.0, 1.0).to_probability_fields();
        let peak = fields.density().max_abs();
        for (rho, j) in fields.density().values().iter().zip(fields.current().values()) {
            if *rho > 1e-12 * peak {
                assert!((j / rho - 1.0).abs() < 1e-9);
            }
        }
        // ∫J dx = ħk/m
        assert!((integrate(fields.current()) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reconstruction_recovers_phase_gradient() {
        let fields = gaussian(0.0, 1.0, 2.0).to_probability_fields();
        let rec = reconstruct_wavefunction(&fields).unwrap();
        assert!(!rec.flagged);
        let grad = rec.wavefunction.phase_gradient();
        for v in grad.values() {
            assert!((v - 2.0).abs() < 1e-8);
        }
        let c = fields.grid().center_index();
        assert_eq!(rec.wavefunction.phase().values()[c], 0.0);
    }

    #[test]
    fn zero_current_reconstructs_real_state() {
        let fields = gaussian(1.0, 0.7, 0.0).to_probability_fields();
        let rec = reconstruct_wavefunction(&fields).unwrap();
        assert!(rec.wavefunction.phase().max_abs() == 0.0);
    }

    #[test]
    fn round_trip_through_reconstruction() {
        let fields = gaussian(-0.4, 1.2, 1.5).to_probability_fields();
        let back = reconstruct_wavefunction(&fields)
            .unwrap()
            .wavefunction
            .to_probability_fields();
        assert!(back.density().sup_distance(fields.density()) < 1e-8);
        assert!(back.current().sup_distance(fields.current()) < 1e-8);
    }

    #[test]
    fn reconstruction_rejects_unnormalized_density() {
        let fields = gaussian(0.0, 1.0, 1.0).to_probability_fields();
        let scaled = fields.density().scaled(1.1).unwrap();
        assert!(ProbabilityFields::new(scaled, fields.current().clone(), fields.constants()).is_err());
    }

    #[test]
    fn orphan_current_is_flagged() {
        let g = grid(10.0);
        let density = GridFunction::from_fn(g, |x| {
            if x.abs() < 2.0 { 0.25 } else { 0.0 }
        })
        .unwrap();
        let norm = integrate(&density);
        let density = density.scaled(1.0 / norm).unwrap();
        let current = GridFunction::from_fn(g, |x| if x > 5.0 { 0.1 } else { 0.0 }).unwrap();
        let fields = ProbabilityFields::new(density, current, PhysicalConstants::default()).unwrap();
        let rec = reconstruct_wavefunction(&fields).unwrap();
        assert!(rec.flagged);
        assert_eq!(rec.orphan_current, 0.1);
    }
}
