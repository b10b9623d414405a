//! Device kernels and the linear stationary transform that maps intrinsic
//! density and current onto their recorded counterparts.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{convolve, integrate, Grid, GridFunction, SampledKernel};
use crate::state::ProbabilityFields;

/// Kernel normalization tolerance.
pub const KERNEL_NORM_TOL: f64 = 1e-6;

/// Density drift beyond which the transformed density is renormalized.
pub const DRIFT_TOL: f64 = 1e-9;

/// Gaussian kernels are sampled out to this many widths (or the grid span);
/// beyond it the samples underflow.
pub const KERNEL_REACH: f64 = 38.0;

/// Gaussian widths at or below this fraction of `dx` use the ideal branch.
pub const IDEAL_WIDTH_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Ideal,
    Gaussian { width: f64 },
    Tabulated(SampledKernel),
}

impl KernelSpec {
    /// `0` maps to the ideal kernel.
    pub fn from_width(width: f64) -> Self {
        if width == 0.0 {
            KernelSpec::Ideal
        } else {
            KernelSpec::Gaussian { width }
        }
    }

    fn name(&self) -> String {
        match self {
            KernelSpec::Ideal => "ideal".into(),
            KernelSpec::Gaussian { width } => format!("gaussian(width={width})"),
            KernelSpec::Tabulated(k) => format!("tabulated({} samples)", k.values().len()),
        }
    }

    fn is_effectively_ideal(&self, grid: &Grid) -> bool {
        match self {
            KernelSpec::Ideal => true,
            KernelSpec::Gaussian { width } => *width > 0.0 && *width <= IDEAL_WIDTH_FRACTION * grid.dx(),
            KernelSpec::Tabulated(_) => false,
        }
    }
}

/// Raw samples of `exp(-u²/2w²)/(w√(2π))` on the grid spacing.
pub fn gaussian_kernel(width: f64, grid: &Grid) -> Result<SampledKernel> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidInput(format!("kernel width must be positive, got {width}")));
    }
    let dx = grid.dx();
    let reach = ((KERNEL_REACH * width / dx).ceil() as usize).min(grid.len() - 1) as i64;
    let norm = 1.0 / (width * (2.0 * PI).sqrt());
    let values = (-reach..=reach)
        .map(|i| {
            let u = i as f64 * dx;
            norm * (-u * u / (2.0 * width * width)).exp()
        })
        .collect();
    SampledKernel::new(dx, -reach, values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSpec {
    pub density_kernel: KernelSpec,
    pub current_kernel: KernelSpec,
}

impl MeasurementSpec {
    pub fn ideal() -> Self {
        Self {
            density_kernel: KernelSpec::Ideal,
            current_kernel: KernelSpec::Ideal,
        }
    }

    pub fn gaussian(sigma: f64, lambda: f64) -> Self {
        Self {
            density_kernel: KernelSpec::from_width(sigma),
            current_kernel: KernelSpec::from_width(lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelValidation {
    pub kernel: String,
    pub integral: f64,
    pub nonnegative: bool,
    pub effective_width: f64,
    pub passed: bool,
    pub messages: Vec<String>,
}

pub fn validate_kernel(kernel: &KernelSpec, grid: &Grid) -> KernelValidation {
    let mut report = KernelValidation {
        kernel: kernel.name(),
        integral: 1.0,
        nonnegative: true,
        effective_width: 0.0,
        passed: true,
        messages: Vec::new(),
    };
    if kernel.is_effectively_ideal(grid) {
        if !matches!(kernel, KernelSpec::Ideal) {
            report.messages.push("width below a tenth of dx: treated as ideal".into());
        }
        return report;
    }
    let sampled = match kernel {
        KernelSpec::Ideal => unreachable!(),
        KernelSpec::Gaussian { width } => match gaussian_kernel(*width, grid) {
            Ok(raw) => {
                let mass = raw.mass();
                if (mass - 1.0).abs() > KERNEL_NORM_TOL {
                    report.messages.push(format!(
                        "width under-resolved by the grid: raw sample mass {mass:.9}, renormalized on the grid"
                    ));
                }
                match raw.normalized() {
                    Ok(k) => k,
                    Err(e) => {
                        report.passed = false;
                        report.messages.push(e.to_string());
                        return report;
                    }
                }
            }
            Err(e) => {
                report.passed = false;
                report.messages.push(e.to_string());
                return report;
            }
        },
        KernelSpec::Tabulated(k) => {
            if (k.dx() - grid.dx()).abs() > 1e-9 * grid.dx() {
                report.passed = false;
                report
                    .messages
                    .push(format!("spacing mismatch: kernel dx {} vs grid dx {}", k.dx(), grid.dx()));
            }
            k.clone()
        }
    };
    report.integral = sampled.mass();
    report.nonnegative = sampled.min_value() >= 0.0;
    report.effective_width = sampled.effective_width();
    if (report.integral - 1.0).abs() > KERNEL_NORM_TOL {
        report.passed = false;
        report
            .messages
            .push(format!("normalization violated: integral = {:.9}", report.integral));
    }
    if !report.nonnegative {
        report
            .messages
            .push("kernel takes negative values (permitted, positivity not guaranteed)".into());
    }
    report
}

fn sampled_for_transform(kernel: &KernelSpec, grid: &Grid) -> Result<Option<SampledKernel>> {
    let report = validate_kernel(kernel, grid);
    if !report.passed {
        return Err(Error::KernelInvalid(format!("{}: {}", report.kernel, report.messages.join("; "))));
    }
    if kernel.is_effectively_ideal(grid) {
        return Ok(None);
    }
    match kernel {
        KernelSpec::Gaussian { width } => Ok(Some(gaussian_kernel(*width, grid)?.normalized()?)),
        KernelSpec::Tabulated(k) => Ok(Some(k.clone())),
        KernelSpec::Ideal => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TransformReport {
    /// `∫ρ_PR − ∫ρ_IN` before any renormalization.
    pub density_drift: f64,
    pub renormalized: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    pub fields: ProbabilityFields,
    pub report: TransformReport,
}

/// `ρ_PR = G ⊛ ρ_IN`, `J_PR = Λ ⊛ J_IN`.
pub fn transform(fields: &ProbabilityFields, spec: &MeasurementSpec) -> Result<Transformed> {
    let grid = *fields.grid();
    let density_kernel = sampled_for_transform(&spec.density_kernel, &grid)?;
    let current_kernel = sampled_for_transform(&spec.current_kernel, &grid)?;
    let mut report = TransformReport::default();

    let density = match &density_kernel {
        None => fields.density().clone(),
        Some(k) => {
            let out = convolve(fields.density(), k)?;
            if out.boundary_warning {
                report
                    .warnings
                    .push("density has non-negligible mass within one kernel width of the grid edge".into());
            }
            let mass_in = integrate(fields.density());
            let mass_out = integrate(&out.field);
            report.density_drift = mass_out - mass_in;
            if report.density_drift.abs() > DRIFT_TOL {
                report.renormalized = true;
                report.warnings.push(format!(
                    "density renormalized after drift {:.3e}",
                    report.density_drift
                ));
                out.field.scaled(mass_in / mass_out)?
            } else {
                out.field
            }
        }
    };

    let current = match &current_kernel {
        None => fields.current().clone(),
        Some(k) => {
            let out = convolve(fields.current(), k)?;
            if out.boundary_warning {
                report
                    .warnings
                    .push("current has non-negligible mass within one kernel width of the grid edge".into());
            }
            out.field
        }
    };

    Ok(Transformed {
        fields: ProbabilityFields::new(density, current, fields.constants())?,
        report,
    })
}

/// Read a tabulated kernel from two-column CSV (`offset,value`, header row,
/// uniformly spaced offsets).
pub fn read_kernel_csv<R: Read>(reader: R) -> Result<SampledKernel> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut offsets = Vec::new();
    let mut values = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(Error::Parse(format!(
                "kernel row {} has {} columns, expected 2",
                line + 2,
                record.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("kernel row {}: '{s}': {e}", line + 2)))
        };
        offsets.push(parse(&record[0])?);
        values.push(parse(&record[1])?);
    }
    if offsets.len() < 2 {
        return Err(Error::Parse("kernel table needs at least two rows".into()));
    }
    let dx = offsets[1] - offsets[0];
    if !(dx > 0.0) {
        return Err(Error::Parse("kernel offsets must increase".into()));
    }
    let first = (offsets[0] / dx).round() as i64;
    for (i, u) in offsets.iter().enumerate() {
        let want = (first + i as i64) as f64 * dx;
        if (u - want).abs() > 1e-6 * dx {
            return Err(Error::Parse(format!(
                "kernel offset {u} is not on the uniform lattice (expected {want})"
            )));
        }
    }
    SampledKernel::new(dx, first, values)
}

pub fn load_kernel_csv(path: &Path) -> Result<SampledKernel> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_kernel_csv(file)
}

pub fn write_kernel_csv<W: Write>(kernel: &SampledKernel, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(["offset", "value"])?;
    for (u, v) in kernel.offsets().zip(kernel.values()) {
        w.write_record([format!("{u:.17e}"), format!("{v:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Sample a transformed field against a reference curve, returning the
/// sup-norm distance.
pub fn sup_residual(field: &GridFunction, reference: impl Fn(f64) -> f64) -> f64 {
    let grid = field.grid();
    field
        .values()
        .iter()
        .enumerate()
        .fold(0.0, |m, (i, v)| m.max((v - reference(grid.x(i))).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_gaussian_state, GaussianStateSpec, PhysicalConstants};

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

    #[test]
    fn ideal_kernel_validates_trivially() {
        let g = Grid::centered(0.0, 5.0, 100).unwrap();
        let r = validate_kernel(&KernelSpec::Ideal, &g);
        assert!(r.passed);
        assert_eq!(r.integral, 1.0);
        assert_eq!(r.effective_width, 0.0);
    }

    #[test]
    fn gaussian_kernel_normalization() {
        let g = Grid::new(-5.0, 0.005, 2001).unwrap();
        let r = validate_kernel(&KernelSpec::Gaussian { width: 0.5 }, &g);
        assert!(r.passed, "{r:?}");
        assert!((r.integral - 1.0).abs() < 1e-10);
        assert!((r.effective_width - 0.5).abs() < 1e-9);
    }

    #[test]
    fn scaled_table_fails_validation() {
        let g = Grid::new(-5.0, 0.005, 2001).unwrap();
        let k = gaussian_kernel(0.5, &g).unwrap().scaled(0.9).unwrap();
        let r = validate_kernel(&KernelSpec::Tabulated(k), &g);
        assert!(!r.passed);
        assert!(r.messages.iter().any(|m| m.contains("normalization violated")));
    }

    #[test]
    fn negative_table_is_permitted_with_warning() {
        let g = Grid::new(-1.0, 0.1, 21).unwrap();
        let k = SampledKernel::new(0.1, -1, vec![-1.0, 12.0, -1.0]).unwrap();
        let r = validate_kernel(&KernelSpec::Tabulated(k), &g);
        assert!(r.passed);
        assert!(!r.nonnegative);
        assert!(r.messages.iter().any(|m| m.contains("negative")));
    }

    #[test]
    fn mismatched_table_spacing_fails() {
        let g = Grid::new(-1.0, 0.1, 21).unwrap();
        let k = SampledKernel::delta(0.05).unwrap();
        assert!(!validate_kernel(&KernelSpec::Tabulated(k), &g).passed);
    }

    #[test]
    fn density_variance_adds() {
        let f = fields(1.0, 0.0, 10.0 * 1.25f64.sqrt());
        let out = transform(&f, &MeasurementSpec::gaussian(0.5, 0.0)).unwrap();
        assert!(sup_residual(out.fields.density(), |x| normal(x, 1.25)) < 1e-8);
        assert!(out.report.warnings.is_empty());
    }

    #[test]
    fn ideal_spec_is_identity() {
        let f = fields(1.0, 2.0, 10.0);
        let out = transform(&f, &MeasurementSpec::ideal()).unwrap();
        assert!(out.fields.density().sup_distance(f.density()) < 1e-12);
        assert!(out.fields.current().sup_distance(f.current()) < 1e-12);
    }

    #[test]
    fn tiny_width_takes_ideal_branch() {
        let f = fields(1.0, 1.0, 10.0);
        let dx = f.grid().dx();
        let out = transform(&f, &MeasurementSpec::gaussian(dx / 10.0, dx / 10.0)).unwrap();
        assert!(out.fields.density().sup_distance(f.density()) < 1e-12);
        assert!(out.fields.current().sup_distance(f.current()) < 1e-12);
    }

    #[test]
    fn current_integral_is_preserved() {
        let f = fields(1.0, 1.0, 10.0 * 1.25f64.sqrt());
        let out = transform(&f, &MeasurementSpec::gaussian(0.0, 0.5)).unwrap();
        assert!((integrate(out.fields.current()) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gaussian_semigroup() {
        let f = fields(0.8, 0.0, 12.0);
        let once = transform(&f, &MeasurementSpec::gaussian(0.5, 0.0)).unwrap();
        let twice = transform(&once.fields, &MeasurementSpec::gaussian(0.7, 0.0)).unwrap();
        let direct = transform(&f, &MeasurementSpec::gaussian((0.25f64 + 0.49).sqrt(), 0.0)).unwrap();
        assert!(twice.fields.density().sup_distance(direct.fields.density()) < 1e-6);
    }

    #[test]
    fn under_resolved_width_is_renormalized_with_a_warning() {
        let f = fields(1.0, 0.0, 10.0);
        let dx = f.grid().dx();
        let r = validate_kernel(&KernelSpec::Gaussian { width: 0.4 * dx }, f.grid());
        assert!(r.passed);
        assert!(r.messages.iter().any(|m| m.contains("under-resolved")));
        let out = transform(&f, &MeasurementSpec::gaussian(0.4 * dx, 0.0)).unwrap();
        assert!((integrate(out.fields.density()) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kernel_csv_round_trip() {
        let g = Grid::new(-1.0, 0.01, 201).unwrap();
        let k = gaussian_kernel(0.05, &g).unwrap();
        let mut buf = Vec::new();
        write_kernel_csv(&k, &mut buf).unwrap();
        let back = read_kernel_csv(buf.as_slice()).unwrap();
        assert_eq!(back.first_offset(), k.first_offset());
        assert!((back.dx() - k.dx()).abs() < 1e-15);
        for (a, b) in back.values().iter().zip(k.values()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn kernel_csv_rejects_irregular_offsets() {
        let csv = "offset,value\n-0.1,1\n0.0,8\n0.15,1\n";
        assert!(read_kernel_csv(csv.as_bytes()).is_err());
        assert!(read_kernel_csv("offset,value\n0.0,1\n".as_bytes()).is_err());
    }
}
