//! End-to-end runs: configuration, the IN → PR → FR analysis, parameter
//! sweeps and curve tables.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{entropy_indicators, pr_error_indicators, EntropyReport, ErrorIndicators};
use crate::measurement::{
    load_kernel_csv, transform, validate_kernel, KernelSpec, KernelValidation, MeasurementSpec, TransformReport,
};
use crate::numerics::Grid;
use crate::observables::{harmonic_hamiltonian, parameters, pr_parameters, Observable, ParameterSet, Reading};
use crate::oracle::{
    closed_form_fields, closed_form_indicators, closed_form_parameters, oscillator_closed_forms, GaussianCurve,
    GaussianScenario, OscillatorScenario,
};
use crate::sampling::{fr_error_indicators, fr_statistics, sample_momentum, sample_position, SampleSet, RNG_NAME};
use crate::state::{
    make_gaussian_state, reconstruct_wavefunction, GaussianStateSpec, PhysicalConstants, ProbabilityFields,
    WaveFunction,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest grid built for a tabulated kernel, whose spacing fixes `dx`.
const MAX_TABULATED_POINTS: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default)]
    pub k: f64,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            x0: 0.0,
            alpha: 1.0,
            k: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorConfig {
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub lambda: f64,
    /// Tabulated density kernel (`offset,value` CSV); overrides `sigma`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_file: Option<PathBuf>,
    /// Tabulated current kernel; overrides `lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-span in units of the widest relevant width.
    #[serde(default = "default_span")]
    pub span_mult: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            span_mult: default_span(),
            n_points: default_points(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_samples")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n: default_samples(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn default_span() -> f64 {
    10.0
}
fn default_points() -> usize {
    4096
}
fn default_samples() -> usize {
    100_000
}
fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oscillator: Option<OscillatorConfig>,
    #[serde(default)]
    pub kernels: KernelConfig,
    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            state: None,
            oscillator: None,
            kernels: KernelConfig::default(),
            constants: PhysicalConstants::default(),
            grid: GridConfig::default(),
            sampling: SamplingConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// The state under study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Packet(GaussianScenario),
    Oscillator(OscillatorScenario),
}

impl Scenario {
    /// The Gaussian packet the state is built from.
    pub fn packet(&self) -> GaussianScenario {
        match self {
            Scenario::Packet(g) => *g,
            Scenario::Oscillator(o) => o.as_gaussian(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.state.is_some() && self.oscillator.is_some() {
            return Err(Error::InvalidInput("give either a state or an oscillator, not both".into()));
        }
        self.constants.validate()?;
        self.scenario().packet().validate()?;
        if let Scenario::Oscillator(o) = self.scenario() {
            o.validate()?;
        }
        if !(self.grid.span_mult > 0.0 && self.grid.span_mult.is_finite()) {
            return Err(Error::InvalidGrid(format!("span_mult must be positive, got {}", self.grid.span_mult)));
        }
        if self.grid.n_points < crate::numerics::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} grid points, got {}",
                crate::numerics::MIN_POINTS,
                self.grid.n_points
            )));
        }
        if self.sampling.n < 2 {
            return Err(Error::TooFewSamples(self.sampling.n));
        }
        Ok(())
    }

    /// A packet with `α = 1` at rest when neither state nor oscillator is set.
    pub fn scenario(&self) -> Scenario {
        let (sigma, lambda) = (self.kernels.sigma, self.kernels.lambda);
        match (self.state, self.oscillator) {
            (_, Some(o)) => {
                let mut s = OscillatorScenario::new(o.omega, sigma);
                s.constants = self.constants;
                Scenario::Oscillator(s)
            }
            (state, None) => {
                let st = state.unwrap_or_default();
                Scenario::Packet(
                    GaussianScenario::new(st.x0, st.alpha, st.k, sigma, lambda).with_constants(self.constants),
                )
            }
        }
    }

    fn is_tabulated(&self) -> bool {
        self.kernels.density_file.is_some() || self.kernels.current_file.is_some()
    }
}

/// Everything needed before the transform runs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub grid: Grid,
    pub psi_in: WaveFunction,
    pub spec: MeasurementSpec,
    pub observables: Vec<Observable>,
    pub kernels: Vec<KernelValidation>,
    pub tabulated: bool,
}

fn kernel_for(file: &Option<PathBuf>, width: f64) -> Result<KernelSpec> {
    match file {
        Some(path) => Ok(KernelSpec::Tabulated(load_kernel_csv(path)?)),
        None => Ok(KernelSpec::from_width(width)),
    }
}

fn effective_width(kernel: &KernelSpec) -> f64 {
    match kernel {
        KernelSpec::Ideal => 0.0,
        KernelSpec::Gaussian { width } => *width,
        KernelSpec::Tabulated(k) => k.effective_width(),
    }
}

/// Build the grid, intrinsic state, kernels and observables for a run.
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let scenario = config.scenario();
    let packet = scenario.packet();
    let tabulated = config.is_tabulated();
    if !tabulated {
        packet.check_domain()?;
    }
    let spec = MeasurementSpec {
        density_kernel: kernel_for(&config.kernels.density_file, config.kernels.sigma)?,
        current_kernel: kernel_for(&config.kernels.current_file, config.kernels.lambda)?,
    };
    let sigma = effective_width(&spec.density_kernel);
    let lambda = effective_width(&spec.current_kernel);
    let width = (packet.alpha.powi(2) + sigma * sigma + lambda * lambda).sqrt();
    let half_span = config.grid.span_mult * width;

    let grid = if tabulated {
        let spacings: Vec<f64> = [&spec.density_kernel, &spec.current_kernel]
            .iter()
            .filter_map(|k| match k {
                KernelSpec::Tabulated(t) => Some(t.dx()),
                _ => None,
            })
            .collect();
        let dx = spacings[0];
        if spacings.iter().any(|d| (d - dx).abs() > 1e-9 * dx) {
            return Err(Error::SpacingMismatch {
                grid: dx,
                kernel: spacings[spacings.len() - 1],
            });
        }
        let cells = (half_span / dx).ceil() as usize;
        let n = 2 * cells + 1;
        if n > MAX_TABULATED_POINTS {
            return Err(Error::InvalidGrid(format!(
                "tabulated kernel spacing {dx} would need {n} grid points"
            )));
        }
        Grid::new(packet.x0 - cells as f64 * dx, dx, n)?
    } else {
        let weight = packet.velocity_weight_width();
        let half = half_span.max(config.grid.span_mult * weight);
        Grid::centered(packet.x0, half, config.grid.n_points)?
    };

    let mut kernels = Vec::new();
    for kernel in [&spec.density_kernel, &spec.current_kernel] {
        let v = validate_kernel(kernel, &grid);
        if !v.passed {
            return Err(Error::KernelInvalid(format!("{}: {}", v.kernel, v.messages.join("; "))));
        }
        kernels.push(v);
    }

    let psi_in = make_gaussian_state(
        GaussianStateSpec {
            x0: packet.x0,
            alpha: packet.alpha,
            k: packet.k,
        },
        config.constants,
        grid,
    )?;

    let mut observables = vec![Observable::position(grid), Observable::momentum(config.constants.hbar)];
    if let Scenario::Oscillator(o) = scenario {
        observables.push(harmonic_hamiltonian(config.constants, o.omega, grid)?);
    }

    Ok(Prepared {
        scenario,
        grid,
        psi_in,
        spec,
        observables,
        kernels,
        tabulated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub quantity: String,
    pub numerical: f64,
    pub closed_form: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub residuals: Vec<Residual>,
    pub max_residual: f64,
}

impl OracleComparison {
    fn push(&mut self, quantity: impl Into<String>, numerical: f64, closed_form: f64) {
        let residual = (numerical - closed_form).abs();
        self.max_residual = self.max_residual.max(residual);
        self.residuals.push(Residual {
            quantity: quantity.into(),
            numerical,
            closed_form,
            residual,
        });
    }

    pub fn get(&self, quantity: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.quantity == quantity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingInfo {
    pub n: usize,
    pub position_seed: u64,
    pub momentum_seed: u64,
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub scenario: Scenario,
    pub grid: Grid,
    pub kernels: Vec<KernelValidation>,
    pub transform: TransformReport,
    pub intrinsic: ParameterSet,
    pub prognosticated: ParameterSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factual: Option<ParameterSet>,
    pub pr_indicators: ErrorIndicators,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fr_indicators: Option<ErrorIndicators>,
    pub entropy: EntropyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingInfo>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Intermediate state of a run, kept for curve output and sampling.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub prepared: Prepared,
    pub fields_in: ProbabilityFields,
    pub fields_pr: ProbabilityFields,
    pub report: RunReport,
}

fn oracle_comparison(
    scenario: &Scenario,
    fields_pr: &ProbabilityFields,
    intrinsic: &ParameterSet,
    recorded: &ParameterSet,
    entropy: &EntropyReport,
) -> Result<OracleComparison> {
    let packet = scenario.packet();
    let (cf_in, cf_pr) = closed_form_parameters(&packet)?;
    let cf_ind = closed_form_indicators(&packet)?;
    let curves = closed_form_fields(&packet)?;
    let mut cmp = OracleComparison {
        residuals: Vec::new(),
        max_residual: 0.0,
    };
    for (set, exact, tag) in [(intrinsic, &cf_in, "IN"), (recorded, &cf_pr, "PR")] {
        for label in ["x", "p"] {
            cmp.push(format!("mean {label} {tag}"), set.means[label], exact.means[label]);
            cmp.push(format!("stddev {label} {tag}"), set.stddevs[label], exact.stddevs[label]);
        }
        let c = set.correlation("x", "p").unwrap_or_default();
        let e = exact.correlation("x", "p").unwrap_or_default();
        cmp.push(format!("Re C(x,p) {tag}"), c.re, e.re);
        cmp.push(format!("Im C(x,p) {tag}"), c.im, e.im);
    }
    cmp.push(
        "sup rho PR",
        crate::measurement::sup_residual(fields_pr.density(), |x| curves.density_pr.eval(x)),
        0.0,
    );
    cmp.push(
        "sup J PR",
        crate::measurement::sup_residual(fields_pr.current(), |x| curves.current_pr.eval(x)),
        0.0,
    );
    cmp.push("delta H", entropy.delta_h, cf_ind.entropy.delta_h);
    if entropy.motional_defined {
        cmp.push("delta tau", entropy.delta_tau, cf_ind.entropy.delta_tau);
    }
    if let Scenario::Oscillator(o) = scenario {
        let exact = oscillator_closed_forms(o)?;
        cmp.push("mean H IN", intrinsic.means["H"], exact.mean_in);
        cmp.push("stddev H IN", intrinsic.stddevs["H"], exact.stddev_in);
        cmp.push("mean H PR", recorded.means["H"], exact.mean_pr);
        cmp.push("stddev H PR", recorded.stddevs["H"], exact.stddev_pr);
    }
    Ok(cmp)
}

/// IN and PR parameters, PR indicators, entropies and the closed-form
/// comparison (Gaussian kernels only).
pub fn analyze(config: &RunConfig) -> Result<Analysis> {
    let prepared = prepare(config)?;
    let fields_in = prepared.psi_in.to_probability_fields();
    let transformed = transform(&fields_in, &prepared.spec)?;
    let fields_pr = transformed.fields;
    let intrinsic = parameters(&prepared.psi_in, &prepared.observables, Reading::Intrinsic)?;
    let prognosticated = pr_parameters(&fields_pr, &prepared.observables)?;
    let pr_indicators = pr_error_indicators(&intrinsic, &prognosticated)?;
    let entropy = entropy_indicators(&fields_in, &fields_pr)?;
    let oracle = if prepared.tabulated {
        None
    } else {
        Some(oracle_comparison(&prepared.scenario, &fields_pr, &intrinsic, &prognosticated, &entropy)?)
    };

    let mut warnings = Vec::new();
    for v in &prepared.kernels {
        warnings.extend(v.messages.iter().map(|m| format!("{}: {m}", v.kernel)));
    }
    warnings.extend(transformed.report.warnings.iter().cloned());
    warnings.extend(intrinsic.warnings.iter().map(|w| format!("IN: {w}")));
    warnings.extend(prognosticated.warnings.iter().map(|w| format!("PR: {w}")));
    if !entropy.motional_defined {
        warnings.push("motional entropy undefined: the current vanishes".into());
    }

    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        scenario: prepared.scenario,
        grid: prepared.grid,
        kernels: prepared.kernels.clone(),
        transform: transformed.report,
        intrinsic,
        prognosticated,
        factual: None,
        pr_indicators,
        fr_indicators: None,
        entropy,
        oracle,
        sampling: None,
        warnings,
    };
    Ok(Analysis {
        prepared,
        fields_in,
        fields_pr,
        report,
    })
}

/// Seed for momentum records, kept away from the position stream of this and
/// neighbouring sweep points.
pub fn momentum_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

#[derive(Debug, Clone)]
pub struct SampleRun {
    pub analysis: Analysis,
    pub samples: Vec<SampleSet>,
}

/// `analyze` followed by FR records of `x` (from `ρ_PR`) and `p` (from the
/// spectrum of `Ψ_PR`).
pub fn sample(config: &RunConfig) -> Result<SampleRun> {
    let mut analysis = analyze(config)?;
    let SamplingConfig { n, seed } = config.sampling;
    let mut samples = vec![sample_position(&analysis.fields_pr, n, seed)?];
    let psi_pr = reconstruct_wavefunction(&analysis.fields_pr)?.wavefunction;
    match sample_momentum(&psi_pr, n, momentum_seed(seed)) {
        Ok(s) => samples.push(s),
        Err(e @ Error::Aliasing { .. }) => analysis.report.warnings.push(format!("p not sampled: {e}")),
        Err(e) => return Err(e),
    }
    let fr = fr_statistics(&samples, false)?;
    let report = &mut analysis.report;
    report.fr_indicators = Some(fr_error_indicators(&fr, &report.intrinsic)?);
    report.factual = Some(fr);
    report.sampling = Some(SamplingInfo {
        n,
        position_seed: seed,
        momentum_seed: momentum_seed(seed),
        rng: RNG_NAME.into(),
    });
    Ok(SampleRun { analysis, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Sigma,
    Lambda,
    K,
    N,
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma" => Ok(Self::Sigma),
            "lambda" => Ok(Self::Lambda),
            "k" => Ok(Self::K),
            "n" => Ok(Self::N),
            other => Err(Error::InvalidInput(format!(
                "unknown sweep axis '{other}' (expected sigma, lambda, k or n)"
            ))),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sigma => "sigma",
            Self::Lambda => "lambda",
            Self::K => "k",
            Self::N => "n",
        })
    }
}

/// One flat sweep-table row. Skipped points carry only the error.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub status: String,
    pub error: String,
    pub x_mean_in: Option<f64>,
    pub x_mean_pr: Option<f64>,
    pub x_sd_in: Option<f64>,
    pub x_sd_pr: Option<f64>,
    pub p_mean_in: Option<f64>,
    pub p_mean_pr: Option<f64>,
    pub p_sd_in: Option<f64>,
    pub p_sd_pr: Option<f64>,
    pub err_mean_x: Option<f64>,
    pub err_mean_p: Option<f64>,
    pub err_corr_xp: Option<f64>,
    pub err_sd_x: Option<f64>,
    pub err_sd_p: Option<f64>,
    pub shift_sd_p: Option<f64>,
    pub delta_h: Option<f64>,
    pub delta_tau: Option<f64>,
    pub tau_defined: Option<bool>,
    pub h_mean_pr: Option<f64>,
    pub h_sd_pr: Option<f64>,
    pub fr_seed: Option<u64>,
    pub fr_x_mean: Option<f64>,
    pub fr_x_sd: Option<f64>,
    pub fr_p_mean: Option<f64>,
    pub fr_p_sd: Option<f64>,
    pub fr_err_sd_x: Option<f64>,
    pub fr_err_sd_p: Option<f64>,
    pub max_oracle_residual: Option<f64>,
}

fn row_from(axis: SweepAxis, value: f64, report: &RunReport) -> SweepRow {
    let (i, p, e) = (&report.intrinsic, &report.prognosticated, &report.pr_indicators);
    let mut row = SweepRow {
        axis: axis.to_string(),
        value,
        status: "ok".into(),
        x_mean_in: i.mean("x"),
        x_mean_pr: p.mean("x"),
        x_sd_in: i.stddev("x"),
        x_sd_pr: p.stddev("x"),
        p_mean_in: i.mean("p"),
        p_mean_pr: p.mean("p"),
        p_sd_in: i.stddev("p"),
        p_sd_pr: p.stddev("p"),
        err_mean_x: e.mean_error("x"),
        err_mean_p: e.mean_error("p"),
        err_corr_xp: e.correlation_error("x", "p"),
        err_sd_x: e.stddev_error("x"),
        err_sd_p: e.stddev_error("p"),
        shift_sd_p: e.stddev_shifts.get("p").copied(),
        delta_h: Some(report.entropy.delta_h),
        delta_tau: report.entropy.motional_defined.then_some(report.entropy.delta_tau),
        tau_defined: Some(report.entropy.motional_defined),
        h_mean_pr: p.mean("H"),
        h_sd_pr: p.stddev("H"),
        max_oracle_residual: report.oracle.as_ref().map(|o| o.max_residual),
        ..SweepRow::default()
    };
    if let (Some(fr), Some(fe), Some(info)) = (&report.factual, &report.fr_indicators, &report.sampling) {
        row.fr_seed = Some(info.position_seed);
        row.fr_x_mean = fr.mean("x");
        row.fr_x_sd = fr.stddev("x");
        row.fr_p_mean = fr.mean("p");
        row.fr_p_sd = fr.stddev("p");
        row.fr_err_sd_x = fe.stddev_error("x");
        row.fr_err_sd_p = fe.stddev_error("p");
    }
    row
}

fn sweep_point(base: &RunConfig, axis: SweepAxis, value: f64, index: usize) -> Result<RunReport> {
    let mut config = base.clone();
    match axis {
        SweepAxis::Sigma => config.kernels.sigma = value,
        SweepAxis::Lambda => config.kernels.lambda = value,
        SweepAxis::K => {
            if config.oscillator.is_some() {
                return Err(Error::InvalidInput("the oscillator ground state has no k to sweep".into()));
            }
            config.state.get_or_insert_with(StateConfig::default).k = value;
        }
        SweepAxis::N => {
            if !(value >= 2.0 && value.fract() == 0.0) {
                return Err(Error::InvalidInput(format!("sample count must be an integer >= 2, got {value}")));
            }
            config.sampling.n = value as usize;
            config.sampling.seed = base.sampling.seed.wrapping_add(index as u64);
            return Ok(sample(&config)?.analysis.report);
        }
    }
    Ok(analyze(&config)?.report)
}

/// One row per value, computed in parallel. Points that fail (for example
/// outside the momentum-spread domain) are kept as `skipped` rows.
pub fn sweep(config: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>> {
    config.validate()?;
    Ok(values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| match sweep_point(config, axis, value, index) {
            Ok(report) => row_from(axis, value, &report),
            Err(e) => SweepRow {
                axis: axis.to_string(),
                value,
                status: "skipped".into(),
                error: e.to_string(),
                ..SweepRow::default()
            },
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One grid point of a curve table, with the closed form alongside when the
/// kernels are Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub x: f64,
    #[serde(rename = "IN")]
    pub intrinsic: f64,
    #[serde(rename = "PR")]
    pub recorded: f64,
    #[serde(rename = "oracle_IN")]
    pub oracle_intrinsic: Option<f64>,
    #[serde(rename = "oracle_PR")]
    pub oracle_recorded: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curves {
    pub density: Vec<CurveRow>,
    pub current: Vec<CurveRow>,
}

fn curve_rows(
    grid: &Grid,
    intrinsic: &[f64],
    recorded: &[f64],
    exact: Option<(GaussianCurve, GaussianCurve)>,
) -> Vec<CurveRow> {
    (0..grid.len())
        .map(|i| {
            let x = grid.x(i);
            CurveRow {
                x,
                intrinsic: intrinsic[i],
                recorded: recorded[i],
                oracle_intrinsic: exact.map(|(c, _)| c.eval(x)),
                oracle_recorded: exact.map(|(_, c)| c.eval(x)),
            }
        })
        .collect()
}

pub fn curves(config: &RunConfig) -> Result<Curves> {
    let a = analyze(config)?;
    let exact = if a.prepared.tabulated {
        None
    } else {
        Some(closed_form_fields(&a.prepared.scenario.packet())?)
    };
    let grid = a.prepared.grid;
    Ok(Curves {
        density: curve_rows(
            &grid,
            a.fields_in.density().values(),
            a.fields_pr.density().values(),
            exact.map(|c| (c.density_in, c.density_pr)),
        ),
        current: curve_rows(
            &grid,
            a.fields_in.current().values(),
            a.fields_pr.current().values(),
            exact.map(|c| (c.current_in, c.current_pr)),
        ),
    })
}

pub fn write_curve_csv<W: Write>(rows: &[CurveRow], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width summary of a report for terminals.
pub fn format_summary(report: &RunReport) -> String {
    let mut out = String::new();
    let fr = report.factual.as_ref();
    let _ = writeln!(out, "{:<10} {:>16} {:>16} {:>16}", "", "IN", "PR", if fr.is_some() { "FR" } else { "" });
    // Values below the printed precision would otherwise show as "-0.0000000000".
    let cell = |v: Option<f64>| v.map(|v| format!("{:>16.10}", if v.abs() < 5e-11 { 0.0 } else { v })).unwrap_or_else(|| format!("{:>16}", "-"));
    for label in &report.intrinsic.labels {
        for (kind, get) in [("mean", ParameterSet::mean as fn(&ParameterSet, &str) -> Option<f64>), ("stddev", ParameterSet::stddev)] {
            let _ = writeln!(
                out,
                "{:<10} {} {} {}",
                format!("{kind} {label}"),
                cell(get(&report.intrinsic, label)),
                cell(get(&report.prognosticated, label)),
                if fr.is_some() { cell(fr.and_then(|f| get(f, label))) } else { String::new() },
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<28} {:>16.10}", "max PR error indicator", report.pr_indicators.max());
    if let Some(fe) = &report.fr_indicators {
        let _ = writeln!(out, "{:<28} {:>16.10}", "max FR error indicator", fe.max());
    }
    let _ = writeln!(out, "{:<28} {:>16.10}", "delta H", report.entropy.delta_h);
    if report.entropy.motional_defined {
        let _ = writeln!(out, "{:<28} {:>16.10}", "delta tau", report.entropy.delta_tau);
    } else {
        let _ = writeln!(out, "{:<28} {:>16}", "delta tau", "undefined");
    }
    if let Some(o) = &report.oracle {
        let _ = writeln!(out, "{:<28} {:>16.3e}", "max closed-form residual", o.max_residual);
    }
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
