//! Simulated factual records: seeded draws from recorded distributions and
//! the finite-sample statistics computed from them.
//!
//! All draws use ChaCha8 seeded through `SeedableRng::seed_from_u64`, so a
//! `(seed, n)` pair reproduces a sample set bit for bit.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indicators::{error_indicators, ErrorIndicators};
use crate::observables::{ParameterSet, Reading};
use crate::state::{ProbabilityFields, WaveFunction};

pub const RNG_NAME: &str = "ChaCha8 (rand_chacha), seed_from_u64";

/// Spectral mass allowed in the outer 5% of the frequency range.
pub const ALIASING_TOL: f64 = 1e-6;

/// Zero-padding factor for the momentum spectrum.
const SPECTRAL_PADDING: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub label: String,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl SampleSet {
    pub fn new(label: impl Into<String>, values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewSamples(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("samples must be finite".into()));
        }
        Ok(Self {
            label: label.into(),
            values,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Single-column CSV whose header reads `<label>@seed=<seed>`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}@seed={}", self.label, self.seed)?;
        for v in &self.values {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty sample file".into()))??;
        let (label, seed) = header
            .trim()
            .rsplit_once("@seed=")
            .ok_or_else(|| Error::Parse(format!("header '{header}' lacks '@seed='")))?;
        let seed = seed
            .parse()
            .map_err(|e| Error::Parse(format!("seed '{seed}': {e}")))?;
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(
                line.parse()
                    .map_err(|e| Error::Parse(format!("sample row {}: '{line}': {e}", i + 2)))?,
            );
        }
        Self::new(label, values, seed)
    }
}

fn uniforms(n: usize, seed: u64) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(move |_| rng.random::<f64>())
}

/// Invert a cumulative table `cdf` (nondecreasing, `cdf[0] = 0`) over cells
/// `[edge(j), edge(j+1))`, spreading mass uniformly within each cell.
fn invert(cdf: &[f64], u: f64, edge: impl Fn(usize) -> f64) -> f64 {
    let total = cdf[cdf.len() - 1];
    let t = u * total;
    let j = cdf.partition_point(|&c| c <= t).clamp(1, cdf.len() - 1) - 1;
    let width = cdf[j + 1] - cdf[j];
    let frac = if width > 0.0 { (t - cdf[j]) / width } else { 0.5 };
    edge(j) + frac * (edge(j + 1) - edge(j))
}

/// Position records drawn from `ρ_PR` by inverse-CDF sampling of its
/// cumulative trapezoid quadrature.
pub fn sample_position(fields_pr: &ProbabilityFields, n: usize, seed: u64) -> Result<SampleSet> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let grid = *fields_pr.grid();
    let rho = fields_pr.density().values();
    let dx = grid.dx();
    let mut cdf = Vec::with_capacity(rho.len());
    cdf.push(0.0);
    for w in rho.windows(2) {
        let last = *cdf.last().unwrap();
        cdf.push(last + 0.5 * dx * (w[0] + w[1]));
    }
    let values = uniforms(n, seed).map(|u| invert(&cdf, u, |j| grid.x(j))).collect();
    SampleSet::new("x", values, seed)
}

/// Momentum records drawn from `|Ψ̃(p)|²`, the normalized squared modulus of
/// the (zero-padded) discrete Fourier amplitude of `Ψ_PR`.
pub fn sample_momentum(psi_pr: &WaveFunction, n: usize, seed: u64) -> Result<SampleSet> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let grid = *psi_pr.grid();
    let hbar = psi_pr.constants().hbar;
    let size = (grid.len() * SPECTRAL_PADDING).next_power_of_two();
    let mut buf: Vec<Complex64> = psi_pr.to_complex().into_values();
    buf.resize(size, Complex64::default());
    FftPlanner::new().plan_fft_forward(size).process(&mut buf);

    // Reorder so that frequency increases monotonically.
    let half = size / 2;
    let power: Vec<f64> = (0..size).map(|i| buf[(i + half) % size].norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("state has no spectral weight".into()));
    }
    let guard = (0.05 * half as f64).ceil() as usize;
    let outer: f64 = power[..guard].iter().chain(&power[size - guard..]).sum();
    if outer / total > ALIASING_TOL {
        return Err(Error::Aliasing { mass: outer / total });
    }

    let dk = 2.0 * std::f64::consts::PI / (size as f64 * grid.dx());
    let mut cdf = Vec::with_capacity(size + 1);
    cdf.push(0.0);
    for p in &power {
        let last = *cdf.last().unwrap();
        cdf.push(last + p);
    }
    // Bin i is centred on wavenumber (i − half)·dk.
    let edge = |j: usize| hbar * ((j as f64 - half as f64) - 0.5) * dk;
    let values = uniforms(n, seed).map(|u| invert(&cdf, u, edge)).collect();
    SampleSet::new("p", values, seed)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population covariance, divisor `n`.
fn covariance(a: &[f64], ma: f64, b: &[f64], mb: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
}

/// FR mean, correlation and standard deviation per observable. Cross
/// correlations are only formed for `paired` records of equal length.
pub fn fr_statistics(samples: &[SampleSet], paired: bool) -> Result<ParameterSet> {
    let mut seen = BTreeSet::new();
    for s in samples {
        if !seen.insert(s.label.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate sample label '{}'", s.label)));
        }
        if s.values.len() < 2 {
            return Err(Error::TooFewSamples(s.values.len()));
        }
    }
    if paired {
        let sizes: Vec<usize> = samples.iter().map(SampleSet::n).collect();
        if sizes.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::UnequalSampleSizes(sizes));
        }
    }
    let means: Vec<f64> = samples.iter().map(|s| mean(&s.values)).collect();
    let mut set = ParameterSet::empty(Reading::Factual);
    for (s, m) in samples.iter().zip(&means) {
        set.labels.push(s.label.clone());
        set.means.insert(s.label.clone(), *m);
    }
    for (i, a) in samples.iter().enumerate() {
        for (j, b) in samples.iter().enumerate() {
            if i != j && !paired {
                continue;
            }
            let c = covariance(&a.values, means[i], &b.values, means[j]);
            set.set_correlation(&a.label, &b.label, Complex64::new(c, 0.0));
            if i == j {
                set.stddevs.insert(a.label.clone(), c.max(0.0).sqrt());
            }
        }
    }
    Ok(set)
}

/// `|FR − IN|` for every observable present in the FR set. Intrinsic
/// observables without records are ignored.
pub fn fr_error_indicators(fr: &ParameterSet, in_params: &ParameterSet) -> Result<ErrorIndicators> {
    let mut base = in_params.clone();
    base.means.retain(|label, _| fr.means.contains_key(label));
    base.stddevs.retain(|label, _| fr.means.contains_key(label));
    base.labels.retain(|label| fr.means.contains_key(label));
    error_indicators(fr, &base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{transform, MeasurementSpec};
    use crate::numerics::Grid;
    use crate::state::{make_gaussian_state, GaussianStateSpec, PhysicalConstants};

    fn psi(alpha: f64, k: f64) -> WaveFunction {
        make_gaussian_state(
            GaussianStateSpec { x0: 0.0, alpha, k },
            PhysicalConstants::default(),
            Grid::centered(0.0, 10.0 * (alpha * alpha + 0.5).sqrt(), 4096).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn hand_computed_statistics() {
        let s = SampleSet::new("a", vec![1.0, 2.0, 3.0], 0).unwrap();
        let set = fr_statistics(&[s], false).unwrap();
        assert_eq!(set.mean("a"), Some(2.0));
        assert!((set.stddev("a").unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn paired_correlation() {
        let a = SampleSet::new("a", vec![1.0, 2.0, 3.0], 0).unwrap();
        let b = SampleSet::new("b", vec![2.0, 4.0, 6.0], 0).unwrap();
        let set = fr_statistics(&[a, b], true).unwrap();
        assert!((set.correlation("a", "b").unwrap().re - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(set.correlation("a", "b"), set.correlation("b", "a"));
    }

    #[test]
    fn unpaired_sets_have_no_cross_terms() {
        let a = SampleSet::new("a", vec![1.0, 2.0, 3.0], 0).unwrap();
        let b = SampleSet::new("b", vec![2.0, 4.0], 0).unwrap();
        let set = fr_statistics(&[a.clone(), b.clone()], false).unwrap();
        assert!(set.correlation("a", "b").is_none());
        assert!(matches!(fr_statistics(&[a, b], true), Err(Error::UnequalSampleSizes(_))));
    }

    #[test]
    fn constant_samples_have_zero_spread() {
        let s = SampleSet::new("a", vec![5.0; 4], 0).unwrap();
        assert_eq!(fr_statistics(&[s], false).unwrap().stddev("a"), Some(0.0));
    }

    #[test]
    fn too_few_samples() {
        let f = psi(1.0, 0.0).to_probability_fields();
        assert_eq!(sample_position(&f, 1, 0), Err(Error::TooFewSamples(1)));
        assert!(SampleSet::new("a", vec![1.0], 0).is_err());
        let two = sample_position(&f, 2, 9).unwrap();
        assert_eq!(two.n(), 2);
        assert!(two.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sampling_is_deterministic() {
        let f = psi(1.0, 0.0).to_probability_fields();
        assert_eq!(sample_position(&f, 1000, 7).unwrap(), sample_position(&f, 1000, 7).unwrap());
        assert_ne!(sample_position(&f, 1000, 7).unwrap(), sample_position(&f, 1000, 8).unwrap());
    }

    #[test]
    fn position_records_follow_recorded_density() {
        let f = psi(1.0, 0.0).to_probability_fields();
        let pr = transform(&f, &MeasurementSpec::gaussian(0.5, 0.0)).unwrap().fields;
        let n = 100_000;
        let s = sample_position(&pr, n, 42).unwrap();
        let set = fr_statistics(&[s], false).unwrap();
        let sd = 1.25f64.sqrt();
        let stderr = sd / (n as f64).sqrt();
        assert!(set.mean("x").unwrap().abs() < 4.0 * stderr);
        assert!((set.stddev("x").unwrap() - sd).abs() < 4.0 * sd / (2.0 * n as f64).sqrt());
    }

    #[test]
    fn momentum_records_of_moving_packet() {
        let n = 100_000;
        let s = sample_momentum(&psi(1.0, 2.0), n, 3).unwrap();
        let set = fr_statistics(&[s], false).unwrap();
        let sd = 0.5;
        assert!((set.mean("p").unwrap() - 2.0).abs() < 4.0 * sd / (n as f64).sqrt());
        assert!((set.stddev("p").unwrap() - sd).abs() < 4.0 * sd / (2.0 * n as f64).sqrt());
    }

    #[test]
    fn aliased_state_is_rejected() {
        let grid = Grid::centered(0.0, 10.0, 256).unwrap();
        // 2.9 rad per cell sits near the Nyquist limit of π.
        let k = 2.9 / grid.dx();
        let w = make_gaussian_state(GaussianStateSpec { x0: 0.0, alpha: 1.0, k }, PhysicalConstants::default(), grid)
            .unwrap();
        assert!(matches!(sample_momentum(&w, 10, 0), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let s = SampleSet::new("x", vec![0.1, -2.5e-7, 3.0, 1.0 / 3.0], 42).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x@seed=42\n"));
        assert_eq!(SampleSet::read_csv(buf.as_slice()).unwrap(), s);
        assert!(SampleSet::read_csv("x\n1\n2\n".as_bytes()).is_err());
    }

    #[test]
    fn fr_indicators_vanish_for_matching_sets() {
        let s = SampleSet::new("a", vec![1.0, 2.0, 3.0], 0).unwrap();
        let fr = fr_statistics(&[s], false).unwrap();
        let mut intrinsic = fr.clone();
        intrinsic.reading = Reading::Intrinsic;
        assert_eq!(fr_error_indicators(&fr, &intrinsic).unwrap().max(), 0.0);
    }
}
