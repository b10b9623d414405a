//! Closed forms checked against brute-force quadrature of the recorded
//! curves, and the numerical pipeline checked against both.

use qms_core::oracle::{
    closed_form_fields, closed_form_parameters, momentum_spread_pr, oscillator_closed_forms, GaussianCurve,
    GaussianScenario, OscillatorScenario,
};
use qms_core::pipeline::{analyze, KernelConfig, OscillatorConfig, RunConfig, StateConfig};

/// Trapezoid sum of `f` over `[c − 40·w, c + 40·w]` with 400k cells.
fn quad(center: f64, width: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = 400_000;
    let a = center - 40.0 * width;
    let h = 80.0 * width / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(a) + f(a + n as f64 * h)))
}

/// `Δp` of `√ρ·e^{iΦ}` with `Φ' = mJ/ħρ`, from
/// `⟨p²⟩ = ħ²∫(√ρ)'² + m²∫J²/ρ` and `⟨p⟩ = m∫J`.
fn momentum_spread_by_quadrature(rho: GaussianCurve, j: GaussianCurve, hbar: f64, mass: f64, span: f64) -> f64 {
    let c = rho.center;
    let root_slope = |x: f64| -(x - c) / (2.0 * rho.variance) * rho.eval(x).sqrt();
    let kinetic = quad(c, span, |x| hbar * hbar * root_slope(x).powi(2));
    let flow = quad(c, span, |x| {
        let r = rho.eval(x);
        if r > 0.0 {
            mass * mass * j.eval(x).powi(2) / r
        } else {
            0.0
        }
    });
    let mean = quad(c, span, |x| mass * j.eval(x));
    (kinetic + flow - mean * mean).sqrt()
}

fn scenarios() -> Vec<GaussianScenario> {
    vec![
        GaussianScenario::new(0.0, 1.0, 1.0, 0.5, 0.5),
        GaussianScenario::new(0.4, 0.7, 2.0, 0.3, 0.8),
        GaussianScenario::new(-1.0, 1.5, -1.5, 1.0, 0.2),
        GaussianScenario::new(0.0, 1.0, 3.0, 0.3, 1.0),
        GaussianScenario::new(0.0, 2.0, 0.5, 0.0, 1.0),
        GaussianScenario::new(0.0, 1.0, 1.0, 0.0, 0.0),
    ]
}

#[test]
fn recorded_momentum_spread_matches_brute_force() {
    for s in scenarios() {
        let f = closed_form_fields(&s).unwrap();
        let span = s.velocity_weight_width().max(s.density_variance_pr().sqrt());
        let expected = momentum_spread_by_quadrature(f.density_pr, f.current_pr, 1.0, 1.0, span);
        let closed = momentum_spread_pr(&s).unwrap();
        assert!((closed - expected).abs() < 1e-9 * expected, "{s:?}: {closed} vs {expected}");
    }
}

#[test]
fn brute_force_reference_value() {
    let s = GaussianScenario::new(0.0, 1.0, 1.0, 0.5, 0.5);
    let f = closed_form_fields(&s).unwrap();
    let dp = momentum_spread_by_quadrature(f.density_pr, f.current_pr, 1.0, 1.0, 2.0);
    assert!((dp - 0.2f64.sqrt()).abs() < 1e-10);
}

#[test]
fn hbar_and_mass_scale_the_spread() {
    let s = GaussianScenario::new(0.0, 1.0, 1.0, 0.5, 0.5)
        .with_constants(qms_core::PhysicalConstants::new(2.0, 3.0).unwrap());
    let f = closed_form_fields(&s).unwrap();
    let expected = momentum_spread_by_quadrature(f.density_pr, f.current_pr, 2.0, 3.0, 2.0);
    assert!((momentum_spread_pr(&s).unwrap() - expected).abs() < 1e-9 * expected);
}

#[test]
fn positional_entropy_gain_by_quadrature() {
    for s in scenarios() {
        let f = closed_form_fields(&s).unwrap();
        let h = |c: GaussianCurve| {
            quad(c.center, c.variance.sqrt(), |x| {
                let r = c.eval(x);
                if r > 0.0 {
                    -r * r.ln()
                } else {
                    0.0
                }
            })
        };
        let expected = h(f.density_pr) - h(f.density_in);
        let closed = 0.5 * (1.0 + (s.sigma / s.alpha).powi(2)).ln();
        assert!((closed - expected).abs() < 1e-10, "{s:?}");
    }
}

fn packet(s: &GaussianScenario) -> RunConfig {
    RunConfig {
        state: Some(StateConfig {
            x0: s.x0,
            alpha: s.alpha,
            k: s.k,
        }),
        kernels: KernelConfig {
            sigma: s.sigma,
            lambda: s.lambda,
            ..KernelConfig::default()
        },
        ..RunConfig::default()
    }
}

#[test]
fn pipeline_matches_closed_form_parameters() {
    for s in scenarios() {
        let report = analyze(&packet(&s)).unwrap().report;
        let (cf_in, cf_pr) = closed_form_parameters(&s).unwrap();
        for (num, exact) in [(&report.intrinsic, &cf_in), (&report.prognosticated, &cf_pr)] {
            for label in ["x", "p"] {
                let (a, b) = (num.stddevs[label], exact.stddevs[label]);
                assert!((a - b).abs() < 1e-5 * b, "{s:?} {label}: {a} vs {b}");
                assert!((num.means[label] - exact.means[label]).abs() < 1e-8);
            }
        }
    }
}

/// `Ĥ` on a real Gaussian of variance `v` multiplies it by `a·x² + b`.
fn oscillator_by_quadrature(omega: f64, sigma2: f64) -> (f64, f64) {
    let alpha2 = 0.5 / omega;
    let v = alpha2 + sigma2;
    let a = -0.5 / (4.0 * v * v) + 0.5 * omega * omega;
    let b = 0.5 / (2.0 * v);
    let rho = GaussianCurve {
        amplitude: 1.0,
        center: 0.0,
        variance: v,
    };
    let mean = quad(0.0, v.sqrt(), |x| (a * x * x + b) * rho.eval(x));
    let spread = quad(0.0, v.sqrt(), |x| (a * x * x + b - mean).powi(2) * rho.eval(x));
    (mean, spread.sqrt())
}

#[test]
fn oscillator_closed_forms_by_quadrature() {
    for omega in [0.5, 1.0, 2.0] {
        for sigma2 in [0.0, 0.1, 0.5, 2.0f64] {
            let exact = oscillator_closed_forms(&OscillatorScenario::new(omega, sigma2.sqrt())).unwrap();
            let (mean, sd) = oscillator_by_quadrature(omega, sigma2);
            assert!((exact.mean_pr - mean).abs() < 1e-10, "omega {omega}, sigma2 {sigma2}");
            assert!((exact.stddev_pr - sd).abs() < 1e-9, "omega {omega}, sigma2 {sigma2}: {} vs {sd}", exact.stddev_pr);
        }
    }
}

#[test]
fn oscillator_pipeline() {
    for sigma2 in [0.1, 0.5] {
        let config = RunConfig {
            oscillator: Some(OscillatorConfig { omega: 1.0 }),
            kernels: KernelConfig {
                sigma: f64::sqrt(sigma2),
                ..KernelConfig::default()
            },
            ..RunConfig::default()
        };
        let p = analyze(&config).unwrap().report.prognosticated;
        let (mean, sd) = oscillator_by_quadrature(1.0, sigma2);
        assert!((p.means["H"] - mean).abs() < 1e-6 * mean);
        assert!((p.stddevs["H"] - sd).abs() < 1e-5 * sd);
    }
}
