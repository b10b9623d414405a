use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use qms_core::pipeline::{
    self, format_summary, OscillatorConfig, RunConfig, RunReport, StateConfig, SweepAxis,
};
use qms_core::verify::{self, VerifyOptions};

/// Measurement as statistical sampling: intrinsic vs recorded parameters of a
/// Gaussian packet or oscillator ground state.
///
/// Settings resolve as built-in defaults, then the --config file, then flags.
/// The output directory is --out, else the config's output.dir, else
/// QMS_OUT_DIR.
#[derive(Parser, Debug)]
#[command(name = "qms", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// IN and PR parameters, error and entropic indicators.
    Analyze(RunArgs),
    /// As analyze, plus seeded FR records of x and p.
    Sample(RunArgs),
    /// One analysis per value of a single parameter, as CSV.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// sigma, lambda, k or n
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 0,0.5,1
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
    /// Density and current curves (IN, PR and closed forms) as CSV.
    Curves(RunArgs),
    /// Run the acceptance suite; exits nonzero if any criterion fails.
    Verify {
        /// Scale the density kernel of the transform check (self-test of the
        /// suite).
        #[arg(long, default_value_t = 1.0, hide = true)]
        inject_kernel_scale: f64,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    /// Use the oscillator ground state with this frequency
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Tabulated density kernel CSV (offset,value)
    #[arg(long)]
    density_kernel: Option<PathBuf>,
    /// Tabulated current kernel CSV (offset,value)
    #[arg(long)]
    current_kernel: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    hbar: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mass: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    span_mult: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: config output.dir, then $QMS_OUT_DIR]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the text table
    #[arg(long)]
    json: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if self.omega.is_some() && (self.alpha.is_some() || self.k.is_some() || self.x0.is_some()) {
            bail!("--omega selects the oscillator ground state; drop --alpha, --k and --x0");
        }
        if let Some(omega) = self.omega {
            c.state = None;
            c.oscillator = Some(OscillatorConfig { omega });
        }
        if self.alpha.is_some() || self.k.is_some() || self.x0.is_some() {
            c.oscillator = None;
            let s = c.state.get_or_insert_with(StateConfig::default);
            s.x0 = self.x0.unwrap_or(s.x0);
            s.alpha = self.alpha.unwrap_or(s.alpha);
            s.k = self.k.unwrap_or(s.k);
        }
        if c.state.is_none() && c.oscillator.is_none() {
            c.state = Some(StateConfig::default());
        }
        let set = |slot: &mut f64, v: Option<f64>| *slot = v.unwrap_or(*slot);
        set(&mut c.kernels.sigma, self.sigma);
        set(&mut c.kernels.lambda, self.lambda);
        set(&mut c.constants.hbar, self.hbar);
        set(&mut c.constants.mass, self.mass);
        set(&mut c.grid.span_mult, self.span_mult);
        if let Some(path) = &self.density_kernel {
            c.kernels.density_file = Some(path.clone());
        }
        if let Some(path) = &self.current_kernel {
            c.kernels.current_file = Some(path.clone());
        }
        c.grid.n_points = self.grid_points.unwrap_or(c.grid.n_points);
        c.sampling.n = self.samples.unwrap_or(c.sampling.n);
        c.sampling.seed = self.seed.unwrap_or(c.sampling.seed);
        c.validate()?;
        Ok(c)
    }

    fn out_dir(&self, config: &RunConfig) -> Option<PathBuf> {
        self.out
            .clone()
            .or_else(|| config.output.dir.clone())
            .or_else(|| std::env::var_os("QMS_OUT_DIR").filter(|v| !v.is_empty()).map(PathBuf::from))
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn emit_report(report: &RunReport, args: &RunArgs, out: Option<&Path>) -> Result<()> {
    let json = report.to_json();
    if let Some(dir) = out {
        let mut w = create(dir, "report.json")?;
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    let mut stdout = io::stdout().lock();
    if args.json {
        writeln!(stdout, "{json}")?;
    } else {
        write!(stdout, "{}", format_summary(report))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze(args) => {
            let mut config = args.resolve()?;
            let out = args.out_dir(&config);
            config.output.dir = out.clone();
            let analysis = pipeline::analyze(&config)?;
            emit_report(&analysis.report, &args, out.as_deref())?;
        }
        Command::Sample(args) => {
            let mut config = args.resolve()?;
            let out = args.out_dir(&config);
            config.output.dir = out.clone();
            let run = pipeline::sample(&config)?;
            if let Some(dir) = &out {
                for s in &run.samples {
                    let mut w = create(dir, &format!("samples_{}.csv", s.label))?;
                    s.write_csv(&mut w)?;
                    w.flush()?;
                }
            }
            emit_report(&run.analysis.report, &args, out.as_deref())?;
        }
        Command::Sweep { run, axis, values } => {
            let axis: SweepAxis = axis.parse()?;
            if values.len() < 2 {
                bail!("a sweep needs at least two values");
            }
            let mut config = run.resolve()?;
            let out = run.out_dir(&config);
            config.output.dir = out.clone();
            let rows = pipeline::sweep(&config, axis, &values)?;
            match &out {
                Some(dir) => {
                    let mut w = create(dir, &format!("sweep_{axis}.csv"))?;
                    pipeline::write_sweep_csv(&rows, &mut w)?;
                    w.flush()?;
                }
                None => pipeline::write_sweep_csv(&rows, io::stdout().lock())?,
            }
            for row in rows.iter().filter(|r| r.status != "ok") {
                eprintln!("skipped {axis}={}: {}", row.value, row.error);
            }
        }
        Command::Curves(args) => {
            let mut config = args.resolve()?;
            let Some(dir) = args.out_dir(&config) else {
                bail!("curves writes files: pass --out DIR or set QMS_OUT_DIR");
            };
            config.output.dir = Some(dir.clone());
            let curves = pipeline::curves(&config)?;
            for (name, rows) in [("density.csv", &curves.density), ("current.csv", &curves.current)] {
                let mut w = create(&dir, name)?;
                pipeline::write_curve_csv(rows, &mut w)?;
                w.flush()?;
            }
            println!("wrote {} and {}", dir.join("density.csv").display(), dir.join("current.csv").display());
        }
        Command::Verify { inject_kernel_scale } => {
            let outcomes = verify::run_all(&VerifyOptions {
                kernel_scale: inject_kernel_scale,
            });
            let mut stdout = io::stdout().lock();
            for o in &outcomes {
                writeln!(stdout, "{o}")?;
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            writeln!(stdout, "{} of {} criteria passed", outcomes.len() - failed, outcomes.len())?;
            if failed > 0 {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim_end().to_string()),
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            let kind = err.downcast_ref::<qms_core::Error>().map_or("usage", |e| e.kind());
            fail(kind, format!("{err:#}"))
        }
    }
}
