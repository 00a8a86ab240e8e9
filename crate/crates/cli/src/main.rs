use clap::{Args, Parser, Subcommand, ValueEnum};
use rwrs_core::estimators::{Functional, SmcParams, SplittingParams, TiltedParams};
use rwrs_core::experiments::verify::{verify, Suite};
use rwrs_core::experiments::{
    self, EventSpec, ExperimentConfig, ExperimentKind, GridSpec, MethodSpec, YUnit,
};
use rwrs_core::exponents::{classify, PhasePoint};
use rwrs_core::green::green_constants;
use rwrs_core::lattice::{local_times, simulate_walk};
use rwrs_core::scenery::{rwrs_value, SceneryFamily, SceneryField, SceneryModel};
use rwrs_core::silt::{coincidence_pairs, dyadic_decompose, silt};
use rwrs_core::Error;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

const WORKERS_VAR: &str = "RWRS_WORKERS";

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

/// Random walk in random scenery: exponents, simulation and estimators.
#[derive(Parser)]
#[command(name = "rwrs", version, after_help = "Set RWRS_WORKERS to fix the worker count.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a phase point and print its deviation exponent.
    Exponent {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        d: usize,
    },
    /// Simulate one walk and print its local time statistics.
    Simulate {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also evaluate the dyadic decomposition at this level (n = 2^N).
        #[arg(long)]
        dyadic_b: Option<f64>,
        #[command(flatten)]
        scenery: SceneryArgs,
    },
    /// Estimate one tail probability.
    Estimate(EstimateArgs),
    /// Green kernel constants.
    Green {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        radius: u32,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Run a verification suite; exits 1 when a check fails.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
    },
    /// Run an experiment configuration file.
    Run {
        config: PathBuf,
        /// Output directory, overriding the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Weibull,
    Gaussian,
    Bounded,
    ExpPower,
}

#[derive(Args)]
struct SceneryArgs {
    #[arg(long, value_enum)]
    family: Option<Family>,
    /// Tail exponent of the Weibull and exp-power families.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
}

impl SceneryArgs {
    fn model(&self) -> Option<SceneryModel> {
        let family = match self.family? {
            Family::Weibull => SceneryFamily::SymmetricWeibull,
            Family::Gaussian => SceneryFamily::Gaussian,
            Family::Bounded => SceneryFamily::SymmetricBounded,
            Family::ExpPower => SceneryFamily::ExpPower,
        };
        Some(SceneryModel {
            family,
            alpha: self.alpha,
            c: self.c,
            variance: self.variance,
            seed_base: 0,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EventKind {
    Silt,
    Rwrs,
    LevelSet,
    Confinement,
    Range,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodKind {
    Naive,
    Enumeration,
    TiltedScenery,
    Splitting,
    ReturnChain,
    Localization,
    Smc,
    ExactSpectral,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    event: EventKind,
    #[arg(long, value_enum, default_value = "naive")]
    method: MethodKind,
    #[arg(long)]
    d: usize,
    /// Walk length; the horizon T for confinement.
    #[arg(long)]
    n: u64,
    /// Level: `y` in `n^gamma y` or `n^beta y`, or the minimal count.
    #[arg(long, default_value_t = 0.0)]
    y: f64,
    #[arg(long, value_enum, default_value = "absolute")]
    y_unit: Unit,
    #[arg(long, default_value_t = 10_000)]
    replicas: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    b_low: f64,
    #[arg(long, default_value_t = 1.0)]
    b_high: f64,
    /// Box side for confinement.
    #[arg(long, default_value_t = 5)]
    r: u32,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long)]
    draws_per_walk: Option<u64>,
    #[command(flatten)]
    scenery: SceneryArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    Absolute,
    Y0Silt,
}

impl EstimateArgs {
    fn config(&self) -> ExperimentConfig {
        let event = match self.event {
            EventKind::Silt => EventSpec::Silt { p: self.p, gamma: self.gamma },
            EventKind::Rwrs => EventSpec::Rwrs { beta: self.beta },
            EventKind::LevelSet => EventSpec::LevelSet { b_low: self.b_low, b_high: self.b_high },
            EventKind::Confinement => EventSpec::Confinement { r: self.r },
            EventKind::Range => EventSpec::Functional { functional: Functional::Range },
        };
        let smc = || {
            let mut s = SmcParams::default();
            s.particles = self.particles.unwrap_or(s.particles);
            s.runs = self.runs.unwrap_or(s.runs);
            s
        };
        let method = match self.method {
            MethodKind::Naive => MethodSpec::Naive,
            MethodKind::Enumeration => MethodSpec::Enumeration,
            MethodKind::TiltedScenery => {
                let mut t = TiltedParams::default();
                t.draws_per_walk = self.draws_per_walk.unwrap_or(t.draws_per_walk);
                MethodSpec::TiltedScenery(t)
            }
            MethodKind::Splitting => {
                let mut s = SplittingParams::default();
                s.particles = self.particles.unwrap_or(s.particles);
                s.runs = self.runs.unwrap_or(s.runs);
                MethodSpec::Splitting(s)
            }
            MethodKind::ReturnChain => MethodSpec::ReturnChain,
            MethodKind::Localization => MethodSpec::Localization { epsilon: self.epsilon, smc: smc() },
            MethodKind::Smc => MethodSpec::Smc(smc()),
            MethodKind::ExactSpectral => MethodSpec::ExactSpectral,
        };
        ExperimentConfig {
            kind: ExperimentKind::Tail,
            seed: self.seed,
            output: None,
            phase: None,
            grid: Some(GridSpec {
                d: self.d,
                n: vec![self.n],
                y: vec![self.y],
                y_unit: match self.y_unit {
                    Unit::Absolute => YUnit::Absolute,
                    Unit::Y0Silt => YUnit::Y0Silt,
                },
                replicas: self.replicas,
            }),
            event: Some(event),
            scenery: self.scenery.model(),
            method: Some(method),
            fit: None,
        }
    }
}

fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidDimension(_)
            | Error::UnsupportedDimension { .. }
            | Error::InvalidParameter { .. }
            | Error::NotDyadic(_)
            | Error::EnumerationTooLarge { .. }
    )
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if is_input_error(&e) { EXIT_CONFIG } else { EXIT_FAIL })
}

fn print(v: &impl serde::Serialize) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v).expect("serializable output");
    // A closed pipe on stdout is not an error for a report printer.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn configure_workers() -> Result<(), String> {
    let Ok(raw) = std::env::var(WORKERS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{WORKERS_VAR} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn simulate(d: usize, n: usize, seed: u64, dyadic_b: Option<f64>, scenery: &SceneryArgs) -> Result<serde_json::Value, Error> {
    let t = simulate_walk(d, n, seed)?;
    let f = local_times(&t);
    let mut out = json!({
        "d": d,
        "n": n,
        "seed": seed,
        "endpoint": t.path().last().map(|s| s.coords().to_vec()),
        "range": f.support_size(),
        "silt": silt(&f),
        "coincidence_pairs": coincidence_pairs(&f),
        "max_local_time": f.max_count(),
        "origin_local_time": f.get(&rwrs_core::lattice::Site::origin(d)),
    });
    if let Some(model) = scenery.model() {
        let model = model.with_seed(seed).validated()?;
        out["x_n"] = json!(rwrs_value(&f, &SceneryField::new(model)));
    }
    if let Some(b) = dyadic_b {
        let dec = dyadic_decompose(&t, b)?;
        let checks = dec.checks();
        out["dyadic"] = json!({
            "b": b,
            "z0": dec.z0,
            "z1": dec.z1,
            "j1": dec.j1,
            "inequality": checks.inequality,
            "strand_identity": checks.strand_identity,
            "z1_quarter_bound": checks.z1_quarter_bound,
        });
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    match cli.command {
        Command::Exponent { alpha, beta, d } => {
            let r = classify(PhasePoint::new(alpha, beta, d));
            print(&json!({
                "region": r.region,
                "adjacent": r.adjacent,
                "zeta": r.zeta,
                "needs_y0": r.needs_y0,
                "formula": r.formula,
                "notes": r.notes,
            }));
            ExitCode::SUCCESS
        }
        Command::Simulate { d, n, seed, dyadic_b, scenery } => match simulate(d, n, seed, dyadic_b, &scenery) {
            Ok(v) => {
                print(&v);
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Estimate(args) => {
            let cfg = args.config();
            if let Err(e) = cfg.validate() {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            match experiments::execute(&cfg) {
                Ok(record) => {
                    let point = &record.points[0];
                    match (&point.estimate, &point.error) {
                        (Some(e), _) => {
                            print(e);
                            ExitCode::SUCCESS
                        }
                        (None, err) => {
                            eprintln!("error: {}", err.as_deref().unwrap_or("estimation failed"));
                            ExitCode::from(EXIT_FAIL)
                        }
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Green { d, radius, tol } => match green_constants(d, radius, tol) {
            Ok(c) => {
                print(&c);
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Verify { suite, seed } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let report = verify(suite, seed);
            for c in &report.checks {
                eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            print(&report);
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Command::Run { config, out } => {
            let cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match experiments::run(&cfg, out.as_deref()) {
                Ok(o) => {
                    print(&json!({
                        "csv": o.csv,
                        "json": o.json,
                        "config_hash": o.record.config_hash,
                        "failed_points": o.record.failed_points(),
                        "fits": o.record.fits,
                        "targets_met": o.record.targets_met(),
                    }));
                    if o.record.targets_met() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_FAIL)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
