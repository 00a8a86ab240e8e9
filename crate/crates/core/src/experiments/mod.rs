//! Configuration-driven experiment runs and verification suites.
//!
//! A run reads one TOML file, evaluates every grid point, and writes a CSV
//! table plus a JSON summary under fresh timestamped names.

mod config;
pub mod verify;

pub use config::{
    ConfigError, EventSpec, ExperimentConfig, ExperimentKind, FitSpec, GridSpec, MethodSpec, PhaseSpec, YUnit,
};

use crate::error::Result;
use crate::estimators::{
    confinement_probability, enumerate_exact, fit_exponent, localization_lower_bound, lower_bound_return_chain,
    naive_tail, splitting_tail, tilted_scenery_tail, ConfinementMethod, Event, ExponentFit, Functional,
    LocalizationParams, Method, TailEstimate, Transform,
};
use crate::exponents::{boundary_continuity, classify, PhasePoint, RegionTag};
use crate::green::green_constants;
use crate::lattice::local_times_streaming;
use crate::rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const CSV_COLUMNS: [&str; 7] = ["n", "y", "p_hat", "std_err", "log_p", "method", "seed"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub n: u64,
    pub y: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<TailEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<ExponentFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Whether the fitted exponent lies within the declared tolerance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub alpha: f64,
    pub beta: f64,
    pub d: usize,
    pub region: RegionTag,
    pub zeta: Option<f64>,
    pub formula: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRecord {
    pub lower: String,
    pub upper: String,
    pub beta: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub version: String,
    pub wall_clock_secs: f64,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<PointRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fits: Vec<FitRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exponents: Vec<ExponentRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boundaries: Vec<BoundaryRecord>,
}

impl ResultRecord {
    /// Whether every declared fit target was met.
    pub fn targets_met(&self) -> bool {
        self.fits.iter().all(|f| f.within != Some(false) && (f.target.is_none() || f.fit.is_some()))
    }

    pub fn failed_points(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// The result table as CSV text; identical records give identical bytes.
pub fn render_csv(record: &ResultRecord) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| crate::error::Error::Io(e.to_string());
    if record.config.kind == ExperimentKind::ExponentMap {
        w.write_record(["alpha", "beta", "d", "region", "zeta", "formula"]).map_err(io)?;
        for r in &record.exponents {
            let region = serde_json::to_value(r.region)?.as_str().unwrap_or_default().to_string();
            w.write_record([
                fmt_f64(r.alpha),
                fmt_f64(r.beta),
                r.d.to_string(),
                region,
                r.zeta.map(fmt_f64).unwrap_or_default(),
                r.formula.clone(),
            ])
            .map_err(io)?;
        }
    } else {
        w.write_record(CSV_COLUMNS).map_err(io)?;
        for p in &record.points {
            let (p_hat, se, log_p, method) = match &p.estimate {
                Some(e) => (fmt_f64(e.p_hat), fmt_f64(e.std_err), fmt_f64(e.log_p), e.method.as_str().to_string()),
                None => (String::new(), String::new(), String::new(), "failed".to_string()),
            };
            w.write_record([p.n.to_string(), fmt_f64(p.y), p_hat, se, log_p, method, p.seed.to_string()])
                .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `y0_silt` for the dimension, from the Green kernel.
pub fn y0_silt(d: usize) -> Result<f64> {
    Ok(green_constants(d, 8, 1e-10)?.y0_silt)
}

fn estimate_point(cfg: &ExperimentConfig, n: u64, y: f64, seed: u64) -> Result<TailEstimate> {
    let grid = cfg.grid.as_ref().expect("validated");
    let event = cfg.event.as_ref().expect("validated");
    let method = cfg.method.as_ref().expect("validated");
    let (d, replicas) = (grid.d, grid.replicas);
    let scenery = || cfg.scenery.clone().expect("validated");
    Ok(match method {
        MethodSpec::Naive => {
            let ev = match event {
                EventSpec::Silt { p, gamma } => Event::Silt { p: *p, gamma: *gamma, y },
                EventSpec::Rwrs { beta } => Event::Rwrs { beta: *beta, y, scenery: scenery() },
                EventSpec::LevelSet { b_low, b_high } => Event::LevelSet {
                    b_low: *b_low,
                    b_high: *b_high,
                    min_size: y.ceil() as u64,
                },
                EventSpec::Confinement { r } => Event::Confinement { r: *r, t: n },
                EventSpec::Functional { functional } => Event::Functional {
                    functional: functional.clone(),
                    threshold: y.ceil() as u64,
                },
            };
            naive_tail(&ev, d, n, replicas, seed)?
        }
        MethodSpec::Enumeration => {
            let (functional, threshold) = match event {
                EventSpec::Functional { functional } => (functional.clone(), y.ceil() as u64),
                EventSpec::Silt { p, gamma } => {
                    (Functional::SiltP { p: *p as u32 }, ((n as f64).powf(*gamma) * y).ceil() as u64)
                }
                _ => unreachable!("validated"),
            };
            let law = enumerate_exact(d, n as usize, functional)?;
            TailEstimate::exact(law.tail(threshold), Method::Enumeration)
        }
        MethodSpec::TiltedScenery(params) => {
            let EventSpec::Rwrs { beta } = event else { unreachable!("validated") };
            let walks = (0..replicas)
                .map(|i| local_times_streaming(d, n, rng::derive_seed(seed, i)))
                .collect::<Result<Vec<_>>>()?;
            tilted_scenery_tail(&walks, &scenery(), *beta, y, params, rng::derive_seed(seed, u64::MAX))?
        }
        MethodSpec::Splitting(params) => splitting_tail(d, n as usize, y, params, seed)?,
        MethodSpec::ReturnChain => lower_bound_return_chain(d, n, y, replicas, seed)?,
        MethodSpec::Localization { epsilon, smc } => {
            let EventSpec::Rwrs { beta } = event else { unreachable!("validated") };
            let model = scenery();
            let point = PhasePoint::new(model.tail_exponent(), *beta, d);
            let params = LocalizationParams { epsilon: *epsilon, y, smc: smc.clone() };
            localization_lower_bound(point, n, &model, &params, seed)?
        }
        MethodSpec::Smc(params) => {
            let EventSpec::Confinement { r } = event else { unreachable!("validated") };
            confinement_probability(d, *r, n, &ConfinementMethod::Mc(params.clone()), seed)?
        }
        MethodSpec::ExactSpectral => {
            let EventSpec::Confinement { r } = event else { unreachable!("validated") };
            confinement_probability(d, *r, n, &ConfinementMethod::ExactSpectral, seed)?
        }
    })
}

fn transform_of(fit: &FitSpec) -> Transform {
    match fit.transform.as_str() {
        "log-vs-sqrt-n" => Transform::LogVsSqrtN,
        "log-vs-n-zeta" => Transform::LogVsNZeta { zeta: fit.zeta.unwrap_or(1.0) },
        _ => Transform::LogLog,
    }
}

fn run_tail(cfg: &ExperimentConfig) -> Result<(Vec<PointRecord>, Vec<FitRecord>)> {
    let grid = cfg.grid.as_ref().expect("validated");
    let scale = match grid.y_unit {
        YUnit::Absolute => 1.0,
        YUnit::Y0Silt => y0_silt(grid.d)?,
    };
    let jobs: Vec<(u64, f64)> = grid
        .y
        .iter()
        .flat_map(|&y| grid.n.iter().map(move |&n| (n, y * scale)))
        .collect();
    let points: Vec<PointRecord> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, &(n, y))| {
            let seed = rng::derive_seed(cfg.seed, i as u64);
            match estimate_point(cfg, n, y, seed) {
                Ok(e) => PointRecord { n, y, seed, estimate: Some(e), error: None },
                Err(e) => PointRecord { n, y, seed, estimate: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let mut fits = Vec::new();
    if let Some(fit_cfg) = &cfg.fit {
        for (k, &y) in grid.y.iter().enumerate() {
            let row = &points[k * grid.n.len()..(k + 1) * grid.n.len()];
            let data: Option<Vec<(f64, f64)>> = row
                .iter()
                .map(|p| p.estimate.as_ref().map(|e| (p.n as f64, e.log_p)))
                .collect();
            let fit = match data {
                Some(d) => fit_exponent(&d, transform_of(fit_cfg)),
                None => Err(crate::error::Error::BadFit("a grid point failed".into())),
            };
            let (fit, error) = match fit {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let within = match (&fit, fit_cfg.target, fit_cfg.tolerance) {
                (Some(f), Some(t), Some(tol)) => Some((f.zeta_hat.unwrap_or(f.c_hat) - t).abs() <= tol),
                (None, Some(_), _) => Some(false),
                _ => None,
            };
            fits.push(FitRecord {
                y: y * scale,
                fit,
                error,
                target: fit_cfg.target,
                tolerance: fit_cfg.tolerance,
                within,
            });
        }
    }
    Ok((points, fits))
}

fn run_exponent_map(cfg: &ExperimentConfig) -> (Vec<ExponentRow>, Vec<BoundaryRecord>) {
    let phase = cfg.phase.as_ref().expect("validated");
    let rows = phase
        .beta
        .iter()
        .map(|&beta| {
            let r = classify(PhasePoint::new(phase.alpha, beta, phase.d));
            ExponentRow {
                alpha: phase.alpha,
                beta,
                d: phase.d,
                region: r.region,
                zeta: r.zeta,
                formula: r.formula,
            }
        })
        .collect();
    let bounds = boundary_continuity(phase.d, phase.alpha)
        .into_iter()
        .map(|b| BoundaryRecord {
            lower: format!("{:?}", b.lower),
            upper: format!("{:?}", b.upper),
            beta: b.beta,
            gap: b.gap(),
        })
        .collect();
    (rows, bounds)
}

/// Evaluates the configuration without touching the file system.
pub fn execute(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let start = Instant::now();
    let mut record = ResultRecord {
        config_hash: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_secs: 0.0,
        config: cfg.clone(),
        points: vec![],
        fits: vec![],
        exponents: vec![],
        boundaries: vec![],
    };
    match cfg.kind {
        ExperimentKind::ExponentMap => {
            let (rows, bounds) = run_exponent_map(cfg);
            record.exponents = rows;
            record.boundaries = bounds;
        }
        ExperimentKind::Tail => {
            let (points, fits) = run_tail(cfg)?;
            record.points = points;
            record.fits = fits;
        }
    }
    record.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(record)
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: ResultRecord,
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// Creates `stem.ext` files that do not exist yet, bumping the stamp on
/// collision.
fn fresh_files(dir: &Path, prefix: &str) -> Result<(PathBuf, File, PathBuf, File)> {
    let mut stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    loop {
        let csv = dir.join(format!("{prefix}-{stamp}.csv"));
        let json = dir.join(format!("{prefix}-{stamp}.json"));
        let open = |p: &Path| OpenOptions::new().write(true).create_new(true).open(p);
        match open(&csv) {
            Ok(c) => match open(&json) {
                Ok(j) => return Ok((csv, c, json, j)),
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    std::fs::remove_file(&csv)?;
                }
                Err(e) => return Err(e.into()),
            },
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {}
            Err(e) => return Err(e.into()),
        }
        stamp += 1;
    }
}

/// Runs the configuration and writes new result files under `out_dir`
/// (default: the configured output directory, else `results`).
pub fn run(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    let record = execute(cfg)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&dir)?;
    let prefix = format!("{}-{}", cfg.kind.as_str(), &record.config_hash[..12]);
    let (csv, mut c, json, mut j) = fresh_files(&dir, &prefix)?;
    c.write_all(render_csv(&record)?.as_bytes())?;
    j.write_all(serde_json::to_string_pretty(&record)?.as_bytes())?;
    Ok(RunOutput { record, csv, json })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SILT: &str = r#"
kind = "tail"
seed = 11

[grid]
d = 3
n = [20, 40]
y = [2.0, 2.5]
replicas = 2000

[event]
kind = "silt"

[method]
kind = "naive"
"#;

    #[test]
    fn tail_grid_runs_and_is_deterministic() {
        let cfg = ExperimentConfig::from_toml(SILT).unwrap();
        let a = execute(&cfg).unwrap();
        let b = execute(&cfg).unwrap();
        assert_eq!(a.points.len(), 4);
        assert_eq!(render_csv(&a).unwrap(), render_csv(&b).unwrap());
        let csv = render_csv(&a).unwrap();
        assert!(csv.starts_with("n,y,p_hat,std_err,log_p,method,seed\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn failed_points_are_recorded() {
        let text = SILT.replace("kind = \"naive\"", "kind = \"splitting\"\nparticles = 20\nruns = 2").replace("y = [2.0, 2.5]", "y = [100.0]");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let r = execute(&cfg).unwrap();
        assert_eq!(r.failed_points(), 2);
        assert!(render_csv(&r).unwrap().contains(",failed,"));
    }

    #[test]
    fn exponent_map_table() {
        let cfg = ExperimentConfig::from_toml(
            "kind = \"exponent-map\"\nseed = 1\n[phase]\nalpha = 4.0\nd = 5\nbeta = [0.6, 0.8, 1.0, 1.1]\n",
        )
        .unwrap();
        let r = execute(&cfg).unwrap();
        assert_eq!(r.exponents.len(), 4);
        assert_eq!(r.exponents[2].region, RegionTag::III);
        assert!(r.boundaries.iter().all(|b| b.gap < 1e-12));
        assert!(render_csv(&r).unwrap().starts_with("alpha,beta,d,region,zeta,formula\n"));
    }

    #[test]
    fn runs_write_new_files() {
        let dir = std::env::temp_dir().join(format!("rwrs-run-{}", std::process::id()));
        let cfg = ExperimentConfig::from_toml(&SILT.replace("replicas = 2000", "replicas = 100")).unwrap();
        let a = run(&cfg, Some(&dir)).unwrap();
        let b = run(&cfg, Some(&dir)).unwrap();
        assert_ne!(a.csv, b.csv);
        assert_eq!(std::fs::read(&a.csv).unwrap(), std::fs::read(&b.csv).unwrap());
        let json: ResultRecord = serde_json::from_slice(&std::fs::read(&a.json).unwrap()).unwrap();
        assert_eq!(json.config_hash, a.record.config_hash);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
