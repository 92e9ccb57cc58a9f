//! Monte Carlo orchestration: configuration, trial records, resumable
//! JSON-lines output, aggregation and summaries.
//!
//! Output layout under `out`:
//!
//! * `<experiment>_<size>.jsonl`: a header line with the resolved config,
//!   then one record per trial, appended as trials finish;
//! * `<experiment>_<size>.csv`: the same records, flattened;
//! * `summary.json` / `summary.csv`: aggregates; a pure function of the
//!   config and seed, so they exclude timings and the worker count;
//! * `run.json`: worker count, build mode and wall-clock timings.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::census::{component_geometry, count_components, nodal_length};
use crate::error::{Error, Result};
use crate::exec::{is_parallel, map_trials};
use crate::experiments::{
    barrier_event_rate, barrier_verify, calibrate_max, ig_check, max_exceedance_rate,
    sharpness_field, stability_census, BarrierCheck, BarrierEventReport, SandwichCheck,
    StabilityParams, J0_MIN_SCALE,
};
use crate::field::{sample_trial, GridPlan};
use crate::lattice::{count_loops, sample_lattice_trial, Boundary, MODEL_LABEL};
use crate::rng::{trial_rng, Stream, GAUSSIAN_METHOD};
use crate::scaling::{planar_census_window, sample_plane_trial};
use crate::stats::{
    bootstrap_mean, dispersion_fit, mean, median, tail_curve, variance, DegreeSample,
    DispersionFit, Estimate, TailTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Estimate,
    Tails,
    Rwm,
    Bs,
    Barrier,
    Stability,
    Sharpness,
    IgCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Estimate => "estimate",
            Experiment::Tails => "tails",
            Experiment::Rwm => "rwm",
            Experiment::Bs => "bs",
            Experiment::Barrier => "barrier",
            Experiment::Stability => "stability",
            Experiment::Sharpness => "sharpness",
            Experiment::IgCheck => "ig-check",
        }
    }
}

/// Experiment-specific knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    /// Perturbation norm (sharpness, perturbation checks).
    pub rho: f64,
    /// Barrier circle scale: radius `barrier_rho/(n + ½)`.
    pub barrier_rho: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Stability disk radius in units of `1/n`.
    pub radius: f64,
    pub delta: f64,
    /// Perturbation threshold `εn²`.
    pub eps: f64,
    /// Tail thresholds.
    pub eps_grid: Vec<f64>,
    /// Plane waves per field.
    pub waves: usize,
    pub plane_radius: f64,
    /// Window margin around `D(R)` for the planar census.
    pub plane_margin: f64,
    pub spacing: f64,
    pub diameter_cut: f64,
    pub lattice_side: usize,
    pub boundary: Boundary,
    /// Sandwich radii in units of `1/n`.
    pub ig_scales: Vec<f64>,
    pub ig_centers: usize,
    pub calibration_degree: usize,
    pub calibration_trials: usize,
    /// Realized barrier events checked by census.
    pub loop_checks: usize,
    /// Per-component diameters in the estimate census.
    pub diameters: bool,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            rho: 0.05,
            barrier_rho: J0_MIN_SCALE,
            alpha: 0.05,
            beta: 0.05,
            radius: 10.0,
            delta: DEFAULT_DELTA,
            eps: 0.01,
            eps_grid: vec![0.0, 0.0025, 0.005, 0.01, 0.02],
            waves: crate::scaling::DEFAULT_WAVES,
            plane_radius: crate::scaling::DEFAULT_RADIUS,
            plane_margin: crate::scaling::DEFAULT_RADIUS,
            spacing: crate::scaling::DEFAULT_SPACING,
            diameter_cut: 2.0,
            lattice_side: 64,
            boundary: Boundary::Periodic,
            ig_scales: vec![5.0, 10.0, 20.0],
            ig_centers: 500,
            calibration_degree: 100,
            calibration_trials: 3000,
            loop_checks: 20,
            diameters: false,
        }
    }
}

/// Default unstable-fraction threshold: a field is exceptional when more
/// than 95% of its disks are unstable at R = 10.
pub const DEFAULT_DELTA: f64 = 0.0095;

/// Resolved run configuration. The worker count and output path are not
/// serialized: they must not change any result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub degrees: Vec<usize>,
    pub trials: usize,
    pub oversample: usize,
    pub seed: u64,
    pub params: Params,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        let degrees = match experiment {
            Experiment::Barrier => vec![50, 100, 200, 400],
            Experiment::Sharpness => vec![100],
            _ => vec![25, 50, 100, 200],
        };
        RunConfig {
            experiment,
            degrees,
            trials: 400,
            oversample: 8,
            seed: 0x5eed,
            params: Params::default(),
            workers: 1,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.oversample == 0 {
            return bad("oversample must be at least 1".into());
        }
        let needs_degrees = !matches!(self.experiment, Experiment::Rwm | Experiment::Bs);
        if needs_degrees && (self.degrees.is_empty() || self.degrees.contains(&0)) {
            return bad("degrees must be a nonempty list of positive integers".into());
        }
        let p = &self.params;
        match self.experiment {
            Experiment::Stability => StabilityParams {
                alpha: p.alpha,
                beta: p.beta,
                radius: p.radius,
                delta: p.delta.max(f64::MIN_POSITIVE),
            }
            .validate()?,
            Experiment::Sharpness if !(0.0..=0.2).contains(&p.rho) => {
                return bad(format!("rho {} outside [0, 0.2]", p.rho))
            }
            Experiment::Barrier if self.degrees.iter().any(|&n| n < 10) => {
                return bad("barrier degrees must be >= 10".into())
            }
            Experiment::Rwm if p.waves < 8 => return bad("waves must be >= 8".into()),
            Experiment::Bs if p.lattice_side < 4 => return bad("lattice side must be >= 4".into()),
            Experiment::Tails if self.trials < crate::stats::MIN_TAIL_RECORDS => {
                return Err(Error::InsufficientSamples {
                    needed: crate::stats::MIN_TAIL_RECORDS,
                    got: self.trials,
                })
            }
            _ => {}
        }
        Ok(())
    }

    /// The fields that determine trial contents (for resume compatibility).
    fn fingerprint(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("trials");
            m.remove("degrees");
        }
        v
    }
}

/// One Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord<T> {
    pub experiment: Experiment,
    /// Degree, wave count or lattice side.
    pub size: usize,
    pub trial: u64,
    pub seed: u64,
    pub elapsed_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default = "Option::default", skip_serializing_if = "Option::is_none")]
    pub data: Option<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    header: bool,
    config: RunConfig,
    gaussian: String,
}

fn records_path(out: &Path, experiment: Experiment, size: usize) -> PathBuf {
    out.join(format!("{}_{size}.jsonl", experiment.name()))
}

/// Reads a record file, dropping an incomplete final line left by a crash.
fn load_records<T: DeserializeOwned>(
    path: &Path,
) -> Result<(Option<RunConfig>, Vec<TrialRecord<T>>)> {
    if !path.exists() {
        return Ok((None, Vec::new()));
    }
    let text = fs::read_to_string(path)?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    if complete.len() != text.len() {
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(complete.len() as u64)?;
    }
    let mut config = None;
    let mut records = Vec::new();
    for line in complete.lines().filter(|l| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line)?;
        if v.get("header").is_some() {
            let h: Header = serde_json::from_value(v)?;
            config = Some(h.config);
        } else {
            records.push(serde_json::from_value(v)?);
        }
    }
    Ok((config, records))
}

/// Runs `trials` trials of one size, resuming from and appending to the
/// record file when `cfg.out` is set. Records come back sorted by index.
pub fn run_trials<T, F>(cfg: &RunConfig, size: usize, f: F) -> Result<Vec<TrialRecord<T>>>
where
    T: Serialize + DeserializeOwned + Send + Clone,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let mut done: BTreeMap<u64, TrialRecord<T>> = BTreeMap::new();
    let mut sink = None;
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out)?;
        let path = records_path(out, cfg.experiment, size);
        let (header, existing) = load_records::<T>(&path)?;
        if let Some(h) = &header {
            if h.fingerprint() != cfg.fingerprint() {
                return Err(Error::InvalidParameter(format!(
                    "{} was written with a different configuration",
                    path.display()
                )));
            }
        }
        for r in existing {
            if r.trial < cfg.trials as u64 {
                done.insert(r.trial, r);
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        if header.is_none() {
            let h = Header {
                header: true,
                config: cfg.clone(),
                gaussian: GAUSSIAN_METHOD.into(),
            };
            file.write_all(format!("{}\n", serde_json::to_string(&h)?).as_bytes())?;
        }
        sink = Some(file);
    }
    let todo: Vec<u64> = (0..cfg.trials as u64)
        .filter(|i| !done.contains_key(i))
        .collect();
    let chunk = (4 * cfg.workers.max(1)).max(8);
    for batch in todo.chunks(chunk) {
        let results = map_trials(batch, cfg.workers, |&i| {
            let start = Instant::now();
            let out = f(i);
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            let (data, error) = match out {
                Ok(d) => (Some(d), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TrialRecord {
                experiment: cfg.experiment,
                size,
                trial: i,
                seed: cfg.seed,
                elapsed_ms,
                error,
                data,
            }
        });
        for r in results {
            if let Some(e) = &r.error {
                eprintln!(
                    "{} size {} trial {}: excluded: {e}",
                    cfg.experiment.name(),
                    size,
                    r.trial
                );
            }
            if let Some(file) = sink.as_mut() {
                // one write per line keeps appends whole
                file.write_all(format!("{}\n", serde_json::to_string(&r)?).as_bytes())?;
            }
            done.insert(r.trial, r);
        }
        if let Some(file) = sink.as_mut() {
            file.flush()?;
        }
    }
    if let Some(out) = &cfg.out {
        write_csv(
            &out.join(format!("{}_{size}.csv", cfg.experiment.name())),
            done.values(),
        )?;
    }
    Ok(done.into_values().collect())
}

fn flatten(prefix: &str, v: &Value, row: &mut BTreeMap<String, String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, row);
            }
        }
        Value::Null => {
            row.insert(prefix.to_string(), String::new());
        }
        Value::String(s) => {
            row.insert(prefix.to_string(), s.clone());
        }
        other => {
            row.insert(prefix.to_string(), other.to_string());
        }
    }
}

/// Writes serializable rows as CSV, flattening nested objects to dotted keys.
pub fn write_csv<'a, T: Serialize + 'a>(
    path: &Path,
    rows: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let flat: Vec<BTreeMap<String, String>> = rows
        .into_iter()
        .map(|r| {
            let mut row = BTreeMap::new();
            flatten(
                "",
                &serde_json::to_value(r).expect("row serializes"),
                &mut row,
            );
            row
        })
        .collect();
    let columns: BTreeSet<&String> = flat.iter().flat_map(|r| r.keys()).collect();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(columns.iter().map(|c| c.as_str()))?;
    for r in &flat {
        w.write_record(
            columns
                .iter()
                .map(|c| r.get(*c).map(String::as_str).unwrap_or("")),
        )?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- sphere ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereTrial {
    pub norm: f64,
    pub n_loop: usize,
    pub n_dom: usize,
    pub n_dom_unflagged: usize,
    pub n_flagged: usize,
    pub euler_ok: bool,
    pub ambiguous_saddles: usize,
    pub min_area: f64,
    pub min_unflagged_area: f64,
    pub nodal_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_diameter: Option<f64>,
}

/// Sample, grid and census of one harmonic.
pub fn sphere_trial(
    plan: &GridPlan,
    seed: u64,
    index: u64,
    diameters: bool,
) -> Result<SphereTrial> {
    let n = plan.degree();
    let c = sample_trial(n, seed, index);
    let grid = plan.eval(&c)?;
    let mut census = count_components(&grid)?;
    if diameters {
        component_geometry(&grid, &mut census);
    }
    let r = &census.result;
    Ok(SphereTrial {
        norm: c.norm(),
        n_loop: r.n_loops,
        n_dom: r.n_domains,
        n_dom_unflagged: r.n_domains_unflagged,
        n_flagged: r.n_flagged,
        euler_ok: r.euler_ok,
        ambiguous_saddles: r.ambiguous_saddles,
        min_area: r.min_component_area,
        min_unflagged_area: r.min_unflagged_area,
        nodal_length: nodal_length(&grid),
        max_diameter: diameters.then(|| {
            r.components
                .iter()
                .filter_map(|c| c.diameter)
                .fold(0.0, f64::max)
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSummary {
    pub n: usize,
    pub trials: usize,
    pub failures: usize,
    /// Mean of `N_loop/n²` with bootstrap error.
    pub a_hat: Estimate,
    pub median: f64,
    pub var_loops: f64,
    /// Standard deviation of `N_loop/n²`.
    pub std_scaled: f64,
    pub dom_hat: f64,
    pub dom_unflagged_hat: f64,
    pub courant_violations: usize,
    pub euler_failures: usize,
    pub mean_ambiguous_saddles: f64,
    pub mean_flagged: f64,
    /// Smallest unflagged component area times `n²` over all trials.
    pub min_area_n2: f64,
    pub min_area_all_n2: f64,
    pub min_area_trial: u64,
    pub length_per_n: f64,
    pub max_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyGap {
    pub n: usize,
    pub m: usize,
    pub gap: f64,
    pub combined_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub degrees: Vec<DegreeSummary>,
    pub cauchy: Vec<CauchyGap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<DispersionFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tails: Option<TailTable>,
}

impl EstimateReport {
    pub fn degree(&self, n: usize) -> Option<&DegreeSummary> {
        self.degrees.iter().find(|d| d.n == n)
    }
}

/// Successful sphere trials per degree.
pub type SphereRecords = Vec<(usize, Vec<TrialRecord<SphereTrial>>)>;

pub fn collect_sphere(cfg: &RunConfig) -> Result<SphereRecords> {
    let mut all = Vec::new();
    for &n in &cfg.degrees {
        let plan = GridPlan::for_degree(n, cfg.oversample)?;
        let diameters = cfg.params.diameters;
        let recs = run_trials(cfg, n, |i| sphere_trial(&plan, cfg.seed, i, diameters))?;
        all.push((n, recs));
    }
    Ok(all)
}

pub fn summarize_degree(n: usize, recs: &[TrialRecord<SphereTrial>], seed: u64) -> DegreeSummary {
    let ok: Vec<&SphereTrial> = recs.iter().filter_map(|r| r.data.as_ref()).collect();
    let nn = (n * n) as f64;
    let scaled: Vec<f64> = ok.iter().map(|t| t.n_loop as f64 / nn).collect();
    let loops: Vec<f64> = ok.iter().map(|t| t.n_loop as f64).collect();
    let (min_area_trial, min_area) = recs
        .iter()
        .filter_map(|r| r.data.as_ref().map(|d| (r.trial, d.min_unflagged_area)))
        .fold(
            (0, f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
    let courant = (n + 1) * (n + 1);
    DegreeSummary {
        n,
        trials: recs.len(),
        failures: recs.len() - ok.len(),
        a_hat: bootstrap_mean(&scaled, seed, n as u64),
        median: median(&scaled),
        var_loops: variance(&loops),
        std_scaled: variance(&scaled).sqrt(),
        dom_hat: mean(&ok.iter().map(|t| t.n_dom as f64 / nn).collect::<Vec<_>>()),
        dom_unflagged_hat: mean(
            &ok.iter()
                .map(|t| t.n_dom_unflagged as f64 / nn)
                .collect::<Vec<_>>(),
        ),
        courant_violations: ok.iter().filter(|t| t.n_dom > courant).count(),
        euler_failures: ok.iter().filter(|t| !t.euler_ok).count(),
        mean_ambiguous_saddles: mean(
            &ok.iter()
                .map(|t| t.ambiguous_saddles as f64)
                .collect::<Vec<_>>(),
        ),
        mean_flagged: mean(&ok.iter().map(|t| t.n_flagged as f64).collect::<Vec<_>>()),
        min_area_n2: min_area * nn,
        min_area_all_n2: ok.iter().map(|t| t.min_area).fold(f64::INFINITY, f64::min) * nn,
        min_area_trial,
        length_per_n: mean(
            &ok.iter()
                .map(|t| t.nodal_length / n as f64)
                .collect::<Vec<_>>(),
        ),
        max_norm: ok.iter().map(|t| t.norm).fold(0.0, f64::max),
    }
}

/// Aggregates sphere records into the estimate report.
pub fn estimate_report(
    records: &SphereRecords,
    eps_grid: &[f64],
    seed: u64,
) -> Result<EstimateReport> {
    let degrees: Vec<DegreeSummary> = records
        .iter()
        .map(|(n, r)| summarize_degree(*n, r, seed))
        .collect();
    let mut cauchy = Vec::new();
    for w in degrees.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let gap = (a.a_hat.value - b.a_hat.value).abs();
        let combined_se = a.a_hat.se.hypot(b.a_hat.se);
        cauchy.push(CauchyGap {
            n: a.n,
            m: b.n,
            gap,
            combined_se,
            z: gap / combined_se,
        });
    }
    let loop_samples: Vec<(usize, Vec<f64>)> = records
        .iter()
        .map(|(n, r)| {
            (
                *n,
                r.iter()
                    .filter_map(|x| x.data.as_ref())
                    .map(|d| d.n_loop as f64)
                    .collect(),
            )
        })
        .collect();
    let dispersion = if loop_samples.len() >= 3 {
        Some(dispersion_fit(&loop_samples, seed)?)
    } else {
        None
    };
    let tail_samples: Vec<DegreeSample> = loop_samples
        .iter()
        .map(|(n, v)| DegreeSample {
            n: *n,
            values: v.iter().map(|x| x / (*n * *n) as f64).collect(),
        })
        .collect();
    let enough = tail_samples
        .iter()
        .all(|s| s.values.len() >= crate::stats::MIN_TAIL_RECORDS);
    let tails = if enough && !tail_samples.is_empty() {
        Some(tail_curve(&tail_samples, eps_grid, seed)?)
    } else {
        None
    };
    Ok(EstimateReport {
        degrees,
        cauchy,
        dispersion,
        tails,
    })
}

pub fn run_estimate(cfg: &RunConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    let records = collect_sphere(cfg)?;
    estimate_report(&records, &cfg.params.eps_grid, cfg.seed)
}

// ---------------------------------------------------------------- planar ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneTrial {
    pub n_star: usize,
    pub n_cross: usize,
    pub n_d: usize,
    pub n_anchored: usize,
    pub nu_star: f64,
    pub nu_anchored: f64,
    pub n_domains: usize,
    pub ambiguous_saddles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarReport {
    pub waves: usize,
    pub radius: f64,
    pub margin: f64,
    pub spacing: f64,
    pub trials: usize,
    pub failures: usize,
    /// Domain density from anchored counts.
    pub nu_hat: Estimate,
    /// `N_*/(πR²)`, biased low by loops cut by the disk boundary.
    pub nu_star: Estimate,
    pub four_pi_nu: f64,
    pub mean_n_star: f64,
    pub mean_n_cross: f64,
    pub mean_n_d: f64,
    pub sandwich_violations: usize,
}

pub fn plane_trial(cfg: &RunConfig, index: u64) -> Result<PlaneTrial> {
    let p = &cfg.params;
    let spec = sample_plane_trial(p.waves, cfg.seed, index)?;
    let c = planar_census_window(
        &spec,
        p.plane_radius,
        p.spacing,
        p.diameter_cut,
        p.plane_margin,
        crate::field::DEFAULT_CELL_BUDGET,
    )?;
    Ok(PlaneTrial {
        n_star: c.n_star,
        n_cross: c.n_cross,
        n_d: c.n_d,
        n_anchored: c.n_anchored,
        nu_star: c.nu_star,
        nu_anchored: c.nu_anchored,
        n_domains: c.census.n_domains,
        ambiguous_saddles: c.census.ambiguous_saddles,
    })
}

pub fn run_rwm(cfg: &RunConfig) -> Result<PlanarReport> {
    cfg.validate()?;
    let p = &cfg.params;
    let recs = run_trials(cfg, p.waves, |i| plane_trial(cfg, i))?;
    let ok: Vec<&PlaneTrial> = recs.iter().filter_map(|r| r.data.as_ref()).collect();
    let anchored: Vec<f64> = ok.iter().map(|t| t.nu_anchored).collect();
    let star: Vec<f64> = ok.iter().map(|t| t.nu_star).collect();
    let nu_hat = bootstrap_mean(&anchored, cfg.seed, p.waves as u64);
    Ok(PlanarReport {
        waves: p.waves,
        radius: p.plane_radius,
        margin: p.plane_margin,
        spacing: p.spacing,
        trials: recs.len(),
        failures: recs.len() - ok.len(),
        four_pi_nu: 4.0 * std::f64::consts::PI * nu_hat.value,
        nu_hat,
        nu_star: bootstrap_mean(&star, cfg.seed, p.waves as u64 + 1),
        mean_n_star: mean(&ok.iter().map(|t| t.n_star as f64).collect::<Vec<_>>()),
        mean_n_cross: mean(&ok.iter().map(|t| t.n_cross as f64).collect::<Vec<_>>()),
        mean_n_d: mean(&ok.iter().map(|t| t.n_d as f64).collect::<Vec<_>>()),
        sandwich_violations: ok.iter().filter(|t| t.n_star > t.n_cross).count(),
    })
}

// --------------------------------------------------------------- lattice ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeTrial {
    pub loops: usize,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    pub model: String,
    pub side: usize,
    pub boundary: Boundary,
    pub trials: usize,
    pub failures: usize,
    pub density: Estimate,
}

pub fn run_bs(cfg: &RunConfig) -> Result<LatticeReport> {
    cfg.validate()?;
    let p = &cfg.params;
    let recs = run_trials(cfg, p.lattice_side, |i| {
        let lat = sample_lattice_trial(p.lattice_side, p.boundary, cfg.seed, i)?;
        let loops = count_loops(&lat)?;
        Ok(LatticeTrial {
            loops,
            density: loops as f64 / (p.lattice_side * p.lattice_side) as f64,
        })
    })?;
    let d: Vec<f64> = recs
        .iter()
        .filter_map(|r| r.data.as_ref())
        .map(|t| t.density)
        .collect();
    Ok(LatticeReport {
        model: MODEL_LABEL.into(),
        side: p.lattice_side,
        boundary: p.boundary,
        trials: recs.len(),
        failures: recs.len() - d.len(),
        density: bootstrap_mean(&d, cfg.seed, p.lattice_side as u64),
    })
}

// ------------------------------------------------------------ experiments ---

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierDegree {
    pub check: BarrierCheck,
    pub max_exceedance: f64,
    pub events: BarrierEventReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub c0: f64,
    pub calibration_degree: usize,
    pub degrees: Vec<BarrierDegree>,
    /// `max c1_hat / min c1_hat - 1`.
    pub c1_spread: f64,
}

pub fn run_barrier(cfg: &RunConfig) -> Result<BarrierReport> {
    cfg.validate()?;
    let p = &cfg.params;
    let c0 = calibrate_max(
        p.calibration_degree,
        p.barrier_rho,
        p.calibration_trials,
        cfg.seed,
        cfg.workers,
    )?;
    let trials = cfg.trials.max(1000);
    let mut degrees = Vec::new();
    for &n in &cfg.degrees {
        let check = barrier_verify(n, p.barrier_rho)?;
        let max_exceedance = max_exceedance_rate(
            n,
            p.barrier_rho,
            c0,
            p.calibration_trials,
            cfg.seed,
            cfg.workers,
        );
        let events = barrier_event_rate(
            n,
            p.barrier_rho,
            c0,
            trials,
            cfg.seed,
            cfg.oversample,
            p.loop_checks,
            cfg.workers,
        )?;
        degrees.push(BarrierDegree {
            check,
            max_exceedance,
            events,
        });
    }
    let c1: Vec<f64> = degrees.iter().map(|d| d.check.c1_hat).collect();
    let hi = c1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = c1.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(BarrierReport {
        c0,
        calibration_degree: p.calibration_degree,
        degrees,
        c1_spread: hi / lo - 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityDegree {
    pub n: usize,
    pub trials: usize,
    pub mean_fraction: f64,
    pub std_fraction: f64,
    pub exceptional_rate: f64,
}

pub fn run_stability(cfg: &RunConfig) -> Result<Vec<StabilityDegree>> {
    cfg.validate()?;
    let p = &cfg.params;
    let sp = StabilityParams {
        alpha: p.alpha,
        beta: p.beta,
        radius: p.radius,
        delta: p.delta,
    };
    let mut out = Vec::new();
    for &n in &cfg.degrees {
        let plan = GridPlan::for_degree(n, cfg.oversample)?;
        let recs = run_trials(cfg, n, |i| {
            let grid = plan.eval_with_gradient(&sample_trial(n, cfg.seed, i))?;
            stability_census(&grid, n, &sp)
        })?;
        let ok: Vec<_> = recs.iter().filter_map(|r| r.data.as_ref()).collect();
        let fr: Vec<f64> = ok.iter().map(|o| o.fraction).collect();
        out.push(StabilityDegree {
            n,
            trials: recs.len(),
            mean_fraction: mean(&fr),
            std_fraction: variance(&fr).sqrt(),
            exceptional_rate: ok.iter().filter(|o| o.exceptional).count() as f64
                / ok.len().max(1) as f64,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessDegree {
    pub n: usize,
    pub rho: f64,
    pub trials: usize,
    pub min_loops: usize,
    pub max_loops: usize,
    pub max_scaled: f64,
    pub euler_failures: usize,
}

pub fn run_sharpness(cfg: &RunConfig) -> Result<Vec<SharpnessDegree>> {
    cfg.validate()?;
    let rho = cfg.params.rho;
    let mut out = Vec::new();
    for &n in &cfg.degrees {
        let plan = GridPlan::for_degree(n, cfg.oversample)?;
        let recs = run_trials(cfg, n, |i| {
            let mut rng = trial_rng(cfg.seed, Stream::Sharpness, n as u64, i);
            let c = sharpness_field(n, rho, &mut rng)?;
            let census = count_components(&plan.eval(&c)?)?;
            Ok(crate::experiments::SharpnessRecord {
                trial: i,
                n_loop: census.result.n_loops,
                n_dom: census.result.n_domains,
                euler_ok: census.result.euler_ok,
            })
        })?;
        let ok: Vec<_> = recs.iter().filter_map(|r| r.data.as_ref()).collect();
        let max_loops = ok.iter().map(|r| r.n_loop).max().unwrap_or(0);
        out.push(SharpnessDegree {
            n,
            rho,
            trials: recs.len(),
            min_loops: ok.iter().map(|r| r.n_loop).min().unwrap_or(0),
            max_loops,
            max_scaled: max_loops as f64 / (n * n) as f64,
            euler_failures: ok.iter().filter(|r| !r.euler_ok).count(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgDegree {
    pub n: usize,
    pub trials: usize,
    pub checks: usize,
    pub violations: usize,
    /// Mean `lower/N` and `upper/N` per radius scale.
    pub mean_lower_ratio: Vec<f64>,
    pub mean_upper_ratio: Vec<f64>,
}

pub fn run_ig_check(cfg: &RunConfig) -> Result<Vec<IgDegree>> {
    cfg.validate()?;
    let p = &cfg.params;
    let mut out = Vec::new();
    for &n in &cfg.degrees {
        let plan = GridPlan::for_degree(n, cfg.oversample)?;
        let recs = run_trials(cfg, n, |i| -> Result<Vec<SandwichCheck>> {
            ig_check(
                &sample_trial(n, cfg.seed, i),
                &plan,
                &p.ig_scales,
                p.ig_centers,
                cfg.seed,
                i,
            )
        })?;
        let ok: Vec<&Vec<SandwichCheck>> = recs.iter().filter_map(|r| r.data.as_ref()).collect();
        let ratio = |k: usize, lower: bool| {
            mean(
                &ok.iter()
                    .map(|c| {
                        let s = &c[k];
                        (if lower { s.lower } else { s.upper }) / s.n_loop.max(1) as f64
                    })
                    .collect::<Vec<_>>(),
            )
        };
        out.push(IgDegree {
            n,
            trials: recs.len(),
            checks: ok.iter().map(|c| c.len()).sum(),
            violations: ok
                .iter()
                .flat_map(|c| c.iter())
                .filter(|s| !s.holds)
                .count(),
            mean_lower_ratio: (0..p.ig_scales.len()).map(|k| ratio(k, true)).collect(),
            mean_upper_ratio: (0..p.ig_scales.len()).map(|k| ratio(k, false)).collect(),
        });
    }
    Ok(out)
}

// --------------------------------------------------------------- driver ---

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub config: RunConfig,
    pub gaussian: String,
    pub report: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub workers: usize,
    pub parallel_build: bool,
    pub out: Option<PathBuf>,
    pub elapsed_s: f64,
    pub config: RunConfig,
}

/// Runs the configured experiment and returns the summary as pretty JSON.
/// With an output directory, also writes `summary.json`, `summary.csv` and
/// `run.json`.
pub fn run(cfg: &RunConfig) -> Result<String> {
    cfg.validate()?;
    let start = Instant::now();
    let report = match cfg.experiment {
        Experiment::Estimate | Experiment::Tails => serde_json::to_value(run_estimate(cfg)?)?,
        Experiment::Rwm => serde_json::to_value(run_rwm(cfg)?)?,
        Experiment::Bs => serde_json::to_value(run_bs(cfg)?)?,
        Experiment::Barrier => serde_json::to_value(run_barrier(cfg)?)?,
        Experiment::Stability => serde_json::to_value(run_stability(cfg)?)?,
        Experiment::Sharpness => serde_json::to_value(run_sharpness(cfg)?)?,
        Experiment::IgCheck => serde_json::to_value(run_ig_check(cfg)?)?,
    };
    let summary = Summary {
        config: cfg.clone(),
        gaussian: GAUSSIAN_METHOD.into(),
        report,
    };
    let text = serde_json::to_string_pretty(&summary)?;
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("summary.json"), format!("{text}\n"))?;
        let rows: Vec<Value> = match &summary.report {
            Value::Object(m) if m.contains_key("degrees") => match &m["degrees"] {
                Value::Array(a) => a.clone(),
                _ => vec![summary.report.clone()],
            },
            Value::Array(a) => a.clone(),
            other => vec![other.clone()],
        };
        write_csv(&out.join("summary.csv"), rows.iter())?;
        let meta = RunMeta {
            workers: cfg.workers,
            parallel_build: is_parallel(),
            out: cfg.out.clone(),
            elapsed_s: start.elapsed().as_secs_f64(),
            config: cfg.clone(),
        };
        fs::write(
            out.join("run.json"),
            format!("{}\n", serde_json::to_string_pretty(&meta)?),
        )?;
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub records: usize,
    pub matched: usize,
    pub mismatched: Vec<u64>,
    pub skipped: usize,
}

/// Re-runs every record of a trial file and compares the stored data.
pub fn replay(path: &Path) -> Result<ReplayOutcome> {
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is empty", path.display())))??;
    let header: Header = serde_json::from_str(&first).map_err(|e| {
        Error::InvalidParameter(format!("{} has no config header: {e}", path.display()))
    })?;
    let mut cfg = header.config;
    cfg.out = None;
    cfg.workers = 1;
    let mut outcome = ReplayOutcome {
        records: 0,
        matched: 0,
        mismatched: Vec::new(),
        skipped: 0,
    };
    let mut plans: BTreeMap<usize, GridPlan> = BTreeMap::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrialRecord<Value> = serde_json::from_str(&line)?;
        outcome.records += 1;
        let Some(stored) = rec.data else {
            outcome.skipped += 1;
            continue;
        };
        cfg.seed = rec.seed;
        let n = rec.size;
        if cfg.experiment != Experiment::Rwm
            && cfg.experiment != Experiment::Bs
            && !plans.contains_key(&n)
        {
            plans.insert(n, GridPlan::for_degree(n, cfg.oversample)?);
        }
        let plan = |n: usize| -> Result<&GridPlan> {
            plans
                .get(&n)
                .ok_or(Error::InvalidParameter("no grid".into()))
        };
        let fresh = match cfg.experiment {
            Experiment::Estimate | Experiment::Tails => serde_json::to_value(sphere_trial(
                plan(n)?,
                cfg.seed,
                rec.trial,
                cfg.params.diameters,
            )?)?,
            Experiment::Rwm => serde_json::to_value(plane_trial(&cfg, rec.trial)?)?,
            Experiment::Bs => {
                let lat = sample_lattice_trial(n, cfg.params.boundary, cfg.seed, rec.trial)?;
                let loops = count_loops(&lat)?;
                serde_json::to_value(LatticeTrial {
                    loops,
                    density: loops as f64 / (n * n) as f64,
                })?
            }
            Experiment::Stability => {
                let p = &cfg.params;
                let sp = StabilityParams {
                    alpha: p.alpha,
                    beta: p.beta,
                    radius: p.radius,
                    delta: p.delta,
                };
                let grid = plan(n)?.eval_with_gradient(&sample_trial(n, cfg.seed, rec.trial))?;
                serde_json::to_value(stability_census(&grid, n, &sp)?)?
            }
            Experiment::Sharpness => {
                let mut rng = trial_rng(cfg.seed, Stream::Sharpness, n as u64, rec.trial);
                let c = sharpness_field(n, cfg.params.rho, &mut rng)?;
                let census = count_components(&plan(n)?.eval(&c)?)?;
                serde_json::to_value(crate::experiments::SharpnessRecord {
                    trial: rec.trial,
                    n_loop: census.result.n_loops,
                    n_dom: census.result.n_domains,
                    euler_ok: census.result.euler_ok,
                })?
            }
            Experiment::IgCheck => serde_json::to_value(ig_check(
                &sample_trial(n, cfg.seed, rec.trial),
                plan(n)?,
                &cfg.params.ig_scales,
                cfg.params.ig_centers,
                cfg.seed,
                rec.trial,
            )?)?,
            Experiment::Barrier => {
                outcome.skipped += 1;
                continue;
            }
        };
        if fresh == stored {
            outcome.matched += 1;
        } else {
            outcome.mismatched.push(rec.trial);
        }
    }
    Ok(outcome)
}
