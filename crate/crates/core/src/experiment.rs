//! Batch driver: runs every `(variant, seed)` pair, writes one CSV per run,
//! a `summary.csv`, two comparison plots and the resolved configuration.
//!
//! Output layout under the experiment directory:
//!
//! ```text
//! resolved_config
//! summary.csv
//! alive.svg
//! packets.svg
//! runs/<VARIANT>_seed<N>.csv
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentSpec};
use crate::engine::{run_simulation, RoundMetrics, RunSummary};
use crate::plot::{LineChart, Series, PALETTE};
use crate::protocol::{ProtocolKind, Variant};

pub const CSV_HEADER: &str = "round,alive,dead,ch_count,packets_to_bs_cum,packets_to_ch_cum,total_residual_energy_j";
pub const RUNS_DIR: &str = "runs";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config";
pub const ALIVE_PLOT: &str = "alive.svg";
pub const PACKETS_PLOT: &str = "packets.svg";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    BadCsv { path: PathBuf, line: usize, message: String },
    #[error("no run CSVs found in {0}")]
    NoRuns(PathBuf),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl ExperimentError {
    /// Process exit code: 1 for configuration problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// Per-run metrics as CSV. Floats use Rust's shortest round-trip formatting.
pub fn metrics_csv(metrics: &[RoundMetrics]) -> String {
    let mut out = String::with_capacity(64 * (metrics.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for m in metrics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.round, m.alive, m.dead, m.ch_count, m.packets_to_bs_cum, m.packets_to_ch_cum, m.total_residual_energy
        );
    }
    out
}

pub fn parse_metrics_csv(path: &Path, text: &str) -> Result<Vec<RoundMetrics>, ExperimentError> {
    let bad = |line: usize, message: String| ExperimentError::BadCsv { path: path.to_path_buf(), line, message };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => return Err(bad(1, "unexpected header".into())),
    }
    let mut out = Vec::new();
    for (i, row) in lines.enumerate() {
        let line = i + 2;
        if row.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != 7 {
            return Err(bad(line, format!("expected 7 fields, got {}", cells.len())));
        }
        let int = |j: usize| cells[j].parse::<u64>().map_err(|e| bad(line, format!("field {}: {e}", j + 1)));
        out.push(RoundMetrics {
            round: int(0)?,
            alive: int(1)? as usize,
            dead: int(2)? as usize,
            ch_count: int(3)? as usize,
            packets_to_bs_cum: int(4)?,
            packets_to_ch_cum: int(5)?,
            total_residual_energy: cells[6].parse().map_err(|e| bad(line, format!("field 7: {e}")))?,
        });
    }
    Ok(out)
}

pub fn run_file_name(variant: Variant, seed: u64) -> String {
    format!("{variant}_seed{seed}.csv")
}

fn parse_run_file_name(name: &str) -> Option<(Variant, u64)> {
    let stem = name.strip_suffix(".csv")?;
    let (variant, seed) = stem.rsplit_once("_seed")?;
    Some((variant.parse().ok()?, seed.parse().ok()?))
}

/// One finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub variant: Variant,
    pub seed: u64,
    pub summary: RunSummary,
    pub metrics: Vec<RoundMetrics>,
}

impl RunRecord {
    /// First-death round, or the number of rounds run when nobody died.
    pub fn stability_rounds(&self) -> u64 {
        self.summary.first_death_round.unwrap_or(self.summary.rounds_run)
    }

    pub fn lifetime_rounds(&self) -> u64 {
        self.summary.last_death_round.unwrap_or(self.summary.rounds_run)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Spread { min: v[0], median: median_sorted(&v), max: v[v.len() - 1] })
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn median(values: &[f64]) -> f64 {
    Spread::of(values).map_or(f64::NAN, |s| s.median)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantStats {
    pub variant: Variant,
    pub first_death: Spread,
    pub all_dead: Spread,
    pub packets_to_bs: Spread,
    pub packets_to_ch: Spread,
}

/// ACH-minus-baseline differences on one seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedDelta {
    pub kind: ProtocolKind,
    pub seed: u64,
    pub first_death_delta: i64,
    pub packets_to_bs_delta: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub runs: Vec<RunRecord>,
    pub per_variant: Vec<VariantStats>,
    pub deltas: Vec<SeedDelta>,
}

impl SummaryStats {
    pub fn from_runs(mut runs: Vec<RunRecord>) -> Self {
        runs.sort_by_key(|r| (r.variant, r.seed));
        let mut grouped: BTreeMap<Variant, Vec<&RunRecord>> = BTreeMap::new();
        for r in &runs {
            grouped.entry(r.variant).or_default().push(r);
        }
        let per_variant = grouped
            .iter()
            .map(|(&variant, rs)| {
                let col = |f: &dyn Fn(&RunRecord) -> f64| {
                    Spread::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>()).expect("group is non-empty")
                };
                VariantStats {
                    variant,
                    first_death: col(&|r| r.stability_rounds() as f64),
                    all_dead: col(&|r| r.lifetime_rounds() as f64),
                    packets_to_bs: col(&|r| r.summary.final_packets_to_bs as f64),
                    packets_to_ch: col(&|r| r.summary.final_packets_to_ch as f64),
                }
            })
            .collect();

        let index: BTreeMap<(Variant, u64), &RunRecord> = runs.iter().map(|r| ((r.variant, r.seed), r)).collect();
        let deltas = runs
            .iter()
            .filter(|r| r.variant.ach)
            .filter_map(|ach| {
                let base = index.get(&(ach.variant.baseline(), ach.seed))?;
                Some(SeedDelta {
                    kind: ach.variant.kind,
                    seed: ach.seed,
                    first_death_delta: ach.stability_rounds() as i64 - base.stability_rounds() as i64,
                    packets_to_bs_delta: ach.summary.final_packets_to_bs as i64
                        - base.summary.final_packets_to_bs as i64,
                })
            })
            .collect();
        Self { runs, per_variant, deltas }
    }

    pub fn stats(&self, variant: Variant) -> Option<&VariantStats> {
        self.per_variant.iter().find(|s| s.variant == variant)
    }

    pub fn deltas_for(&self, kind: ProtocolKind) -> Vec<SeedDelta> {
        self.deltas.iter().copied().filter(|d| d.kind == kind).collect()
    }

    /// `summary.csv`: one row per run, then min/median/max rows per variant.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "protocol,seed,first_death_round,last_death_round,packets_to_bs,packets_to_ch,first_death_delta,packets_to_bs_delta\n",
        );
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        let delta_of = |r: &RunRecord| {
            self.deltas.iter().find(|d| r.variant.ach && d.kind == r.variant.kind && d.seed == r.seed).copied()
        };
        for r in &self.runs {
            let d = delta_of(r);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.variant,
                r.seed,
                opt(r.summary.first_death_round),
                opt(r.summary.last_death_round),
                r.summary.final_packets_to_bs,
                r.summary.final_packets_to_ch,
                d.map(|d| d.first_death_delta.to_string()).unwrap_or_default(),
                d.map(|d| d.packets_to_bs_delta.to_string()).unwrap_or_default(),
            );
        }
        for s in &self.per_variant {
            let deltas: Vec<SeedDelta> = if s.variant.ach { self.deltas_for(s.variant.kind) } else { Vec::new() };
            let fd = Spread::of(&deltas.iter().map(|d| d.first_death_delta as f64).collect::<Vec<_>>());
            let pk = Spread::of(&deltas.iter().map(|d| d.packets_to_bs_delta as f64).collect::<Vec<_>>());
            let pick = |sp: &Spread, which: usize| [sp.min, sp.median, sp.max][which];
            for (which, name) in ["min", "median", "max"].iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    s.variant,
                    name,
                    pick(&s.first_death, which),
                    pick(&s.all_dead, which),
                    pick(&s.packets_to_bs, which),
                    pick(&s.packets_to_ch, which),
                    fd.map(|x| pick(&x, which).to_string()).unwrap_or_default(),
                    pk.map(|x| pick(&x, which).to_string()).unwrap_or_default(),
                );
            }
        }
        out
    }

    /// Median-over-seeds curves, one per variant, sampled to at most ~1000 points.
    fn median_curve(&self, variant: Variant, value: fn(&RoundMetrics) -> f64) -> Vec<(f64, f64)> {
        let runs: Vec<&RunRecord> =
            self.runs.iter().filter(|r| r.variant == variant && !r.metrics.is_empty()).collect();
        let len = runs.iter().map(|r| r.metrics.len()).max().unwrap_or(0);
        if len == 0 {
            return Vec::new();
        }
        let step = len.div_ceil(1000).max(1);
        let mut rounds: Vec<usize> = (0..len).step_by(step).collect();
        if rounds.last() != Some(&(len - 1)) {
            rounds.push(len - 1);
        }
        rounds
            .into_iter()
            .map(|i| {
                let vals: Vec<f64> = runs.iter().map(|r| value(&r.metrics[i.min(r.metrics.len() - 1)])).collect();
                (i as f64, median(&vals))
            })
            .collect()
    }

    pub fn charts(&self) -> (LineChart, LineChart) {
        let series = |value: fn(&RoundMetrics) -> f64| {
            self.per_variant
                .iter()
                .map(|s| Series {
                    label: s.variant.to_string(),
                    points: self.median_curve(s.variant, value),
                    color: PALETTE[ProtocolKind::ALL.iter().position(|k| *k == s.variant.kind).unwrap_or(0)],
                    dashed: s.variant.ach,
                })
                .collect()
        };
        (
            LineChart {
                title: "Alive nodes (median over seeds)".into(),
                x_label: "round".into(),
                y_label: "alive nodes".into(),
                series: series(|m| m.alive as f64),
            },
            LineChart {
                title: "Packets to BS (median over seeds)".into(),
                x_label: "round".into(),
                y_label: "cumulative packets to BS".into(),
                series: series(|m| m.packets_to_bs_cum as f64),
            },
        )
    }

    /// Writes `summary.csv` and both plots into `dir`.
    pub fn write_reports(&self, dir: &Path) -> Result<(), ExperimentError> {
        write_file(&dir.join(SUMMARY_FILE), &self.to_csv())?;
        let (alive, packets) = self.charts();
        write_file(&dir.join(ALIVE_PLOT), &alive.to_svg())?;
        write_file(&dir.join(PACKETS_PLOT), &packets.to_svg())
    }
}

/// Runs every `(variant, seed)` pair without touching the filesystem.
pub fn simulate_all(spec: &ExperimentSpec, jobs: usize) -> Result<Vec<RunRecord>, ExperimentError> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let configs = spec.runs();
    pool.install(|| {
        configs
            .par_iter()
            .map(|config| {
                let result = run_simulation(config).map_err(ConfigError::from)?;
                Ok(RunRecord {
                    variant: config.protocol.variant(),
                    seed: config.seed,
                    summary: result.summary,
                    metrics: result.metrics,
                })
            })
            .collect()
    })
}

/// Runs the experiment and writes every output under `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path, jobs: usize) -> Result<SummaryStats, ExperimentError> {
    spec.validate()?;
    let runs_dir = out_dir.join(RUNS_DIR);
    fs::create_dir_all(&runs_dir).map_err(io_err(&runs_dir))?;
    let resolved = ExperimentSpec { out_dir: Some(out_dir.to_path_buf()), ..spec.clone() };
    write_file(&out_dir.join(RESOLVED_CONFIG_FILE), &resolved.to_config_string())?;

    let records = simulate_all(spec, jobs)?;
    for r in &records {
        write_file(&runs_dir.join(run_file_name(r.variant, r.seed)), &metrics_csv(&r.metrics))?;
    }
    let stats = SummaryStats::from_runs(records);
    stats.write_reports(out_dir)?;
    Ok(stats)
}

/// Rebuilds the summary and plots from the run CSVs already in `dir`.
pub fn summarize(dir: &Path) -> Result<SummaryStats, ExperimentError> {
    let runs_dir = dir.join(RUNS_DIR);
    let entries = fs::read_dir(&runs_dir).map_err(io_err(&runs_dir))?;
    let mut records = Vec::new();
    for entry in entries {
        let path = entry.map_err(io_err(&runs_dir))?.path();
        let Some((variant, seed)) = path.file_name().and_then(|n| n.to_str()).and_then(parse_run_file_name) else {
            continue;
        };
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let metrics = parse_metrics_csv(&path, &text)?;
        records.push(RunRecord { variant, seed, summary: RunSummary::from_metrics(&metrics), metrics });
    }
    if records.is_empty() {
        return Err(ExperimentError::NoRuns(runs_dir));
    }
    let stats = SummaryStats::from_runs(records);
    stats.write_reports(dir)?;
    Ok(stats)
}
