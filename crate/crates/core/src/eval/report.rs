//! Plot-ready CSV files and the structured summary of a run bundle.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ablation::RunReport;
use super::{EvalReport, FuelReport};
use crate::cdm::EventSeries;
use crate::risk::RiskModel;

pub const REWARD_CSV: &str = "reward_vs_batch.csv";
pub const ACTIONS_CSV: &str = "action_distribution.csv";
pub const FUEL_CSV: &str = "cumulative_fuel.csv";
pub const POC_CSV: &str = "poc_histogram.csv";
pub const RUNS_CSV: &str = "runs.csv";
pub const SUMMARY_TOML: &str = "summary.toml";

/// Lower edge of the PoC histogram, log10; smaller values, zero included,
/// land in the first bin.
pub const POC_LOG10_MIN: i32 = -40;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunMeta {
    pub run_id: String,
    /// fnv1a64 of the resolved configuration text, hex.
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct PolicyMetrics {
    tp: usize,
    fp: usize,
    tn: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    maneuvers: usize,
    total_kg: f64,
    avg_per_cam_g: f64,
    maneuver_precision_pct: f64,
    mean_cost: f64,
    skipped: usize,
}

impl From<&EvalReport> for PolicyMetrics {
    fn from(r: &EvalReport) -> Self {
        Self {
            tp: r.actions.tp,
            fp: r.actions.fp,
            tn: r.actions.tn,
            fn_: r.actions.fn_,
            maneuvers: r.fuel.maneuvers,
            total_kg: r.fuel.total_kg(),
            avg_per_cam_g: r.fuel.avg_per_cam_g(),
            maneuver_precision_pct: r.actions.maneuver_precision_pct(),
            mean_cost: r.mean_cost,
            skipped: r.skipped,
        }
    }
}

#[derive(Debug, Serialize)]
struct RunSummary {
    name: String,
    eta: f64,
    iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged_at: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trained: Option<PolicyMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff: Option<PolicyMetrics>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    #[serde(flatten)]
    meta: &'a RunMeta,
    runs: Vec<RunSummary>,
}

/// Writes every figure file plus `runs.csv` and `summary.toml` into `out`
/// and returns their paths. `poc_events` feeds the PoC histogram from the
/// final record of each event.
pub fn emit_plots_data(
    meta: &RunMeta,
    runs: &[RunReport],
    poc_events: &[EventSeries],
    risk: &RiskModel,
    out: &Path,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, body: Vec<u8>| -> io::Result<()> {
        let p = out.join(name);
        fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    emit(REWARD_CSV, reward_csv(runs)?)?;
    emit(ACTIONS_CSV, actions_csv(runs)?)?;
    emit(FUEL_CSV, fuel_csv(runs)?)?;
    emit(POC_CSV, poc_csv(&poc_histogram(poc_events, risk))?)?;
    emit(RUNS_CSV, runs_csv(runs)?)?;
    emit(SUMMARY_TOML, summary_toml(meta, runs)?.into_bytes())?;
    Ok(written)
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn finish(w: csv::Writer<Vec<u8>>) -> io::Result<Vec<u8>> {
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

/// `run,batch,mean_reward,epsilon,maneuver_rate`
fn reward_csv(runs: &[RunReport]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "batch", "mean_reward", "epsilon", "maneuver_rate"]).map_err(csv_err)?;
    for r in runs {
        for b in &r.history {
            w.write_record([
                r.name.clone(),
                b.batch.to_string(),
                b.mean_reward.to_string(),
                b.epsilon.to_string(),
                b.maneuver_rate.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

fn policies(r: &RunReport) -> impl Iterator<Item = &EvalReport> {
    r.trained.iter().chain(r.cutoff.iter())
}

/// `run,policy,eta,tp,fp,tn,fn,tp_pct,fn_pct,fp_pct,tn_pct`
fn actions_csv(runs: &[RunReport]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "policy", "eta", "tp", "fp", "tn", "fn", "tp_pct", "fn_pct", "fp_pct", "tn_pct"])
        .map_err(csv_err)?;
    for r in runs {
        for e in policies(r) {
            let a = &e.actions;
            w.write_record([
                r.name.clone(),
                e.policy.clone(),
                r.episode.eta.to_string(),
                a.tp.to_string(),
                a.fp.to_string(),
                a.tn.to_string(),
                a.fn_.to_string(),
                a.tp_pct().to_string(),
                a.fn_pct().to_string(),
                a.fp_pct().to_string(),
                a.tn_pct().to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// `run,policy,eta,episode,cumulative_kg`. A cut-off series identical to
/// one already written is not repeated, and its `eta` column is empty.
fn fuel_csv(runs: &[RunReport]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "policy", "eta", "episode", "cumulative_kg"]).map_err(csv_err)?;
    let mut cutoffs: Vec<&FuelReport> = Vec::new();
    for r in runs {
        for e in policies(r) {
            let eta = if e.policy == "cutoff" {
                if cutoffs.contains(&&e.fuel) {
                    continue;
                }
                cutoffs.push(&e.fuel);
                String::new()
            } else {
                r.episode.eta.to_string()
            };
            for (i, c) in e.fuel.cumulative_kg().iter().enumerate() {
                w.write_record([r.name.clone(), e.policy.clone(), eta.clone(), i.to_string(), c.to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

/// One-decade histogram bins of log10 PoC: `(lower edge, count)`, from
/// [`POC_LOG10_MIN`] up to the bin holding PoC = 1.
pub fn poc_histogram(events: &[EventSeries], risk: &RiskModel) -> Vec<(i32, usize)> {
    let mut bins: Vec<(i32, usize)> = (POC_LOG10_MIN..=0).map(|lo| (lo, 0)).collect();
    for s in events {
        let p = s.last().poc(risk);
        let lo = if p > 0.0 { p.log10().floor() as i32 } else { POC_LOG10_MIN };
        let idx = (lo.clamp(POC_LOG10_MIN, 0) - POC_LOG10_MIN) as usize;
        bins[idx].1 += 1;
    }
    bins
}

/// `log10_lo,log10_hi,count`
fn poc_csv(bins: &[(i32, usize)]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["log10_lo", "log10_hi", "count"]).map_err(csv_err)?;
    for (lo, c) in bins {
        w.write_record([lo.to_string(), (lo + 1).to_string(), c.to_string()]).map_err(csv_err)?;
    }
    finish(w)
}

/// One row per run with convergence and both policies' headline metrics.
fn runs_csv(runs: &[RunReport]) -> io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["run", "group", "eta", "hbr", "phase", "n_rev", "iterations", "converged_at"];
    let cols = ["tp_pct", "fp_pct", "precision_pct", "maneuvers", "total_kg", "avg_per_cam_g"];
    let trained: Vec<String> = cols.iter().map(|c| format!("trained_{c}")).collect();
    let cutoff: Vec<String> = cols.iter().map(|c| format!("cutoff_{c}")).collect();
    header.extend(trained.iter().map(String::as_str));
    header.extend(cutoff.iter().map(String::as_str));
    header.push("error");
    w.write_record(&header).map_err(csv_err)?;
    let metrics = |e: Option<&EvalReport>| -> Vec<String> {
        match e {
            Some(e) => vec![
                e.actions.tp_pct().to_string(),
                e.actions.fp_pct().to_string(),
                e.actions.maneuver_precision_pct().to_string(),
                e.fuel.maneuvers.to_string(),
                e.fuel.total_kg().to_string(),
                e.fuel.avg_per_cam_g().to_string(),
            ],
            None => vec![String::new(); cols.len()],
        }
    };
    for r in runs {
        let group = r.group.map(|g| format!("{g:?}").to_lowercase()).unwrap_or_default();
        let hbr = match r.episode.hbr {
            crate::simenv::HbrMode::Fixed { .. } => "fixed",
            crate::simenv::HbrMode::Sampled { .. } => "random",
        };
        let phase = match r.episode.phase {
            crate::simenv::PhaseMode::Fixed { .. } => "fixed",
            crate::simenv::PhaseMode::Analytic => "analytic",
        };
        let n_rev = format!("{:?}", r.episode.n_rev).to_lowercase();
        let mut row = vec![
            r.name.clone(),
            group,
            r.episode.eta.to_string(),
            hbr.to_string(),
            phase.to_string(),
            n_rev,
            r.iterations.to_string(),
            r.converged_at.map(|c| c.to_string()).unwrap_or_default(),
        ];
        row.extend(metrics(r.trained.as_ref()));
        row.extend(metrics(r.cutoff.as_ref()));
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

fn summary_toml(meta: &RunMeta, runs: &[RunReport]) -> io::Result<String> {
    let s = Summary {
        meta,
        runs: runs
            .iter()
            .map(|r| RunSummary {
                name: r.name.clone(),
                eta: r.episode.eta,
                iterations: r.iterations,
                converged_at: r.converged_at,
                error: r.error.clone(),
                trained: r.trained.as_ref().map(PolicyMetrics::from),
                cutoff: r.cutoff.as_ref().map(PolicyMetrics::from),
            })
            .collect(),
    };
    toml::to_string(&s).map_err(io::Error::other)
}
