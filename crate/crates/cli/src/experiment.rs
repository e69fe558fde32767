//! Monte Carlo sweeps: paired channel draws per trial, every scheme solved
//! on the same draw, rows in (sweep value, scheme, trial) order.

use std::io::Write;
use std::time::Instant;

use cran_core::model::{fading_channels, wyner_channels, ChannelSet, NetworkConfig};
use cran_core::optimizer::{solve_separate, Gamma, Mode, ProblemSpec, SchemeSolver, SolveResult, SolveStatus};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{db_to_linear, ChannelModel, ExperimentConfig, SweepVar};
use crate::CliError;

pub const CUTSET: &str = "cutset";

/// One CSV row. Field order is the CSV header.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub preset: String,
    pub scheme: String,
    pub sweep_var: String,
    pub sweep_value: Option<f64>,
    pub trial: u64,
    pub seed: u64,
    pub sum_rate_bits: Option<f64>,
    pub status: String,
    pub iterations: usize,
    pub wall_ms: Option<u64>,
}

pub const HEADER: &str = "preset,scheme,sweep_var,sweep_value,trial,seed,sum_rate_bits,status,iterations,wall_ms";

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record wall-clock time per solve. Off by default so that output is
    /// byte-for-byte reproducible.
    pub timing: bool,
}

/// Network and channels at one sweep point of one trial.
struct Instance {
    cfg: NetworkConfig,
    chans: ChannelSet,
    gamma: Option<f64>,
}

fn instance(exp: &ExperimentConfig, value: Option<f64>, seed: u64) -> Result<Instance, cran_core::Error> {
    let mut net = exp.network.clone();
    let mut channel = exp.channel;
    let mut gamma = None;
    if let (Some(s), Some(v)) = (&exp.sweep, value) {
        match (s.var, &mut channel) {
            (SweepVar::C, _) => net.backhaul = v,
            (SweepVar::P, _) => net.power = db_to_linear(v),
            (SweepVar::Alpha, ChannelModel::Fading { alpha_db }) => *alpha_db = v,
            (SweepVar::G, ChannelModel::Wyner { g }) => *g = v,
            (SweepVar::Gamma, _) => gamma = Some(v),
            _ => unreachable!("rejected by validation"),
        }
    }
    let cfg = net.build()?;
    let chans = match channel {
        ChannelModel::Wyner { g } => wyner_channels(&cfg, g)?,
        ChannelModel::Fading { alpha_db } => fading_channels(&cfg, db_to_linear(alpha_db), seed)?,
    };
    Ok(Instance { cfg, chans, gamma })
}

struct Outcome {
    sum_rate: Option<f64>,
    status: String,
    iterations: usize,
    wall_ms: u64,
}

impl Outcome {
    fn from_result(r: &cran_core::Result<SolveResult>, started: Instant) -> Self {
        let wall_ms = started.elapsed().as_millis() as u64;
        match r {
            Ok(res) => Self {
                sum_rate: (res.status != SolveStatus::Infeasible).then(|| res.rates.sum_rate()),
                status: res.status.as_str().into(),
                iterations: res.iterations,
                wall_ms,
            },
            Err(cran_core::Error::Infeasible(_) | cran_core::Error::NoFeasibleStart(_)) => Self {
                sum_rate: None,
                status: SolveStatus::Infeasible.as_str().into(),
                iterations: 0,
                wall_ms,
            },
            Err(_) => Self {
                sum_rate: None,
                status: "error".into(),
                iterations: 0,
                wall_ms,
            },
        }
    }
}

/// Outcomes for every scheme (then the cutset, if enabled) at every sweep
/// point of one trial.
fn run_trial(exp: &ExperimentConfig, seed: u64) -> Vec<Vec<Outcome>> {
    let values: Vec<Option<f64>> = match &exp.sweep {
        Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let chain = exp.sweep.as_ref().is_some_and(|s| s.var.relaxes_upward());
    let mut previous: Option<(f64, SchemeSolver)> = None;
    let mut out = Vec::with_capacity(values.len());
    for value in values {
        let inst = match instance(exp, value, seed) {
            Ok(i) => i,
            Err(e) => {
                let failed = |_| Outcome::from_result(&Err(e.clone()), Instant::now());
                out.push((0..exp.schemes.len() + exp.cutset as usize).map(failed).collect());
                previous = None;
                continue;
            }
        };
        let spec = ProblemSpec::new(inst.cfg.clone(), inst.chans, exp.schemes[0].mode)
            .expect("channels built from this configuration");
        let mut solver = SchemeSolver::new(&spec);
        if let (true, Some((prev_v, prev)), Some(v)) = (chain, &previous, value) {
            if v >= *prev_v {
                solver.warm_from(prev);
            }
        }
        let mut row: Vec<Outcome> = exp
            .schemes
            .iter()
            .map(|s| {
                let started = Instant::now();
                let r = match (inst.gamma, s.mode) {
                    (Some(g), Mode::Separate(_)) => solve_separate(&spec.with_mode(s.mode), Gamma::Fixed(g)),
                    _ => solver.solve(s.mode),
                };
                Outcome::from_result(&r, started)
            })
            .collect();
        if exp.cutset {
            let started = Instant::now();
            let r = solver.solve(Mode::FullCooperation);
            let mut o = Outcome::from_result(&r, started);
            let total: f64 = inst.cfg.backhaul().iter().sum();
            o.sum_rate = o.sum_rate.map(|full| full.min(total));
            row.push(o);
        }
        out.push(row);
        previous = value.map(|v| (v, solver));
    }
    out
}

/// Runs every (sweep value, scheme, trial) combination. Trials run in
/// parallel; rows come back in deterministic order.
pub fn run_experiment(exp: &ExperimentConfig, opts: RunOptions) -> Result<Vec<Row>, CliError> {
    exp.validate()?;
    let seeds: Vec<u64> = (0..exp.trials).map(|t| exp.seed + t).collect();
    let results: Vec<Vec<Vec<Outcome>>> = if exp.channel.is_random() {
        seeds.par_iter().map(|&s| run_trial(exp, s)).collect()
    } else {
        // Deterministic channels: every trial would repeat the same solves.
        vec![run_trial(exp, exp.seed)]
    };

    let (var, values): (String, Vec<Option<f64>>) = match &exp.sweep {
        Some(s) => (s.var.name().into(), s.values.iter().map(|&v| Some(v)).collect()),
        None => (String::new(), vec![None]),
    };
    let labels: Vec<&str> = exp
        .schemes
        .iter()
        .map(|s| s.label.as_str())
        .chain(exp.cutset.then_some(CUTSET))
        .collect();
    let mut rows = Vec::with_capacity(values.len() * labels.len() * seeds.len());
    for (vi, value) in values.iter().enumerate() {
        for (si, label) in labels.iter().enumerate() {
            for (trial, &seed) in seeds.iter().enumerate() {
                let o = &results[trial.min(results.len() - 1)][vi][si];
                rows.push(Row {
                    preset: exp.name.clone(),
                    scheme: label.to_string(),
                    sweep_var: var.clone(),
                    sweep_value: *value,
                    trial: trial as u64,
                    seed,
                    sum_rate_bits: o.sum_rate,
                    status: o.status.clone(),
                    iterations: o.iterations,
                    wall_ms: opts.timing.then_some(o.wall_ms),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[Row], w: W) -> Result<(), CliError> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(HEADER.split(','))?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// True when no scheme row has a solution: every one is infeasible or
/// failed.
pub fn universally_infeasible(rows: &[Row]) -> bool {
    rows.iter().filter(|r| r.scheme != CUTSET).all(|r| r.sum_rate_bits.is_none())
}
