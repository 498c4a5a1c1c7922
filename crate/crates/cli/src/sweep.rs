//! Expands a [`SweepSpec`] into trials and runs them.

use std::time::Instant;

use advice_learn_core::instances::{
    balanced_instance, balanced_subset_size, farthest_corner, gv_code, perturb_l1, random_balanced,
    unbalanced_instance,
};
use advice_learn_core::pipeline::{run_experiment, PipelineConfig};
use advice_learn_core::{Error, MeanVector, Seed};
use rayon::prelude::*;

use crate::config::{AdviceModel, Cell, Family, SweepSpec};
use crate::error::{CliError, Result};
use crate::output::ResultRow;

/// A random `size`-subset of `0..d`.
fn random_subset(d: usize, size: usize, seed: Seed) -> advice_learn_core::Result<Vec<usize>> {
    Ok(gv_code(d, size, 0, 1, seed, 1)?.sets.remove(0))
}

fn cell_error(cell: &Cell, e: Error) -> CliError {
    match e {
        Error::InvalidParameter { .. } | Error::SubsetSize { .. } | Error::SubsetElement { .. } => {
            CliError::Config(format!(
                "cell (d = {}, epsilon = {}, eta = {}, tau = {}, advice = {}): {e}",
                cell.d,
                cell.epsilon,
                cell.eta,
                cell.tau,
                cell.advice.label()
            ))
        }
        e => CliError::Core(e),
    }
}

/// True means and advice for one trial of a cell.
pub fn instance(cell: &Cell, seed: Seed) -> Result<(MeanVector, MeanVector)> {
    let inner = || -> advice_learn_core::Result<(MeanVector, MeanVector)> {
        let d = cell.d;
        let draw_p = || random_balanced(d, cell.tau, seed.child(0));
        Ok(match cell.advice {
            AdviceModel::Exact => {
                let p = draw_p()?;
                (p.clone(), p)
            }
            AdviceModel::Sparse { t, magnitude } => {
                let p = draw_p()?;
                let q = perturb_l1(&p, t as f64 * magnitude, t, 0.0, seed.child(1))?;
                (p, q)
            }
            AdviceModel::Dense { l1_budget } => {
                let p = draw_p()?;
                let q = perturb_l1(&p, l1_budget, d, 0.0, seed.child(1))?;
                (p, q)
            }
            AdviceModel::Flip => {
                let p = draw_p()?;
                let q = farthest_corner(&p);
                (p, q)
            }
            AdviceModel::Adversarial { family: Family::Unbalanced, .. } => {
                let s = random_subset(d, d / 2, seed.child(1))?;
                unbalanced_instance(d, cell.epsilon, &s)?
            }
            AdviceModel::Adversarial { family: Family::Balanced, lambda } => {
                let lambda = lambda.unwrap_or(f64::NAN);
                let k = balanced_subset_size(cell.epsilon, lambda) as usize;
                if k > d {
                    return Err(Error::SubsetSize { expected: k, found: d });
                }
                let s = random_subset(d, k, seed.child(1))?;
                let (p, q, _) = balanced_instance(d, cell.epsilon, lambda, &s)?;
                (p, q)
            }
        })
    };
    inner().map_err(|e| cell_error(cell, e))
}

/// Runs every (cell, trial) pair on the current rayon pool. Rows come back
/// sorted by trial index.
pub fn run_sweep(sweep: &SweepSpec) -> Result<Vec<ResultRow>> {
    sweep.validate()?;
    let cells = sweep.cells();
    // reject impossible schedules before spending any samples
    for cell in &cells {
        PipelineConfig::new(cell.epsilon, sweep.delta, cell.eta, cell.tau, MeanVector::constant(cell.d, 0.5)?)
            .map_err(|e| cell_error(cell, e))?;
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..sweep.trials).map(move |t| (c, t)))
        .collect();
    let master = Seed(sweep.seed);
    let mut rows = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(c, t))| {
            let cell = &cells[c];
            let started = Instant::now();
            let seed = master.path(&[c as u64, t as u64]);
            let (p, q) = instance(cell, seed.child(0))?;
            let mut cfg = PipelineConfig::new(cell.epsilon, sweep.delta, cell.eta, cell.tau, q)
                .map_err(|e| cell_error(cell, e))?;
            cfg.constants = sweep.constants;
            let record = run_experiment(&p, &cfg, seed.child(1))?;
            Ok(ResultRow::new(
                index,
                c,
                t,
                sweep.seed,
                &cell.advice,
                record,
                started.elapsed().as_secs_f64(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.trial);
    Ok(rows)
}
