//! Independent seeded restarts and batch runs. With the `parallel` feature
//! the runs are spread over the rayon pool; otherwise they run in order.
//! Either way results come back indexed by run, so the merge is identical.

use crate::error::Result;
use crate::rng;
use crate::solver::{self, SolveOutput, SolverConfig};
use crate::tensor::DenseTensor;

/// Seed of restart `index`; restart 0 uses the base seed itself.
pub fn restart_seed(seed: u64, index: usize) -> u64 {
    if index == 0 {
        seed
    } else {
        rng::run_seed(seed, index)
    }
}

/// `f(0), ..., f(n−1)` in index order, computed on the rayon pool.
#[cfg(feature = "parallel")]
pub fn map_runs<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// `f(0), ..., f(n−1)` in index order, computed sequentially.
#[cfg(not(feature = "parallel"))]
pub fn map_runs<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_runs_sequential(n, f)
}

pub fn map_runs_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiStartOutput {
    pub best: SolveOutput,
    pub best_index: usize,
    pub best_seed: u64,
    /// Final objective of every restart, by index.
    pub objectives: Vec<f64>,
}

fn merge(runs: Vec<Result<SolveOutput>>, seed: u64) -> Result<MultiStartOutput> {
    let mut outputs = Vec::with_capacity(runs.len());
    for run in runs {
        outputs.push(run?);
    }
    let objectives: Vec<f64> = outputs.iter().map(SolveOutput::objective).collect();
    let mut best_index = 0;
    for (i, &f) in objectives.iter().enumerate() {
        if f > objectives[best_index] {
            best_index = i;
        }
    }
    let best = outputs.swap_remove(best_index);
    Ok(MultiStartOutput { best, best_index, best_seed: restart_seed(seed, best_index), objectives })
}

fn one_restart(a: &DenseTensor, r: usize, s: usize, config: &SolverConfig, index: usize) -> Result<SolveOutput> {
    solver::solve(a, r, s, &config.clone().with_seed(restart_seed(config.seed, index)))
}

/// Best of `restarts` seeded solves by final objective, ties to the lowest
/// index. The first failing restart (by index) is reported as the error.
pub fn solve_restarts(a: &DenseTensor, r: usize, s: usize, config: &SolverConfig, restarts: usize) -> Result<MultiStartOutput> {
    let runs = map_runs(restarts.max(1), |i| one_restart(a, r, s, config, i));
    merge(runs, config.seed)
}

pub fn solve_restarts_sequential(
    a: &DenseTensor,
    r: usize,
    s: usize,
    config: &SolverConfig,
    restarts: usize,
) -> Result<MultiStartOutput> {
    let runs = map_runs_sequential(restarts.max(1), |i| one_restart(a, r, s, config, i));
    merge(runs, config.seed)
}

/// One problem of a batch suite.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchJob {
    pub tensor: DenseTensor,
    pub r: usize,
    pub s: usize,
    pub config: SolverConfig,
}

pub fn solve_batch(jobs: &[BatchJob]) -> Vec<Result<SolveOutput>> {
    map_runs(jobs.len(), |i| solver::solve(&jobs[i].tensor, jobs[i].r, jobs[i].s, &jobs[i].config))
}

pub fn solve_batch_sequential(jobs: &[BatchJob]) -> Vec<Result<SolveOutput>> {
    map_runs_sequential(jobs.len(), |i| solver::solve(&jobs[i].tensor, jobs[i].r, jobs[i].s, &jobs[i].config))
}
