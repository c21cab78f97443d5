//! Thread pool setup and parallel drivers for the chunked core routines.
//!
//! Chunks are counted independently and combined in chunk order, so results
//! do not depend on the number of workers.

use anyhow::Result;
use rayon::prelude::*;
use thinlab_core::domino::{BoundaryScan, CoOccurrence};
use thinlab_core::exact::{
    sweep_rows, BoxExperiment, ConditionalCounts, ConditionalQuery, CountPlan, Exterior, PairCounts, SweepRow,
};
use thinlab_core::polymer::{event_coefficients, AnnulusContext, BoundScanner, BoundTally, Polymer, WeightedPolymers};

/// Environment variable consulted when no worker count is given.
pub const WORKERS_ENV: &str = "THINLAB_WORKERS";

/// Worker count: the explicit value, else the environment variable, else the
/// available parallelism.
pub fn resolve_workers(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

pub fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

pub fn count_plan(plan: &CountPlan) -> PairCounts {
    let parts: Vec<PairCounts> = (0..plan.chunk_count()).into_par_iter().map(|c| plan.count_chunk(c)).collect();
    parts.into_iter().fold(PairCounts::zeros(plan.free_sites().len()), |acc, part| acc.merge(&part))
}

pub fn conditional_counts(query: &ConditionalQuery) -> Result<ConditionalCounts> {
    Ok(ConditionalCounts::from_pair(count_plan(&query.direct_plan()?))?)
}

/// Box sweep with both boundary conditions counted in parallel chunks.
pub fn box_sweep(exp: &BoxExperiment, grid: &[f64]) -> Result<Vec<SweepRow>> {
    let vacant = conditional_counts(&exp.query(Exterior::Vacant))?;
    let occupied = conditional_counts(&exp.query(Exterior::Occupied))?;
    Ok(sweep_rows(&vacant, &occupied, grid)?)
}

pub fn domino_scan(scan: &BoundaryScan) -> CoOccurrence {
    let parts: Vec<CoOccurrence> = (0..scan.chunk_count()).into_par_iter().map(|c| scan.scan_chunk(c)).collect();
    parts.into_iter().reduce(|a, b| a.merge(&b)).unwrap_or_else(|| scan.scan())
}

/// Bound scan over every root of the context, merged in root order.
pub fn bound_scan(ctx: &AnnulusContext, grid: &[f64], max_size: usize) -> Result<Vec<BoundTally>> {
    let scanner = BoundScanner::new(ctx, grid)?;
    let roots: Vec<usize> = (0..128).filter(|&i| ctx.random_mask() >> i & 1 == 1).collect();
    let parts = roots.par_iter().map(|&r| scanner.scan_root(r, max_size)).collect::<Result<Vec<_>, _>>()?;
    let mut total = vec![BoundTally::default(); grid.len()];
    for part in parts {
        for (t, r) in total.iter_mut().zip(&part) {
            t.merge(r);
        }
    }
    Ok(total)
}

/// Exact weights of a polymer list, computed in parallel.
pub fn weigh(ctx: &AnnulusContext, polymers: Vec<Polymer>) -> Result<WeightedPolymers> {
    let coefficients = polymers.par_iter().map(|p| event_coefficients(ctx, p.mask)).collect::<Result<Vec<_>, _>>()?;
    let dependence = polymers.iter().map(|p| ctx.dependence(p.mask)).collect();
    Ok(WeightedPolymers { polymers, dependence, coefficients })
}
