//! Table builders behind the subcommands.

use anyhow::{bail, ensure, Result};
use thinlab_core::domino::{
    closed_form_curves, group_tv_curves, kernel_vector, threshold_disagreement, threshold_dobrushin, threshold_simple,
    tv_distance, AdmissibilityClass, BoundaryScan, CurveGroup,
};
use thinlab_core::exact::{AnnulusPattern, BoxExperiment, SweepRow};
use thinlab_core::polymer::{enumerate_polymers, AnnulusContext, WeightedPolymers};
use thinlab_core::sampler::{
    disagreement_experiment, empirical_thinned_marginal, thinned_marginal_exact, CoupledAnnulus, SamplerConfig,
};
use thinlab_core::{Config, Region, Site};

use crate::format::{sig12, uniform_grid};
use crate::manifest::Table;
use crate::parallel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Fill {
    Vacant,
    Occupied,
}

impl Fill {
    pub fn occupied(self) -> bool {
        self == Fill::Occupied
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AnnulusKind {
    Zero,
    Checkerboard,
}

impl From<AnnulusKind> for AnnulusPattern {
    fn from(k: AnnulusKind) -> AnnulusPattern {
        match k {
            AnnulusKind::Zero => AnnulusPattern::Zero,
            AnnulusKind::Checkerboard => AnnulusPattern::Checkerboard,
        }
    }
}

/// Rows `d,p_dobrushin,p_disagreement,p_simple` for `d = 2..=dmax`.
pub fn thresholds(dmax: usize) -> Result<Table> {
    ensure!((2..=50).contains(&dmax), "dmax must lie in 2..=50");
    let mut t = Table::new(&["d", "p_dobrushin", "p_disagreement", "p_simple"]);
    for d in 2..=dmax {
        t.push(vec![
            d.to_string(),
            sig12(threshold_dobrushin(d)?),
            sig12(threshold_disagreement(d, None)?),
            sig12(threshold_simple(d)?),
        ]);
    }
    Ok(t)
}

/// Everything the tv-curves command writes.
#[derive(Clone, Debug)]
pub struct TvCurves {
    /// `p,rho,q,u,v`
    pub curves: Table,
    /// `pair_id,class_a,class_b,curve_label`
    pub census: Table,
    /// `p,pair_id,tv`
    pub pairs: Table,
    pub classes: Vec<AdmissibilityClass>,
    /// Distinct curves over the whole grid.
    pub groups: Vec<CurveGroup>,
    /// Distinct curves over the grid points with `p >= HIGH_DENSITY`.
    pub groups_high: Vec<CurveGroup>,
}

/// Lower end of the density range on which curves are also grouped.
pub const HIGH_DENSITY: f64 = 0.5;

/// Curves agreeing within this tolerance at every grid point are merged.
pub const CURVE_TOLERANCE: f64 = 1e-12;

pub fn tv_curves(step: f64) -> Result<TvCurves> {
    ensure!(step > 0.0 && step <= 0.1, "step must lie in (0, 0.1]");
    let grid = uniform_grid(0.0, 1.0, step);
    let classes: Vec<AdmissibilityClass> = parallel::domino_scan(&BoundaryScan::full(2)?).classes.into_iter().collect();
    let groups = group_tv_curves(&classes, &grid, CURVE_TOLERANCE)?;
    let high: Vec<f64> = grid.iter().copied().filter(|&p| p >= HIGH_DENSITY).collect();
    let groups_high = group_tv_curves(&classes, &high, CURVE_TOLERANCE)?;

    let mut curves = Table::new(&["p", "rho", "q", "u", "v"]);
    for &p in &grid {
        let (rho, q, u, v) = closed_form_curves(p);
        curves.push(vec![sig12(p), sig12(rho), sig12(q), sig12(u), sig12(v)]);
    }
    let pair_list: Vec<(AdmissibilityClass, AdmissibilityClass)> =
        classes.iter().enumerate().flat_map(|(i, &a)| classes[i + 1..].iter().map(move |&b| (a, b))).collect();
    let mut census = Table::new(&["pair_id", "class_a", "class_b", "curve_label"]);
    for (id, (a, b)) in pair_list.iter().enumerate() {
        let label = groups.iter().find(|g| g.pairs.contains(&(*a, *b))).map(|g| g.label.clone()).unwrap_or_default();
        census.push(vec![id.to_string(), a.to_string(), b.to_string(), label]);
    }
    let mut pairs = Table::new(&["p", "pair_id", "tv"]);
    for &p in &grid {
        for (id, (a, b)) in pair_list.iter().enumerate() {
            let d = tv_distance(&kernel_vector(p, *a)?, &kernel_vector(p, *b)?);
            pairs.push(vec![sig12(p), id.to_string(), sig12(d)]);
        }
    }
    Ok(TvCurves { curves, census, pairs, classes, groups, groups_high })
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(&["p", "value_vacant", "value_occupied", "difference"]);
    for r in rows {
        t.push(vec![sig12(r.p), sig12(r.value_vacant), sig12(r.value_occupied), sig12(r.difference)]);
    }
    t
}

/// Box experiment in `d = 2` around the origin.
pub fn box_conditional(k: usize, grid: &[f64], center: Fill, annulus: AnnulusKind) -> Result<Vec<SweepRow>> {
    ensure!(k >= 3, "box side must be at least 3");
    let exp = BoxExperiment { dim: 2, side: k, center: center.occupied(), annulus: annulus.into() };
    parallel::box_sweep(&exp, grid)
}

/// Window of a polymer computation: a centred square of side `side` in
/// `d = 2`, with the origin as inner region or no inner region at all.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolymerWindow {
    pub side: usize,
    pub origin_inside: bool,
    pub inner: Fill,
    pub exterior: Fill,
}

impl PolymerWindow {
    pub fn context(&self) -> Result<AnnulusContext> {
        ensure!((1..=9).contains(&self.side), "polymer windows have side 1..=9");
        let delta = Region::centered_cube(2, self.side);
        let lambda = if self.origin_inside { Region::singleton(Site::origin(2)) } else { Region::empty(2) };
        let inner = Config::from_fn(lambda.thick_boundary(), |_| self.inner.occupied());
        let outer = Config::from_fn(delta.outer_boundary(), |_| self.exterior.occupied());
        Ok(AnnulusContext::full(&delta, &lambda, &inner, &outer)?)
    }
}

pub fn polymer_label(ctx: &AnnulusContext, mask: u128) -> String {
    ctx.sites_of(mask).iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
}

/// Rows `polymer_id,size,weight_at_p,bound_p_pow_L,bound_holds` in canonical
/// polymer order, with `L` the set of sites surrounded by the polymer.
pub fn polymer_weights(win: &PolymerWindow, max_size: usize, p: f64) -> Result<Table> {
    ensure!((1..=8).contains(&max_size), "polymer sizes are capped at 8");
    ensure!((0.0..=1.0).contains(&p), "density must lie in [0, 1]");
    let ctx = win.context()?;
    let weighted = parallel::weigh(&ctx, enumerate_polymers(&ctx, max_size))?;
    let mut t = Table::new(&["polymer_id", "size", "weight_at_p", "bound_p_pow_L", "bound_holds"]);
    for (k, poly) in weighted.polymers.iter().enumerate() {
        let z = weighted.weight(k, p);
        let bound = p.powi(ctx.surrounded(poly.mask).count_ones() as i32);
        t.push(vec![
            polymer_label(&ctx, poly.mask),
            poly.size().to_string(),
            sig12(z),
            sig12(bound),
            (z.abs() <= bound * (1.0 + 1e-12)).to_string(),
        ]);
    }
    Ok(t)
}

/// Outcome of a truncated Kotecký–Preiss scan for singleton targets.
#[derive(Clone, Debug)]
pub struct KpScan {
    /// `p,kp_sum,threshold,holds`
    pub table: Table,
    /// Largest grid density up to which the condition holds at every grid point.
    pub estimate: Option<f64>,
    pub weighted: WeightedPolymers,
}

pub fn kp_scan(ctx: &AnnulusContext, truncation: usize, grid: &[f64]) -> Result<KpScan> {
    ensure!((1..=8).contains(&truncation), "truncation must lie in 1..=8");
    let weighted = parallel::weigh(ctx, enumerate_polymers(ctx, truncation))?;
    let mut table = Table::new(&["p", "kp_sum", "threshold", "holds"]);
    let mut estimate = None;
    let mut broken = false;
    for &p in grid {
        let sums = weighted.singleton_kp_sums(ctx, p);
        let worst = sums.iter().copied().fold(0.0, f64::max);
        let holds = worst <= 1.0;
        if holds && !broken {
            estimate = Some(p);
        }
        broken |= !holds;
        table.push(vec![sig12(p), sig12(worst), "1".to_string(), holds.to_string()]);
    }
    Ok(KpScan { table, estimate, weighted })
}

/// Log-spaced densities `10^-6 * 10^(k/10)` up to `hi`.
pub fn kp_grid(hi: f64) -> Vec<f64> {
    (0..).map(|k| 1e-6 * 10f64.powf(k as f64 / 10.0)).take_while(|&p| p <= hi * (1.0 + 1e-9)).collect()
}

/// Checks the condition for every target of size at most `max_target` at
/// density `p`: targets up to size two directly, larger ones through the
/// subadditive bound by singleton sums. Returns the number of direct checks
/// and whether everything held.
pub fn kp_certificate(ctx: &AnnulusContext, weighted: &WeightedPolymers, p: f64, max_target: usize) -> (usize, bool) {
    let singles = weighted.singleton_kp_sums(ctx, p);
    let mut ok = singles.iter().all(|&s| s <= 1.0);
    let mut direct = 0;
    let terms = weighted.kp_terms(p);
    for target in enumerate_polymers(ctx, max_target.min(2)) {
        let sum = weighted.kp_sum_of(&terms, ctx.dependence(target.mask));
        ok &= sum <= target.size() as f64;
        direct += 1;
    }
    (direct, ok)
}

/// Rows `p,polymers,by_vacancy,by_packing,by_exact,violations,worst_exact_ratio`
/// of the bound `|z_W| <= p^(|W| / 2d)`.
pub fn bound_scan(win: &PolymerWindow, max_size: usize, grid: &[f64]) -> Result<Table> {
    ensure!((1..=8).contains(&max_size), "polymer sizes are capped at 8");
    let ctx = win.context()?;
    let tallies = parallel::bound_scan(&ctx, grid, max_size)?;
    let mut t =
        Table::new(&["p", "polymers", "by_vacancy", "by_packing", "by_exact", "violations", "worst_exact_ratio"]);
    for (&p, r) in grid.iter().zip(&tallies) {
        t.push(vec![
            sig12(p),
            r.polymers.to_string(),
            r.by_vacancy.to_string(),
            r.by_packing.to_string(),
            r.by_exact.to_string(),
            r.violations.to_string(),
            sig12(r.worst_exact_ratio),
        ]);
    }
    Ok(t)
}

/// Rows `p,estimate,stderr,exact` of the survival probability of the origin.
/// Grid point `i` uses seed `seed + i`.
pub fn marginal_table(d: usize, grid: &[f64], samples: u64, seed: u64) -> Result<Table> {
    ensure!((1..=3).contains(&d), "marginals are sampled for d in 1..=3");
    let window = Region::centered_cube(d, 3);
    let boundary = Config::vacant(window.outer_boundary());
    let mut t = Table::new(&["p", "estimate", "stderr", "exact"]);
    for (i, &p) in grid.iter().enumerate() {
        let cfg = SamplerConfig {
            p,
            window: window.clone(),
            seed: seed.wrapping_add(i as u64),
            sweeps: 1,
            boundary: boundary.clone(),
        };
        let est = empirical_thinned_marginal(&cfg, &Site::origin(d), samples)?;
        t.push(vec![sig12(p), sig12(est.estimate), sig12(est.stderr), sig12(thinned_marginal_exact(p, d))]);
    }
    Ok(t)
}

/// Rows `sweep,disagreement_fraction` of the coupled vacant/occupied chains.
pub fn coupled_table(p: f64, width: u32, sweeps: usize, seed: u64) -> Result<Table> {
    if sweeps == 0 {
        bail!("at least one sweep is required");
    }
    let annulus = CoupledAnnulus::new(width)?;
    let mut t = Table::new(&["sweep", "disagreement_fraction"]);
    for r in disagreement_experiment(p, &annulus, sweeps, seed)? {
        t.push(vec![r.sweep.to_string(), sig12(r.fraction)]);
    }
    Ok(t)
}
