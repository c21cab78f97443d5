//! Monte Carlo references: Bernoulli fields with thinning, and a heat-bath
//! chain for the first-layer model in domino coordinates.
//!
//! Every random draw comes from a ChaCha8 stream fixed by a 64-bit seed and a
//! stream number, so outputs are reproducible bit for bit.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domino::{kernel_vector, AdmissibilityClass};
use crate::error::{invalid, Error, Result};
use crate::lattice::{is_isolated, Config, Region, Site, UnfixedArea};

/// Generator for `seed` on an independent stream.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub p: f64,
    pub window: Region,
    pub seed: u64,
    pub sweeps: usize,
    /// Values on the outer boundary of the window.
    pub boundary: Config,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid("density must lie in [0, 1]"));
        }
        if self.sweeps == 0 {
            return Err(invalid("at least one sweep is required"));
        }
        Ok(())
    }
}

/// I.i.d. occupation of every window site with probability `p`, in site order.
pub fn sample_bernoulli(cfg: &SamplerConfig) -> Result<Config> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, 0);
    Ok(Config::from_fn(cfg.window.clone(), |_| rng.gen::<f64>() < cfg.p))
}

/// A proportion with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn from_hits(hits: u64, samples: u64) -> Estimate {
        let f = hits as f64 / samples as f64;
        Estimate { estimate: f, stderr: libm::sqrt(f * (1.0 - f) / samples as f64), samples }
    }

    /// `|estimate - exact|` in units of the standard error (a floor of one
    /// over the sample count keeps degenerate estimates finite).
    pub fn deviation(&self, exact: f64) -> f64 {
        let floor = 1.0 / self.samples as f64;
        (self.estimate - exact).abs() / self.stderr.max(floor)
    }
}

/// Fraction of independent samples in which `site` survives thinning. Each
/// sample draws the closed neighbourhood of `site`, which is all the thinned
/// value depends on.
pub fn empirical_thinned_marginal(cfg: &SamplerConfig, site: &Site, samples: u64) -> Result<Estimate> {
    cfg.validate()?;
    if samples == 0 {
        return Err(invalid("at least one sample is required"));
    }
    let mut hood: Vec<Site> = vec![*site];
    hood.extend(site.neighbors());
    if !hood.iter().all(|s| cfg.window.contains(s)) {
        return Err(invalid("the site and its neighbours must be interior to the window"));
    }
    let mut rng = rng_for(cfg.seed, 1);
    let mut hits = 0u64;
    for _ in 0..samples {
        let mut alive = rng.gen::<f64>() < cfg.p;
        for _ in 1..hood.len() {
            // Always draw, so the stream layout does not depend on outcomes.
            if rng.gen::<f64>() < cfg.p {
                alive = false;
            }
        }
        hits += alive as u64;
    }
    Ok(Estimate::from_hits(hits, samples))
}

/// `p (1-p)^(2d)`, the probability that a site survives thinning.
pub fn thinned_marginal_exact(p: f64, d: usize) -> f64 {
    p * crate::bits::powi(1.0 - p, 2 * d as u32)
}

/// Thinned value of `site` from an explicit configuration, for cross-checks.
pub fn thinned_value(omega: &Config, site: &Site) -> Result<bool> {
    is_isolated(site, omega, &Config::vacant(Region::empty(site.dim())))
}

/// Summary of one sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepStats {
    pub sweep: usize,
    /// Fraction of occupied free sites.
    pub density: f64,
    /// Fraction of dominos with both sites occupied.
    pub full_dominos: f64,
}

/// Heat-bath dynamics of the first-layer model on the free sites of `S`.
///
/// Free sites pair into dominos `(2a, y) ~ (2a + 1, y)` along the first axis;
/// each update resamples one domino from the pair weights restricted to the
/// values that leave no free site isolated. Window sites outside `S` are
/// vacant and the outer boundary comes from the configuration.
#[derive(Clone, Debug)]
pub struct DominoChain {
    p: f64,
    /// Occupation of every site the dynamics reads.
    cells: Vec<bool>,
    /// All sites in `cells`: the window and its outer boundary.
    sites: Region,
    free: Region,
    free_index: Vec<usize>,
    dominos: Vec<[usize; 2]>,
    /// Per domino: the constrained sites whose status it can change, each with
    /// its neighbour indices.
    checks: Vec<Vec<(usize, Vec<usize>)>>,
}

fn domino_of(s: &Site) -> (i32, Site) {
    let x = s.coord(0);
    let a = x.div_euclid(2);
    (x - 2 * a, s.shifted(0, -(x - 2 * a)))
}

impl DominoChain {
    pub fn new(p: f64, s: &UnfixedArea, boundary: &Config) -> Result<DominoChain> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("density must lie in [0, 1]"));
        }
        let free = s.sites().clone();
        let mut known: Vec<Site> = s.window().sites().to_vec();
        for x in s.window().outer_boundary().iter() {
            known.push(*x);
        }
        let sites = Region::new(free.dim(), known);
        let mut cells = vec![false; sites.len()];
        for (i, x) in sites.iter().enumerate() {
            if !s.window().contains(x) {
                cells[i] = boundary.get(x).ok_or(Error::UnresolvedNeighbor(*x))?;
            }
        }
        let idx = |x: &Site| sites.index_of(x).ok_or(Error::UnresolvedNeighbor(*x));
        let mut dominos = Vec::new();
        for x in free.iter() {
            let (side, left) = domino_of(x);
            let right = left.shifted(0, 1);
            if !free.contains(&left) || !free.contains(&right) {
                return Err(invalid("free sites must form whole dominos"));
            }
            if side == 0 {
                dominos.push([idx(&left)?, idx(&right)?]);
            }
        }
        let mut checks = Vec::with_capacity(dominos.len());
        for d in &dominos {
            let mut watched: Vec<Site> = Vec::new();
            for &i in d {
                let x = sites.site(i);
                for y in core::iter::once(x).chain(x.neighbors()) {
                    if free.contains(&y) && !watched.contains(&y) {
                        watched.push(y);
                    }
                }
            }
            let mut list = Vec::new();
            for y in watched {
                let nbrs = y.neighbors().map(|n| idx(&n)).collect::<Result<Vec<_>>>()?;
                list.push((idx(&y)?, nbrs));
            }
            checks.push(list);
        }
        let free_index = free.iter().map(idx).collect::<Result<Vec<_>>>()?;
        Ok(DominoChain { p, cells, sites, free, free_index, dominos, checks })
    }

    pub fn domino_count(&self) -> usize {
        self.dominos.len()
    }

    /// Current values of the free sites.
    pub fn state(&self) -> Config {
        let values = self.free_index.iter().map(|&i| self.cells[i]).collect();
        Config::new(self.free.clone(), values).unwrap_or_else(|_| Config::vacant(self.free.clone()))
    }

    /// Value `2 * left + right` of domino `k`.
    pub fn domino_value(&self, k: usize) -> u8 {
        let [l, r] = self.dominos[k];
        (self.cells[l] as u8) << 1 | self.cells[r] as u8
    }

    pub fn set_state(&mut self, omega: &Config) -> Result<()> {
        for (x, &i) in self.free.iter().zip(&self.free_index) {
            self.cells[i] = omega.get(x).ok_or(Error::UnresolvedNeighbor(*x))?;
        }
        Ok(())
    }

    /// The values domino `k` may take given everything else.
    pub fn class(&mut self, k: usize) -> AdmissibilityClass {
        let [l, r] = self.dominos[k];
        let saved = (self.cells[l], self.cells[r]);
        let mut flags = [false; 4];
        for (a, flag) in flags.iter_mut().enumerate() {
            self.cells[l] = a >> 1 & 1 == 1;
            self.cells[r] = a & 1 == 1;
            *flag = self.checks[k].iter().all(|(j, nbrs)| !self.cells[*j] || nbrs.iter().any(|&n| self.cells[n]));
        }
        self.cells[l] = saved.0;
        self.cells[r] = saved.1;
        AdmissibilityClass::from_flags(flags)
    }

    /// Resamples domino `k` by inverting the kernel CDF at `u`.
    pub fn update(&mut self, k: usize, u: f64) -> Result<()> {
        let class = self.class(k);
        let kernel = kernel_vector(self.p, class)?;
        let mut acc = 0.0;
        let mut value = 3u8;
        for (a, &w) in kernel.iter().enumerate() {
            acc += w;
            if u < acc && w > 0.0 {
                value = a as u8;
                break;
            }
        }
        if !class.allows(value) {
            // Rounding left `u` past the last positive entry.
            value = (0..4u8).rev().find(|&a| class.allows(a)).ok_or(Error::EmptyClass)?;
        }
        let [l, r] = self.dominos[k];
        self.cells[l] = value >> 1 & 1 == 1;
        self.cells[r] = value & 1 == 1;
        Ok(())
    }

    /// One raster sweep, one uniform per domino.
    pub fn sweep(&mut self, rng: &mut impl Rng) -> Result<()> {
        for k in 0..self.dominos.len() {
            let u = rng.gen::<f64>();
            self.update(k, u)?;
        }
        Ok(())
    }

    pub fn stats(&self, sweep: usize) -> SweepStats {
        let n = self.free_index.len().max(1) as f64;
        let occupied = self.free_index.iter().filter(|&&i| self.cells[i]).count() as f64;
        let full = (0..self.dominos.len()).filter(|&k| self.domino_value(k) == 3).count() as f64;
        SweepStats { sweep, density: occupied / n, full_dominos: full / self.dominos.len().max(1) as f64 }
    }

    /// Sites the chain reads, free ones included.
    pub fn sites(&self) -> &Region {
        &self.sites
    }
}

/// Runs the chain from the all-vacant state; returns the final configuration
/// and one summary per sweep.
pub fn heat_bath_chain(cfg: &SamplerConfig, s: &UnfixedArea) -> Result<(Config, Vec<SweepStats>)> {
    cfg.validate()?;
    if s.window() != &cfg.window {
        return Err(invalid("the unfixed area must live on the sampler window"));
    }
    let mut chain = DominoChain::new(cfg.p, s, &cfg.boundary)?;
    let mut rng = rng_for(cfg.seed, 2);
    let mut trace = Vec::with_capacity(cfg.sweeps);
    for t in 0..cfg.sweeps {
        chain.sweep(&mut rng)?;
        trace.push(chain.stats(t + 1));
    }
    Ok((chain.state(), trace))
}

/// Empirical frequencies of whole-window configurations along a chain, one
/// count per sweep, with batch-means standard errors.
pub fn stationary_frequencies(cfg: &SamplerConfig, s: &UnfixedArea, batches: usize) -> Result<Vec<(u32, Estimate)>> {
    cfg.validate()?;
    let mut chain = DominoChain::new(cfg.p, s, &cfg.boundary)?;
    let n = chain.free_index.len();
    if n > 16 {
        return Err(Error::WindowTooLarge { free: n, cap: 16 });
    }
    let batches = batches.max(2);
    let per_batch = cfg.sweeps / batches;
    if per_batch == 0 {
        return Err(invalid("fewer sweeps than batches"));
    }
    let mut rng = rng_for(cfg.seed, 3);
    let mut batch_counts = vec![vec![0u64; 1 << n]; batches];
    for counts in batch_counts.iter_mut() {
        for _ in 0..per_batch {
            chain.sweep(&mut rng)?;
            let mask = chain.free_index.iter().enumerate().fold(0u32, |m, (b, &i)| m | (chain.cells[i] as u32) << b);
            counts[mask as usize] += 1;
        }
    }
    let total = (per_batch * batches) as f64;
    let mut out = Vec::with_capacity(1 << n);
    for mask in 0..(1u32 << n) {
        let means: Vec<f64> = batch_counts.iter().map(|c| c[mask as usize] as f64 / per_batch as f64).collect();
        let mean = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (batches - 1) as f64;
        out.push((mask, Estimate { estimate: mean, stderr: libm::sqrt(var / batches as f64), samples: total as u64 }));
    }
    Ok(out)
}

/// Disagreement between the coupled chains after one sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisagreementRecord {
    pub sweep: usize,
    pub fraction: f64,
}

/// Annulus geometry for the coupled experiment in `d = 2`: dominos around the
/// centre domino at the origin, with the watched set made of the centre and
/// its nearest dependence classes.
#[derive(Clone, Debug)]
pub struct CoupledAnnulus {
    pub window: Region,
    /// Left sites of the watched dominos.
    pub watched: Vec<Site>,
}

impl CoupledAnnulus {
    /// Window `[-2m, 1 + 2m] x [-w, w]` with `m = ceil(w / 2)`.
    pub fn new(width: u32) -> Result<CoupledAnnulus> {
        if width == 0 {
            return Err(invalid("annulus width must be positive"));
        }
        let w = width as i32;
        let m = (w + 1) / 2;
        let window = Region::cuboid(&[-2 * m, -w], &[1 + 2 * m, w]);
        let mut watched = vec![Site::origin(2)];
        for o in crate::domino::dependence_set(2)? {
            if matches!(o.class, crate::domino::DependenceClass::V1 | crate::domino::DependenceClass::V2) {
                watched.push(Site::new(&[2 * o.offset.coord(0), o.offset.coord(1)]));
            }
        }
        Ok(CoupledAnnulus { window, watched })
    }
}

/// Runs two chains that share every uniform, one with a vacant and one with
/// an occupied outer boundary, both started all vacant, and records the
/// fraction of watched dominos on which they differ after each sweep.
pub fn disagreement_experiment(p: f64, annulus: &CoupledAnnulus, sweeps: usize, seed: u64) -> Result<Vec<DisagreementRecord>> {
    let outer = annulus.window.outer_boundary();
    disagreement_between(p, annulus, sweeps, seed, &Config::vacant(outer.clone()), &Config::filled(outer))
}

/// Same as [`disagreement_experiment`] with explicit boundaries.
pub fn disagreement_between(
    p: f64,
    annulus: &CoupledAnnulus,
    sweeps: usize,
    seed: u64,
    first: &Config,
    second: &Config,
) -> Result<Vec<DisagreementRecord>> {
    let s = UnfixedArea::full(annulus.window.clone());
    let mut a = DominoChain::new(p, &s, first)?;
    let mut b = DominoChain::new(p, &s, second)?;
    let watched: Vec<usize> = annulus
        .watched
        .iter()
        .map(|x| {
            let i = a.sites.index_of(x).ok_or(Error::NotInUnfixedArea(*x))?;
            a.dominos.iter().position(|d| d[0] == i).ok_or(Error::NotInUnfixedArea(*x))
        })
        .collect::<Result<_>>()?;
    let mut ra = rng_for(seed, 4);
    let mut rb = rng_for(seed, 4);
    let mut out = Vec::with_capacity(sweeps);
    for t in 0..sweeps {
        a.sweep(&mut ra)?;
        b.sweep(&mut rb)?;
        let differ = watched.iter().filter(|&&k| a.domino_value(k) != b.domino_value(k)).count();
        out.push(DisagreementRecord { sweep: t + 1, fraction: differ as f64 / watched.len() as f64 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = rng_for(7, 0).gen();
        let b: u64 = rng_for(7, 1).gen();
        let c: u64 = rng_for(7, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn chain_never_leaves_feasible_states() {
        let window = Region::cuboid(&[0, 0], &[3, 2]);
        let s = UnfixedArea::full(window.clone());
        let boundary = Config::checkerboard(window.outer_boundary());
        let mut chain = DominoChain::new(0.4, &s, &boundary).unwrap();
        let mut rng = rng_for(3, 0);
        for _ in 0..200 {
            chain.sweep(&mut rng).unwrap();
            let state = chain.state();
            for x in window.iter() {
                let full = state.concat(&boundary).unwrap();
                assert!(!is_isolated(x, &full, &Config::vacant(Region::empty(2))).unwrap());
            }
        }
    }

    #[test]
    fn coupled_annulus_geometry() {
        let a = CoupledAnnulus::new(6).unwrap();
        assert_eq!(a.window.len(), 14 * 13);
        // Centre plus the two side and the two axial neighbours.
        assert_eq!(a.watched.len(), 1 + 2 + 2);
    }
}
