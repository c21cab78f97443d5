//! Exact enumeration over occupancy configurations.
//!
//! Every quantity is first reduced to integer occupancy counts `N_k` (the
//! number of admissible assignments with `k` occupied free sites) and only then
//! evaluated as `sum_k N_k p^k (1-p)^(M-k)`. One enumeration therefore serves a
//! whole grid of densities, and two routes to the same probability can be
//! compared as exact polynomials.

use alloc::vec;
use alloc::vec::Vec;

use crate::bits::{binomial, powi};
use crate::error::{invalid, Error, Result};
use crate::lattice::{check_admissible, Config, Region, Site, UnfixedArea};

/// Largest number of free sites an enumeration will accept.
pub const MAX_FREE_SITES: usize = 28;

/// Configurations per enumeration chunk (as a power of two).
pub const CHUNK_BITS: u32 = 16;

/// Integer counts of admissible configurations by occupation number.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OccupancyCounts {
    counts: Vec<u128>,
}

impl OccupancyCounts {
    /// All-zero counts over `free` sites.
    pub fn zeros(free: usize) -> OccupancyCounts {
        OccupancyCounts { counts: vec![0; free + 1] }
    }

    /// The counts of the empty window: a single configuration.
    pub fn unit() -> OccupancyCounts {
        OccupancyCounts { counts: vec![1] }
    }

    pub fn from_counts(counts: Vec<u128>) -> Result<OccupancyCounts> {
        if counts.is_empty() {
            return Err(invalid("count vector needs at least one entry"));
        }
        Ok(OccupancyCounts { counts })
    }

    /// Number of free sites `M`.
    pub fn free_sites(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn counts(&self) -> &[u128] {
        &self.counts
    }

    pub fn total(&self) -> u128 {
        self.counts.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// `sum_k N_k p^k (1-p)^(M-k)`.
    pub fn evaluate(&self, p: f64) -> f64 {
        let m = self.free_sites() as u32;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n != 0)
            .map(|(k, &n)| n as f64 * powi(p, k as u32) * powi(1.0 - p, m - k as u32))
            .sum()
    }

    pub fn add_assign(&mut self, other: &OccupancyCounts) {
        assert_eq!(self.counts.len(), other.counts.len(), "count vectors over different windows");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Counts of the product event over the disjoint union of both windows.
    pub fn convolve(&self, other: &OccupancyCounts) -> OccupancyCounts {
        let mut out = vec![0u128; self.counts.len() + other.counts.len() - 1];
        for (i, &a) in self.counts.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.counts.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        OccupancyCounts { counts: out }
    }

    /// The same event seen on a window with `extra` further unconstrained sites.
    pub fn widen(&self, extra: usize) -> OccupancyCounts {
        let free = OccupancyCounts { counts: (0..=extra).map(|k| binomial(extra, k)).collect() };
        self.convolve(&free)
    }

    /// Coefficients of the polynomial in `p` (power basis, constant first).
    pub fn to_power_basis(&self) -> Vec<i128> {
        let m = self.free_sites();
        let mut out = vec![0i128; m + 1];
        for (k, &n) in self.counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let n = i128::try_from(n).expect("count exceeds i128");
            for j in 0..=(m - k) {
                let c = i128::try_from(binomial(m - k, j)).expect("binomial exceeds i128");
                let term = n.checked_mul(c).expect("power-basis coefficient overflow");
                if j % 2 == 0 {
                    out[k + j] += term;
                } else {
                    out[k + j] -= term;
                }
            }
        }
        out
    }
}

/// Product of two power-basis polynomials. Panics on `i128` overflow.
pub fn poly_mul(a: &[i128], b: &[i128]) -> Vec<i128> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0i128; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            let t = x.checked_mul(y).expect("polynomial product overflow");
            out[i + j] = out[i + j].checked_add(t).expect("polynomial sum overflow");
        }
    }
    out
}

/// Polynomial equality ignoring trailing zero coefficients.
pub fn poly_eq(a: &[i128], b: &[i128]) -> bool {
    let n = a.len().max(b.len());
    (0..n).all(|i| a.get(i).copied().unwrap_or(0) == b.get(i).copied().unwrap_or(0))
}

/// One isolation requirement: `site` must be (or must not be) an isolated
/// occupied site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Requirement {
    pub site: Site,
    pub isolated: bool,
}

impl Requirement {
    pub fn isolated(site: Site) -> Requirement {
        Requirement { site, isolated: true }
    }

    pub fn not_isolated(site: Site) -> Requirement {
        Requirement { site, isolated: false }
    }
}

/// A compiled requirement: the site is isolated in `cfg` iff every bit of
/// `own` is set and no bit of `nbrs` is.
#[derive(Clone, Copy, Debug)]
struct Clause {
    own: u32,
    nbrs: u32,
    want: bool,
}

impl Clause {
    #[inline(always)]
    fn holds(&self, cfg: u32) -> bool {
        ((cfg & self.own == self.own) && (cfg & self.nbrs == 0)) == self.want
    }
}

#[derive(Clone, Debug, Default)]
struct ClauseSet {
    clauses: Vec<Clause>,
    unsat: bool,
}

impl ClauseSet {
    #[inline(always)]
    fn holds(&self, cfg: u32) -> bool {
        !self.unsat && self.clauses.iter().all(|c| c.holds(cfg))
    }
}

/// Counts for a base requirement set and for base plus extra requirements,
/// gathered in one pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairCounts {
    pub base: OccupancyCounts,
    pub both: OccupancyCounts,
}

impl PairCounts {
    pub fn zeros(free: usize) -> PairCounts {
        PairCounts { base: OccupancyCounts::zeros(free), both: OccupancyCounts::zeros(free) }
    }

    pub fn merge(mut self, other: &PairCounts) -> PairCounts {
        self.base.add_assign(&other.base);
        self.both.add_assign(&other.both);
        self
    }
}

/// A compiled enumeration: free sites, fixed values around them and two
/// requirement sets. The configuration space is split into chunks of
/// `2^CHUNK_BITS` that can be counted independently and summed.
#[derive(Clone, Debug)]
pub struct CountPlan {
    free: Region,
    base: ClauseSet,
    extra: ClauseSet,
}

impl CountPlan {
    /// Compiles a plan. Values of sites outside `free` are read from `fixed`.
    pub fn new(free: &Region, fixed: &Config, base: &[Requirement], extra: &[Requirement]) -> Result<CountPlan> {
        Self::with_cap(free, fixed, base, extra, MAX_FREE_SITES)
    }

    pub fn with_cap(
        free: &Region,
        fixed: &Config,
        base: &[Requirement],
        extra: &[Requirement],
        cap: usize,
    ) -> Result<CountPlan> {
        let cap = cap.min(32);
        if free.len() > cap {
            return Err(Error::WindowTooLarge { free: free.len(), cap });
        }
        Ok(CountPlan {
            free: free.clone(),
            base: compile(free, fixed, base)?,
            extra: compile(free, fixed, extra)?,
        })
    }

    pub fn free_sites(&self) -> &Region {
        &self.free
    }

    fn space(&self) -> u64 {
        1u64 << self.free.len()
    }

    pub fn chunk_count(&self) -> usize {
        self.space().div_ceil(1 << CHUNK_BITS) as usize
    }

    /// Counts over configurations `chunk * 2^CHUNK_BITS ..` of the bitmask space
    /// (bit `i` is the occupancy of `free.site(i)`).
    pub fn count_chunk(&self, chunk: usize) -> PairCounts {
        let m = self.free.len();
        let mut out = PairCounts::zeros(m);
        if self.base.unsat {
            return out;
        }
        let start = (chunk as u64) << CHUNK_BITS;
        let end = (start + (1 << CHUNK_BITS)).min(self.space());
        let mut base = vec![0u128; m + 1];
        let mut both = vec![0u128; m + 1];
        for cfg in start..end {
            let cfg = cfg as u32;
            if self.base.holds(cfg) {
                let k = cfg.count_ones() as usize;
                base[k] += 1;
                if self.extra.holds(cfg) {
                    both[k] += 1;
                }
            }
        }
        out.base.counts = base;
        out.both.counts = both;
        out
    }

    /// Sequential count over the whole space.
    pub fn count(&self) -> PairCounts {
        (0..self.chunk_count()).fold(PairCounts::zeros(self.free.len()), |acc, c| acc.merge(&self.count_chunk(c)))
    }

    /// Whether a single configuration (as a bitmask over the free sites)
    /// satisfies the base and the extra requirements.
    pub fn check(&self, cfg: u32) -> (bool, bool) {
        let b = self.base.holds(cfg);
        (b, b && self.extra.holds(cfg))
    }

    /// Base-requirement counts split by the values on `pattern` (indices into
    /// the free sites); entry `b` collects configurations whose pattern bits
    /// read `b`, counted over the remaining free sites.
    pub fn count_by_pattern(&self, pattern: &[usize]) -> Vec<OccupancyCounts> {
        let m = self.free.len();
        let rest = m - pattern.len();
        let mut out = vec![OccupancyCounts::zeros(rest); 1 << pattern.len()];
        if self.base.unsat {
            return out;
        }
        for cfg in 0..self.space() {
            let cfg = cfg as u32;
            if self.base.holds(cfg) {
                let mut b = 0usize;
                let mut in_pattern = 0u32;
                for (t, &i) in pattern.iter().enumerate() {
                    b |= ((cfg >> i & 1) as usize) << t;
                    in_pattern += cfg >> i & 1;
                }
                out[b].counts[(cfg.count_ones() - in_pattern) as usize] += 1;
            }
        }
        out
    }
}

fn compile(free: &Region, fixed: &Config, reqs: &[Requirement]) -> Result<ClauseSet> {
    let value = |s: &Site| -> Result<core::result::Result<u32, bool>> {
        match free.index_of(s) {
            Some(i) => Ok(Ok(1 << i)),
            None => fixed.get(s).map(Err).ok_or(Error::UnresolvedNeighbor(*s)),
        }
    };
    let mut set = ClauseSet::default();
    for r in reqs {
        let own = value(&r.site)?;
        let mut nbrs = 0u32;
        let mut blocked = false;
        for n in r.site.neighbors() {
            match value(&n)? {
                Ok(bit) => nbrs |= bit,
                Err(occupied) => blocked |= occupied,
            }
        }
        let own = match own {
            Ok(bit) => bit,
            Err(true) => 0,
            Err(false) => {
                blocked = true;
                0
            }
        };
        if blocked {
            // The site can never be isolated.
            if r.isolated {
                set.unsat = true;
            }
            continue;
        }
        set.clauses.push(Clause { own, nbrs, want: r.isolated });
    }
    Ok(set)
}

/// Counts of assignments on `free` that are feasible on `constraint`: every
/// occupied constraint site has an occupied neighbour. Values outside `free`
/// come from `boundary`.
pub fn count_feasible(free: &Region, constraint: &Region, boundary: &Config) -> Result<OccupancyCounts> {
    let reqs: Vec<Requirement> = constraint.iter().map(|s| Requirement::not_isolated(*s)).collect();
    Ok(CountPlan::new(free, boundary, &reqs, &[])?.count().base)
}

/// The constrained Bernoulli mass `sum_w mu_p(w) 1{feasible}`.
pub fn partition_function(p: f64, free: &Region, constraint: &Region, boundary: &Config) -> Result<f64> {
    Ok(count_feasible(free, constraint, boundary)?.evaluate(p))
}

/// The first-layer model on `delta`: its free sites are `delta ∩ S`, every
/// free site must be feasible, sites of the window outside `S` are vacant and
/// the values of `S` beyond `delta` come from `exterior`.
#[derive(Clone, Debug)]
pub struct FirstLayer {
    plan: CountPlan,
    counts: OccupancyCounts,
}

impl FirstLayer {
    pub fn new(delta: &Region, s: &UnfixedArea, exterior: &Config) -> Result<FirstLayer> {
        let free = delta.intersection(s.sites());
        let mut fixed = exterior.clone();
        for site in free.iter() {
            for n in site.neighbors() {
                if free.contains(&n) || fixed.get(&n).is_some() {
                    continue;
                }
                if s.window().contains(&n) && !s.contains(&n) {
                    fixed = fixed.concat(&Config::vacant(Region::singleton(n)))?;
                } else {
                    return Err(Error::UnresolvedNeighbor(n));
                }
            }
        }
        let reqs: Vec<Requirement> = free.iter().map(|s| Requirement::not_isolated(*s)).collect();
        let plan = CountPlan::new(&free, &fixed, &reqs, &[])?;
        let counts = plan.count().base;
        Ok(FirstLayer { plan, counts })
    }

    pub fn free_sites(&self) -> &Region {
        self.plan.free_sites()
    }

    /// Counts of the normalising sum.
    pub fn counts(&self) -> &OccupancyCounts {
        &self.counts
    }

    /// Kernel probability of `omega` (a configuration on the free sites).
    pub fn probability(&self, p: f64, omega: &Config) -> Result<f64> {
        if omega.region() != self.free_sites() {
            return Err(invalid("configuration must live on the free sites of the kernel"));
        }
        let z = self.counts.evaluate(p);
        if z <= 0.0 {
            return Err(Error::NoFeasibleConfiguration);
        }
        let mask = omega.values().iter().enumerate().fold(0u32, |m, (i, &o)| m | (o as u32) << i);
        if !self.plan.check(mask).0 {
            return Ok(0.0);
        }
        let k = mask.count_ones();
        let m = self.free_sites().len() as u32;
        Ok(powi(p, k) * powi(1.0 - p, m - k) / z)
    }
}

/// Single-configuration kernel of the first-layer model, see [`FirstLayer`].
pub fn first_layer_kernel(p: f64, delta: &Region, s: &UnfixedArea, omega: &Config, exterior: &Config) -> Result<f64> {
    FirstLayer::new(delta, s, exterior)?.probability(p, omega)
}

/// Counts behind the local function `F[image](boundary)`: assignments of the
/// interior of `lambda` under which the thinned field on `lambda` equals
/// `image`, given values on the thick boundary.
pub fn local_function_counts(image: &Config, thick_boundary: &Config) -> Result<OccupancyCounts> {
    let lambda = image.region();
    let interior = lambda.interior();
    let reqs: Vec<Requirement> = lambda
        .iter()
        .zip(image.values())
        .map(|(s, &v)| Requirement { site: *s, isolated: v })
        .collect();
    Ok(CountPlan::new(&interior, thick_boundary, &reqs, &[])?.count().base)
}

/// The local function `F[image](boundary)` at density `p`. For a region with
/// empty interior this is the indicator that the boundary already realises
/// `image`.
pub fn local_function(p: f64, image: &Config, thick_boundary: &Config) -> Result<f64> {
    Ok(local_function_counts(image, thick_boundary)?.evaluate(p))
}

/// Probability of the thinned field on `lambda` given the thinned field on
/// `delta \ lambda` and a raw exterior configuration on the outer boundary of
/// `delta`.
#[derive(Clone, Debug)]
pub struct ConditionalQuery {
    pub lambda: Region,
    pub delta: Region,
    /// The thinned configuration on all of `delta`.
    pub image: Config,
    /// Raw occupancies on the outer boundary of `delta`.
    pub exterior: Config,
}

impl ConditionalQuery {
    fn validate(&self) -> Result<()> {
        if self.image.region() != &self.delta {
            return Err(invalid("thinned configuration must cover the window exactly"));
        }
        if !self.lambda.extension().is_subset(&self.delta) {
            return Err(invalid("the extension of the inner region must lie inside the window"));
        }
        if !self.delta.outer_boundary().is_subset(self.exterior.region()) {
            let missing = self.delta.outer_boundary().difference(self.exterior.region()).site(0);
            return Err(Error::UnresolvedNeighbor(missing));
        }
        check_admissible(&self.image)
    }

    fn requirements(&self, sites: &Region) -> Vec<Requirement> {
        sites
            .iter()
            .map(|s| Requirement { site: *s, isolated: self.image.get(s).unwrap_or(false) })
            .collect()
    }

    /// Enumeration plan over the whole window: the base requirements encode the
    /// annulus event, the extra ones the event on `lambda`.
    pub fn direct_plan(&self) -> Result<CountPlan> {
        self.validate()?;
        let annulus = self.delta.difference(&self.lambda);
        CountPlan::new(
            &self.delta,
            &self.exterior,
            &self.requirements(&annulus),
            &self.requirements(&self.lambda),
        )
    }

    /// Numerator and denominator counts by enumerating the raw field on the
    /// whole window.
    pub fn direct_counts(&self) -> Result<ConditionalCounts> {
        ConditionalCounts::from_pair(self.direct_plan()?.count())
    }

    /// Numerator and denominator counts via the first-layer model on the
    /// unfixed area, with the local function `F` integrated over the interior
    /// of `lambda`.
    pub fn kernel_counts(&self) -> Result<ConditionalCounts> {
        self.validate()?;
        let closure = self.delta.extension();
        let interior = self.lambda.interior();
        let inner = self.lambda.inner_boundary();
        let annulus_image = self.image.restrict(&self.delta.difference(&self.lambda));
        let centres: Vec<Site> = annulus_image.occupied_sites().collect();
        let fixed_area = closure.filter(|s| centres.iter().any(|c| c == s || c.is_adjacent(s)));
        let forced = Config::from_fn(fixed_area.clone(), |s| centres.contains(s));
        let s_area = closure.difference(&interior).difference(&fixed_area);

        // The exterior must agree with the forced values it touches.
        for site in fixed_area.difference(&self.delta).iter() {
            if self.exterior.get(site) != forced.get(site) {
                return Err(Error::IllegitimateBoundary);
            }
        }

        let free = self.delta.intersection(&s_area);
        let constraint = free.difference(&inner);
        let fixed = forced
            .restrict(&self.delta)
            .concat(&self.exterior.restrict(&s_area))?
            .concat(&Config::vacant(interior.clone()))?;
        let reqs: Vec<Requirement> = constraint.iter().map(|s| Requirement::not_isolated(*s)).collect();
        let plan = CountPlan::new(&free, &fixed, &reqs, &[])?;

        let thick = self.lambda.thick_boundary();
        let pattern_sites: Vec<Site> = thick.iter().filter(|s| free.contains(s)).copied().collect();
        let pattern: Vec<usize> = pattern_sites.iter().map(|s| free.index_of(s).unwrap_or(0)).collect();
        let by_pattern = plan.count_by_pattern(&pattern);

        let lambda_image = self.image.restrict(&self.lambda);
        let outside = self.exterior.concat(&forced)?;
        let mut numerator = OccupancyCounts::zeros(free.len() + interior.len());
        let mut denominator = OccupancyCounts::zeros(free.len());
        for (b, counts) in by_pattern.iter().enumerate() {
            if counts.is_zero() {
                continue;
            }
            let boundary = Config::from_fn(thick.clone(), |s| match pattern_sites.iter().position(|t| t == s) {
                Some(t) => b >> t & 1 == 1,
                None => outside.get(s).unwrap_or(false),
            });
            let f = local_function_counts(&lambda_image, &boundary)?;
            let pattern_ones = b.count_ones() as usize;
            // Re-attach the pattern sites to the counts before multiplying.
            let mut lifted = OccupancyCounts::zeros(free.len());
            for (k, &n) in counts.counts().iter().enumerate() {
                lifted.counts[k + pattern_ones] += n;
            }
            denominator.add_assign(&lifted);
            numerator.add_assign(&lifted.convolve(&f));
        }
        if denominator.is_zero() {
            return Err(Error::IllegitimateBoundary);
        }
        Ok(ConditionalCounts { numerator, denominator })
    }

    /// The conditional probability by direct enumeration.
    pub fn probability(&self, p: f64) -> Result<f64> {
        self.direct_counts()?.evaluate(p)
    }
}

/// A conditional probability as a ratio of two count vectors (possibly over
/// windows of different sizes).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionalCounts {
    pub numerator: OccupancyCounts,
    pub denominator: OccupancyCounts,
}

impl ConditionalCounts {
    /// Takes base counts as the denominator and base-plus-extra counts as the
    /// numerator; refuses an annulus event with no preimage.
    pub fn from_pair(pair: PairCounts) -> Result<ConditionalCounts> {
        if pair.base.is_zero() {
            return Err(Error::IllegitimateBoundary);
        }
        Ok(ConditionalCounts { numerator: pair.both, denominator: pair.base })
    }

    pub fn evaluate(&self, p: f64) -> Result<f64> {
        let den = self.denominator.evaluate(p);
        if den <= 0.0 {
            return Err(Error::ZeroDenominator(p));
        }
        Ok(self.numerator.evaluate(p) / den)
    }

    /// Whether two ratios agree as rational functions of `p`.
    pub fn same_ratio(&self, other: &ConditionalCounts) -> bool {
        let lhs = poly_mul(&self.numerator.to_power_basis(), &other.denominator.to_power_basis());
        let rhs = poly_mul(&other.numerator.to_power_basis(), &self.denominator.to_power_basis());
        poly_eq(&lhs, &rhs)
    }
}

/// Conditional probability of a thinned configuration (direct enumeration).
pub fn conditional_probability(query: &ConditionalQuery, p: f64) -> Result<f64> {
    query.probability(p)
}

/// Thinned configuration on the annulus of a box experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnnulusPattern {
    /// No thinned particles.
    Zero,
    /// Particles on every site with even coordinate sum (the parity of the
    /// origin), except inside the inner region.
    Checkerboard,
}

/// Raw exterior used around the box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exterior {
    Vacant,
    /// Occupied on every outer site that is not adjacent to a thinned
    /// particle of the window (those must stay vacant for any preimage).
    Occupied,
}

/// The box experiment: origin as the inner region, a centred cube of side `k`
/// as the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoxExperiment {
    pub dim: usize,
    pub side: usize,
    /// Thinned value asked for at the origin.
    pub center: bool,
    pub annulus: AnnulusPattern,
}

impl BoxExperiment {
    pub fn query(&self, exterior: Exterior) -> ConditionalQuery {
        let delta = Region::centered_cube(self.dim, self.side);
        let origin = Site::origin(self.dim);
        let lambda = Region::singleton(origin);
        let image = Config::from_fn(delta.clone(), |s| {
            if *s == origin {
                self.center
            } else {
                self.annulus == AnnulusPattern::Checkerboard && !s.is_odd()
            }
        });
        let ring = delta.outer_boundary();
        let exterior = match exterior {
            Exterior::Vacant => Config::vacant(ring),
            Exterior::Occupied => Config::from_fn(ring, |s| s.neighbors().all(|n| image.get(&n) != Some(true))),
        };
        ConditionalQuery { lambda, delta, image, exterior }
    }
}

/// One row of a box sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub value_vacant: f64,
    pub value_occupied: f64,
    /// `value_vacant - value_occupied`.
    pub difference: f64,
}

/// Evaluates the two boundary conditions of a box experiment on a density
/// grid, given their counts. Endpoints with a vanishing denominator are
/// reported through the error.
pub fn sweep_rows(vacant: &ConditionalCounts, occupied: &ConditionalCounts, grid: &[f64]) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|&p| {
            let a = vacant.evaluate(p)?;
            let b = occupied.evaluate(p)?;
            Ok(SweepRow { p, value_vacant: a, value_occupied: b, difference: a - b })
        })
        .collect()
}

/// Sequential box sweep (both boundary conditions counted once).
pub fn boundary_sweep(exp: &BoxExperiment, grid: &[f64]) -> Result<Vec<SweepRow>> {
    let vacant = exp.query(Exterior::Vacant).direct_counts()?;
    let occupied = exp.query(Exterior::Occupied).direct_counts()?;
    sweep_rows(&vacant, &occupied, grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: i32, b: i32) -> Region {
        Region::cuboid(&[a], &[b])
    }

    #[test]
    fn two_site_counts() {
        let free = Region::cuboid(&[0, 0], &[1, 0]);
        let bnd = Config::vacant(free.outer_boundary());
        let c = count_feasible(&free, &free, &bnd).unwrap();
        assert_eq!(c.counts(), &[1, 0, 1]);
        for p in [0.1, 0.5, 0.77] {
            assert!((c.evaluate(p) - (p * p + (1.0 - p) * (1.0 - p))).abs() < 1e-15);
        }
        assert_eq!(c.evaluate(0.5), 0.5);
    }

    #[test]
    fn everything_feasible_next_to_occupied_pairs() {
        // Each site of the free line has an occupied neighbour in the boundary.
        let free = Region::cuboid(&[0, 0], &[2, 0]);
        let bnd = Config::from_fn(free.outer_boundary(), |s| s.coord(1) == 1);
        assert!((partition_function(0.37, &free, &free, &bnd).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn window_cap_is_enforced() {
        let free = line(0, 28);
        let bnd = Config::vacant(free.outer_boundary());
        assert_eq!(
            count_feasible(&free, &free, &bnd),
            Err(Error::WindowTooLarge { free: 29, cap: MAX_FREE_SITES })
        );
    }

    #[test]
    fn chunks_sum_to_the_whole() {
        let free = line(0, 17);
        let bnd = Config::vacant(free.outer_boundary());
        let reqs: Vec<_> = free.iter().map(|s| Requirement::not_isolated(*s)).collect();
        let plan = CountPlan::new(&free, &bnd, &reqs, &[]).unwrap();
        assert_eq!(plan.chunk_count(), 4);
        let whole = plan.count();
        assert_eq!(whole.base.total(), {
            // Binary strings without an isolated one: a transfer recursion.
            let mut state = [1u128, 0, 0]; // last bit 0 / last 1 in a run of one / run of >= 2
            for _ in 0..18 {
                state = [state[0] + state[2], state[0], state[1] + state[2]];
            }
            state[0] + state[2]
        });
    }

    #[test]
    fn power_basis_and_widening() {
        let c = OccupancyCounts::from_counts(vec![1, 0, 1]).unwrap();
        assert_eq!(c.to_power_basis(), vec![1, -2, 2]);
        let w = c.widen(2);
        for p in [0.2, 0.6] {
            assert!((w.evaluate(p) - c.evaluate(p)).abs() < 1e-15);
        }
        assert!(poly_eq(&w.to_power_basis(), &[1, -2, 2]));
    }

    #[test]
    fn two_site_kernel() {
        let delta = Region::cuboid(&[0, 0], &[1, 0]);
        let s = UnfixedArea::full(delta.clone());
        let ext = Config::vacant(delta.outer_boundary());
        let layer = FirstLayer::new(&delta, &s, &ext).unwrap();
        let p = 0.6;
        let both = Config::filled(delta.clone());
        let one = Config::with_occupied(delta.clone(), &[Site::new(&[0, 0])]);
        let z = p * p + (1.0 - p) * (1.0 - p);
        assert!((layer.probability(p, &both).unwrap() - p * p / z).abs() < 1e-15);
        assert_eq!(layer.probability(p, &one).unwrap(), 0.0);
    }

    #[test]
    fn local_function_for_a_singleton_is_an_indicator() {
        let lambda = Region::singleton(Site::origin(2));
        let on = Config::filled(lambda.clone());
        let thick = lambda.thick_boundary();
        let vacant = Config::vacant(thick.clone());
        assert_eq!(local_function(0.3, &on, &vacant).unwrap(), 0.0);
        let centre_only = Config::with_occupied(thick.clone(), &[Site::origin(2)]);
        assert_eq!(local_function(0.3, &on, &centre_only).unwrap(), 1.0);
    }

    #[test]
    fn local_function_on_a_three_box_with_full_boundary() {
        let lambda = Region::centered_cube(2, 3);
        let image = Config::vacant(lambda.clone());
        let full = Config::filled(lambda.thick_boundary());
        let f = local_function_counts(&image, &full).unwrap();
        assert_eq!(f.counts(), &[1, 1]);
        assert!((f.evaluate(0.4) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn checkerboard_annulus_is_boundary_blind() {
        let exp = BoxExperiment { dim: 2, side: 3, center: true, annulus: AnnulusPattern::Checkerboard };
        for p in [0.2, 0.5, 0.9] {
            let a = exp.query(Exterior::Vacant).probability(p).unwrap();
            let b = exp.query(Exterior::Occupied).probability(p).unwrap();
            assert!((a - p).abs() < 1e-14 && (b - p).abs() < 1e-14);
        }
    }
}
