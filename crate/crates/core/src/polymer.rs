//! Polymer representation of the first-layer partition function on an annulus.
//!
//! The annulus context fixes a window `Delta`, an inner region `Lambda`, an
//! unfixed area `S`, values on the thick boundary of `Lambda` and raw values
//! on the outer boundary of `Delta`. The random sites are
//! `Y = (Delta \ closure(Lambda)) ∩ S`; every other site of the closure of
//! `Delta` carries a fixed value (sites outside `S` are vacant). Witnesses,
//! the sites whose isolation is forbidden, form `K = (Delta \ Lambda) ∩ S`.
//!
//! For `i` in `Y`, `J_i` is the event that some witness neighbour of `i` is
//! an isolated occupied site. Polymers are subsets of `Y` connected under
//! `d_S <= 4`; the weight of `W` is `(-1)^|W| P(J_i for all i in W)`.
//!
//! Site sets are `u128` masks over the closure, indexed like
//! [`AnnulusContext::closure`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::bits::{binomial, ones, powi, Scatter};
use crate::error::{invalid, Error, Result};
use crate::exact::{count_feasible, poly_eq, poly_mul, OccupancyCounts};
use crate::lattice::{Config, Region, Site, UnfixedArea};

/// Largest dependence window the brute-force weight accepts.
pub const MAX_WEIGHT_WINDOW: usize = 26;

/// Largest random set for which the partition identity is checked.
pub const MAX_IDENTITY_SITES: usize = 22;

/// Connectivity radius of polymers.
pub const CONNECTION_RADIUS: u32 = 4;

/// Radius of the dependence set around each polymer site.
pub const DEPENDENCE_RADIUS: u32 = 2;

/// Value of a closure site.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteStatus {
    Random,
    Fixed(bool),
}

#[derive(Clone, Debug)]
pub struct AnnulusContext {
    dim: usize,
    closure: Region,
    status: Vec<SiteStatus>,
    random: u128,
    witness: u128,
    in_s: u128,
    fixed_occ: u128,
    fixed_vac: u128,
    nbr: Vec<u128>,
    ball2: Vec<u128>,
    ball4: Vec<u128>,
    inner_boundary: u128,
    inner_outer_boundary: u128,
}

fn bit(i: usize) -> u128 {
    1u128 << i
}

impl AnnulusContext {
    /// Builds the context. `inner` must give values on the thick boundary of
    /// `lambda` (restricted to `S`), `outer` on the outer boundary of `delta`.
    pub fn new(delta: &Region, lambda: &Region, s: &UnfixedArea, inner: &Config, outer: &Config) -> Result<Self> {
        let dim = delta.dim();
        if !lambda.extension().is_subset(delta) && !lambda.is_empty() {
            return Err(invalid("the extension of the inner region must lie inside the window"));
        }
        let closure = delta.extension();
        if closure.len() > 128 {
            return Err(Error::WindowTooLarge { free: closure.len(), cap: 128 });
        }
        let in_s_site = |x: &Site| s.contains(x) || (!s.window().contains(x) && outer.region().contains(x));
        let thick = lambda.thick_boundary();
        let lambda_closure = lambda.extension();
        let interior = lambda.interior();
        let mut status = Vec::with_capacity(closure.len());
        let (mut random, mut witness, mut in_s, mut fixed_occ, mut fixed_vac) = (0u128, 0u128, 0u128, 0u128, 0u128);
        for (i, x) in closure.iter().enumerate() {
            let here_s = in_s_site(x) && !interior.contains(x);
            let st = if !here_s {
                SiteStatus::Fixed(false)
            } else if !delta.contains(x) {
                SiteStatus::Fixed(outer.get(x).ok_or(Error::UnresolvedNeighbor(*x))?)
            } else if thick.contains(x) {
                SiteStatus::Fixed(inner.get(x).ok_or(Error::UnresolvedNeighbor(*x))?)
            } else if lambda_closure.contains(x) {
                SiteStatus::Fixed(false)
            } else {
                SiteStatus::Random
            };
            if here_s {
                in_s |= bit(i);
                if delta.contains(x) && !lambda.contains(x) {
                    witness |= bit(i);
                }
            }
            match st {
                SiteStatus::Random => random |= bit(i),
                SiteStatus::Fixed(true) => fixed_occ |= bit(i),
                SiteStatus::Fixed(false) => fixed_vac |= bit(i),
            }
            status.push(st);
        }
        let nbr: Vec<u128> = closure
            .iter()
            .map(|x| x.neighbors().filter_map(|n| closure.index_of(&n)).fold(0u128, |m, j| m | bit(j)))
            .collect();
        // Distances inside S, restricted to the closure.
        let ball = |radius: u32| -> Vec<u128> {
            (0..closure.len())
                .map(|i| {
                    if in_s & bit(i) == 0 {
                        return 0;
                    }
                    let mut reached = bit(i);
                    let mut frontier = bit(i);
                    for _ in 0..radius {
                        let mut next = 0u128;
                        for j in ones(frontier) {
                            next |= nbr[j];
                        }
                        next &= in_s & !reached;
                        reached |= next;
                        frontier = next;
                    }
                    reached
                })
                .collect()
        };
        let ball2 = ball(DEPENDENCE_RADIUS);
        let ball4 = ball(CONNECTION_RADIUS);
        let mask_of = |r: &Region| r.iter().filter_map(|x| closure.index_of(x)).fold(0u128, |m, j| m | bit(j));
        Ok(AnnulusContext {
            dim,
            inner_boundary: mask_of(&lambda.inner_boundary()),
            inner_outer_boundary: mask_of(&lambda.outer_boundary()),
            closure,
            status,
            random,
            witness,
            in_s,
            fixed_occ,
            fixed_vac,
            nbr,
            ball2,
            ball4,
        })
    }

    /// Context with `S` the whole closure.
    pub fn full(delta: &Region, lambda: &Region, inner: &Config, outer: &Config) -> Result<Self> {
        let s = UnfixedArea::full(delta.extension());
        Self::new(delta, lambda, &s, inner, outer)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn closure(&self) -> &Region {
        &self.closure
    }

    pub fn status(&self, index: usize) -> SiteStatus {
        self.status[index]
    }

    pub fn random_mask(&self) -> u128 {
        self.random
    }

    pub fn witness_mask(&self) -> u128 {
        self.witness
    }

    pub fn neighbors_mask(&self, index: usize) -> u128 {
        self.nbr[index]
    }

    pub fn sites_of(&self, mask: u128) -> Vec<Site> {
        ones(mask).map(|i| self.closure.site(i)).collect()
    }

    pub fn region_of(&self, mask: u128) -> Region {
        Region::new(self.dim, self.sites_of(mask))
    }

    pub fn mask_of(&self, sites: &[Site]) -> Result<u128> {
        sites.iter().try_fold(0u128, |m, s| {
            self.closure.index_of(s).map(|i| m | bit(i)).ok_or(Error::NotInUnfixedArea(*s))
        })
    }

    /// Fixed values of every non-random closure site.
    pub fn fixed_config(&self) -> Config {
        let region = self.region_of(!self.random & full_mask(self.closure.len()));
        Config::from_fn(region, |s| {
            let i = self.closure.index_of(s).unwrap_or(0);
            self.fixed_occ & bit(i) != 0
        })
    }

    /// Every witness that can end up isolated and occupied must have a random
    /// neighbour, otherwise the product of `1 - 1{J_i}` misses its constraint.
    pub fn check_coverage(&self) -> Result<()> {
        for j in ones(self.witness) {
            let can_be_occupied = self.fixed_vac & bit(j) == 0;
            let can_be_isolated = self.nbr[j] & self.fixed_occ == 0;
            if can_be_occupied && can_be_isolated && self.nbr[j] & self.random == 0 {
                return Err(Error::UncoveredConstraint(self.closure.site(j)));
            }
        }
        Ok(())
    }

    /// Exact counts of the constrained partition function over `Y`.
    pub fn partition_counts(&self) -> Result<OccupancyCounts> {
        let free = self.region_of(self.random);
        let constraint = self.region_of(self.witness);
        count_feasible(&free, &constraint, &self.fixed_config())
    }

    /// Whether `omega` (a configuration on `Y`) lies in `J_i`.
    pub fn isolation_event(&self, i: &Site, omega: &Config) -> Result<bool> {
        let idx = self.closure.index_of(i).ok_or(Error::NotInUnfixedArea(*i))?;
        if self.random & bit(idx) == 0 {
            return Err(invalid("isolation events live on the random sites"));
        }
        let mut occ = self.fixed_occ;
        for r in ones(self.random) {
            match omega.get(&self.closure.site(r)) {
                Some(true) => occ |= bit(r),
                Some(false) => {}
                None => return Err(Error::UnresolvedNeighbor(self.closure.site(r))),
            }
        }
        Ok(self.event_holds(bit(idx), occ))
    }

    fn isolated(&self, j: usize, occ: u128) -> bool {
        occ & bit(j) != 0 && occ & self.nbr[j] == 0
    }

    fn event_holds(&self, w: u128, occ: u128) -> bool {
        ones(w).all(|i| ones(self.nbr[i] & self.witness).any(|j| self.isolated(j, occ)))
    }

    /// Union of the radius-2 balls in `S` around the sites of `w`.
    pub fn dependence(&self, w: u128) -> u128 {
        ones(w).fold(0u128, |m, i| m | self.ball2[i])
    }

    /// Random sites the weight of `w` depends on.
    pub fn support(&self, w: u128) -> u128 {
        self.dependence(w) & self.random
    }

    pub fn compatible(&self, a: u128, b: u128) -> bool {
        self.dependence(a) & self.dependence(b) == 0
    }

    /// Connectivity under the radius-4 relation.
    pub fn connected(&self, w: u128) -> bool {
        if w == 0 {
            return false;
        }
        let mut reached = w & w.wrapping_neg();
        loop {
            let grown = ones(reached).fold(reached, |m, i| m | (self.ball4[i] & w));
            if grown == reached {
                return reached == w;
            }
            reached = grown;
        }
    }

    /// Splits a set of random sites into its connected components.
    pub fn components(&self, mut w: u128) -> Vec<u128> {
        let mut out = Vec::new();
        while w != 0 {
            let mut comp = w & w.wrapping_neg();
            loop {
                let grown = ones(comp).fold(comp, |m, i| m | (self.ball4[i] & w));
                if grown == comp {
                    break;
                }
                comp = grown;
            }
            out.push(comp);
            w &= !comp;
        }
        out
    }

    /// Sites of the dependence set all of whose neighbours are in `w` or are
    /// fixed vacant non-random sites.
    pub fn surrounded(&self, w: u128) -> u128 {
        let zeros = self.fixed_vac & !self.random;
        ones(self.dependence(w))
            .filter(|&j| {
                let n = self.nbr[j];
                let degree = self.closure.site(j).neighbors().count() as u32;
                // Neighbours outside the closure are unknown, so they do not count.
                n.count_ones() == degree && n & !(w | zeros) == 0
            })
            .fold(0u128, |m, j| m | bit(j))
    }

    /// Polymers whose dependence set meets the thick boundary of the inner region.
    pub fn touches_inner_boundary(&self, w: u128) -> bool {
        self.dependence(w) & (self.inner_boundary | self.inner_outer_boundary) != 0
    }

    /// Size of the outer boundary of the inner region.
    pub fn inner_outer_boundary_len(&self) -> usize {
        self.inner_outer_boundary.count_ones() as usize
    }

    /// Random sites the event `J_i` depends on.
    pub fn event_support(&self, i: usize) -> u128 {
        let witnesses = self.nbr[i] & self.witness;
        let reach = ones(witnesses).fold(bit(i) | witnesses, |m, j| m | self.nbr[j]);
        reach & self.random
    }

    /// All sites of `S` in the closure.
    pub fn s_mask(&self) -> u128 {
        self.in_s
    }
}

fn full_mask(n: usize) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

/// A polymer as a mask over the closure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Polymer {
    pub mask: u128,
}

impl Polymer {
    pub fn size(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// Closure indices in increasing order (the canonical form).
    pub fn indices(&self) -> Vec<usize> {
        ones(self.mask).collect()
    }
}

/// Calls `visit` on every connected set of random sites with at most
/// `max_size` elements, each exactly once, grouped by smallest index.
pub fn for_each_polymer(ctx: &AnnulusContext, max_size: usize, mut visit: impl FnMut(u128)) {
    for root in ones(ctx.random) {
        for_each_polymer_rooted(ctx, root, max_size, &mut visit);
    }
}

/// The polymers whose smallest index is `root`.
pub fn for_each_polymer_rooted(ctx: &AnnulusContext, root: usize, max_size: usize, visit: &mut impl FnMut(u128)) {
    if max_size == 0 || ctx.random & bit(root) == 0 {
        return;
    }
    let allowed = ctx.random & !full_mask(root + 1);
    let start = bit(root);
    visit(start);
    if max_size == 1 {
        return;
    }
    let untried = ctx.ball4[root] & allowed;
    grow(ctx, allowed, start, untried, untried | start, 1, max_size, visit);
}

#[allow(clippy::too_many_arguments)]
fn grow(
    ctx: &AnnulusContext,
    allowed: u128,
    current: u128,
    mut untried: u128,
    seen: u128,
    size: usize,
    max_size: usize,
    visit: &mut impl FnMut(u128),
) {
    while untried != 0 {
        let v = untried.trailing_zeros() as usize;
        untried &= !bit(v);
        let next = current | bit(v);
        visit(next);
        if size + 1 < max_size {
            let fresh = ctx.ball4[v] & allowed & !seen;
            grow(ctx, allowed, next, untried | fresh, seen | fresh, size + 1, max_size, visit);
        }
    }
}

/// All polymers up to `max_size`, in canonical order.
pub fn enumerate_polymers(ctx: &AnnulusContext, max_size: usize) -> Vec<Polymer> {
    let mut out = Vec::new();
    for_each_polymer(ctx, max_size, |m| out.push(Polymer { mask: m }));
    out.sort_by_cached_key(|p| p.indices());
    out
}

/// A polymer weight as signed occupancy counts over its support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolymerWeight {
    /// `(-1)^|W|`.
    pub sign: i8,
    /// Random sites the counts range over.
    pub support: u128,
    /// Counts of the event that every `J_i` occurs.
    pub counts: OccupancyCounts,
}

impl PolymerWeight {
    pub fn value(&self, p: f64) -> f64 {
        self.sign as f64 * self.counts.evaluate(p)
    }

    /// Signed polynomial in `p`.
    pub fn power_basis(&self) -> Vec<i128> {
        let mut v = self.counts.to_power_basis();
        if self.sign < 0 {
            v.iter_mut().for_each(|c| *c = -*c);
        }
        v
    }
}

fn sign_of(w: u128) -> i8 {
    if w.count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Weight by enumerating every configuration of the random sites in `window`
/// (which must contain the support).
pub fn polymer_weight_over(ctx: &AnnulusContext, w: u128, window: u128) -> Result<PolymerWeight> {
    if w == 0 || w & !ctx.random != 0 {
        return Err(invalid("a polymer is a nonempty set of random sites"));
    }
    let window = window & ctx.random;
    if ctx.support(w) & !window != 0 {
        return Err(invalid("the window must contain the dependence support"));
    }
    let m = window.count_ones() as usize;
    if m > MAX_WEIGHT_WINDOW {
        return Err(Error::WindowTooLarge { free: m, cap: MAX_WEIGHT_WINDOW });
    }
    let positions: Vec<usize> = ones(window).collect();
    let scatter = Scatter::new(&positions);
    let mut counts = vec![0u128; m + 1];
    for cfg in 0..(1u64 << m) {
        let occ = ctx.fixed_occ | scatter.apply(cfg);
        if ctx.event_holds(w, occ) {
            counts[cfg.count_ones() as usize] += 1;
        }
    }
    Ok(PolymerWeight { sign: sign_of(w), support: window, counts: OccupancyCounts::from_counts(counts)? })
}

/// Weight by enumeration over the dependence support.
pub fn polymer_weight(ctx: &AnnulusContext, w: u128) -> Result<PolymerWeight> {
    polymer_weight_over(ctx, w, ctx.support(w))
}

/// Counts of the event `J_i for all i in W`, keyed by the numbers of occupied
/// and vacant sites fixed along a pruned search. Unvisited support sites are
/// free, so `coef[a][b]` stands for `coef[a][b] p^a (1-p)^b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventCoefficients {
    pub support: u128,
    pub coef: BTreeMap<(u32, u32), u64>,
}

impl EventCoefficients {
    pub fn probability(&self, p: f64) -> f64 {
        self.coef.iter().map(|(&(a, b), &n)| n as f64 * powi(p, a) * powi(1.0 - p, b)).sum()
    }

    /// Occupancy counts over the whole support.
    pub fn counts(&self) -> OccupancyCounts {
        let m = self.support.count_ones() as usize;
        let mut out = vec![0u128; m + 1];
        for (&(a, b), &n) in &self.coef {
            let (a, b) = (a as usize, b as usize);
            let rest = m - a - b;
            for k in a..=a + rest {
                out[k] += n as u128 * binomial(rest, k - a);
            }
        }
        OccupancyCounts::from_counts(out).unwrap_or_else(|_| OccupancyCounts::unit())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tri {
    No,
    Yes,
    Open(usize),
    Force(usize),
}

type Table = BTreeMap<(u32, u32), u64>;

struct EventSearch<'a> {
    ctx: &'a AnnulusContext,
    w: u128,
    /// Random sites each `J_i` depends on, by closure index.
    reach: Vec<u128>,
    /// Residual tables keyed by the unsatisfied sites and the assignments
    /// that can still affect them.
    memo: BTreeMap<(u128, u128, u128), Table>,
}

fn shifted(table: &Table, da: u32, db: u32, into: &mut Table) {
    for (&(a, b), &n) in table {
        *into.entry((a + da, b + db)).or_insert(0) += n;
    }
}

impl EventSearch<'_> {
    fn witness_state(&self, j: usize, one: u128, zero: u128) -> Tri {
        let ctx = self.ctx;
        if zero & bit(j) != 0 || ctx.nbr[j] & one != 0 {
            return Tri::No;
        }
        if one & bit(j) == 0 {
            return Tri::Open(j);
        }
        let open = ctx.nbr[j] & !zero;
        if open == 0 {
            Tri::Yes
        } else {
            Tri::Open(open.trailing_zeros() as usize)
        }
    }

    /// Three-valued status of the event plus the sites of `w` whose `J_i`
    /// is still undecided.
    fn state(&self, one: u128, zero: u128) -> (Tri, u128) {
        let ctx = self.ctx;
        // Branch where the fewest witnesses remain open.
        let mut branch = None;
        let mut fewest = u32::MAX;
        let mut unsatisfied = 0u128;
        for i in ones(self.w) {
            let mut satisfied = false;
            let mut open = 0u32;
            let mut first = None;
            let mut only = 0usize;
            for j in ones(ctx.nbr[i] & ctx.witness) {
                match self.witness_state(j, one, zero) {
                    Tri::Yes => {
                        satisfied = true;
                        break;
                    }
                    Tri::Open(v) => {
                        open += 1;
                        only = j;
                        first.get_or_insert(v);
                    }
                    _ => {}
                }
            }
            if satisfied {
                continue;
            }
            unsatisfied |= bit(i);
            match open {
                0 => return (Tri::No, 0),
                // A single open witness has to be the isolated one.
                1 => return (Tri::Force(only), self.unsatisfied_from(i, one, zero, unsatisfied)),
                _ => {
                    if open < fewest {
                        fewest = open;
                        branch = first;
                    }
                }
            }
        }
        match branch {
            Some(v) => (Tri::Open(v), unsatisfied),
            None => (Tri::Yes, 0),
        }
    }

    /// Finishes the unsatisfied set after an early return at site `from`.
    fn unsatisfied_from(&self, from: usize, one: u128, zero: u128, mut acc: u128) -> u128 {
        let ctx = self.ctx;
        for i in ones(self.w & !full_mask(from + 1)) {
            let done = ones(ctx.nbr[i] & ctx.witness).any(|j| self.witness_state(j, one, zero) == Tri::Yes);
            if !done {
                acc |= bit(i);
            }
        }
        acc
    }

    /// Counts of completions by numbers of further occupied and vacant sites.
    fn count(&mut self, occ: u128, vac: u128) -> Table {
        let one = occ | self.ctx.fixed_occ;
        let zero = vac | self.ctx.fixed_vac;
        let (status, unsatisfied) = self.state(one, zero);
        match status {
            Tri::No => return Table::new(),
            Tri::Yes => return Table::from([((0, 0), 1)]),
            _ => {}
        }
        let relevant = ones(unsatisfied).fold(0u128, |m, i| m | self.reach[i]);
        let key = (unsatisfied, occ & relevant, vac & relevant);
        if let Some(t) = self.memo.get(&key) {
            return t.clone();
        }
        let mut out = Table::new();
        match status {
            Tri::Open(v) => {
                let t = self.count(occ, vac | bit(v));
                shifted(&t, 0, 1, &mut out);
                let t = self.count(occ | bit(v), vac);
                shifted(&t, 1, 0, &mut out);
            }
            Tri::Force(j) => {
                let free = self.ctx.random & !(occ | vac);
                let (set_one, set_zero) = (bit(j) & free, self.ctx.nbr[j] & free);
                let t = self.count(occ | set_one, vac | set_zero);
                shifted(&t, set_one.count_ones(), set_zero.count_ones(), &mut out);
            }
            _ => {}
        }
        self.memo.insert(key, out.clone());
        out
    }
}

/// Exact event coefficients of a polymer by pruned, memoised search.
pub fn event_coefficients(ctx: &AnnulusContext, w: u128) -> Result<EventCoefficients> {
    if w == 0 || w & !ctx.random != 0 {
        return Err(invalid("a polymer is a nonempty set of random sites"));
    }
    let mut reach = vec![0u128; ctx.closure.len()];
    for i in ones(w) {
        reach[i] = ctx.event_support(i);
    }
    // Groups with disjoint event supports are independent.
    let mut coef = Table::from([((0u32, 0u32), 1u64)]);
    for group in event_groups(ctx, w) {
        let mut search = EventSearch { ctx, w: group, reach: reach.clone(), memo: BTreeMap::new() };
        // Every site of the group must be vacant on the event.
        let mut table = Table::new();
        shifted(&search.count(0, group), 0, group.count_ones(), &mut table);
        if table.is_empty() {
            coef.clear();
            break;
        }
        let mut product = Table::new();
        for (&(a, b), &n) in &coef {
            for (&(c, d), &m) in &table {
                *product.entry((a + c, b + d)).or_insert(0) += n * m;
            }
        }
        coef = product;
    }
    Ok(EventCoefficients { support: ctx.support(w), coef })
}

/// Splits `w` into classes of sites linked through overlapping event supports.
fn event_groups(ctx: &AnnulusContext, mut w: u128) -> Vec<u128> {
    let mut groups = Vec::new();
    while w != 0 {
        let mut group = w & w.wrapping_neg();
        let mut reach = ctx.event_support(group.trailing_zeros() as usize);
        loop {
            let joined = ones(w & !group).filter(|&i| ctx.event_support(i) & reach != 0).fold(0u128, |m, i| m | bit(i));
            if joined == 0 {
                break;
            }
            group |= joined;
            reach = ones(group).fold(reach, |m, i| m | ctx.event_support(i));
        }
        groups.push(group);
        w &= !group;
    }
    groups
}

/// Weight by pruned search, exact and usually far cheaper than enumeration.
pub fn polymer_weight_exact(ctx: &AnnulusContext, w: u128) -> Result<PolymerWeight> {
    let e = event_coefficients(ctx, w)?;
    Ok(PolymerWeight { sign: sign_of(w), support: e.support, counts: e.counts() })
}

/// Both sides of the polymer partition identity as power-basis polynomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentityCheck {
    pub lhs: Vec<i128>,
    pub rhs: Vec<i128>,
    pub equal: bool,
    /// Distinct polymers with a nonzero weight that entered the sum.
    pub active_polymers: usize,
    /// Families of pairwise-compatible polymers visited.
    pub families: u64,
}

/// Compares the exact partition function with the sum over families of
/// pairwise-compatible polymers of weight products. Families correspond one to
/// one with subsets of the random sites (a family is the set of connected
/// components of its union), which is how they are enumerated.
pub fn polymer_partition_identity(ctx: &AnnulusContext) -> Result<IdentityCheck> {
    ctx.check_coverage()?;
    let y = ctx.random;
    let n = y.count_ones() as usize;
    if n > MAX_IDENTITY_SITES {
        return Err(Error::WindowTooLarge { free: n, cap: MAX_IDENTITY_SITES });
    }
    let lhs = ctx.partition_counts()?.to_power_basis();
    let positions: Vec<usize> = ones(y).collect();
    let scatter = Scatter::new(&positions);
    let mut weights: BTreeMap<u128, Vec<i128>> = BTreeMap::new();
    let mut rhs = vec![0i128; n + 1];
    let mut families = 0u64;
    for sub in 0..(1u64 << n) {
        let w = scatter.apply(sub);
        let mut product = vec![1i128];
        for comp in ctx.components(w) {
            if let std::collections::btree_map::Entry::Vacant(e) = weights.entry(comp) {
                e.insert(polymer_weight_exact(ctx, comp)?.power_basis());
            }
            let z = &weights[&comp];
            if z.iter().all(|&c| c == 0) {
                product.clear();
                break;
            }
            product = poly_mul(&product, z);
        }
        families += 1;
        for (k, c) in product.iter().enumerate() {
            if k >= rhs.len() {
                rhs.resize(k + 1, 0);
            }
            rhs[k] += c;
        }
    }
    let active = weights.values().filter(|z| z.iter().any(|&c| c != 0)).count();
    let equal = poly_eq(&lhs, &rhs);
    Ok(IdentityCheck { lhs, rhs, equal, active_polymers: active, families })
}

/// Weights of a list of polymers at one density, with dependence sets.
#[derive(Clone, Debug)]
pub struct WeightedPolymers {
    pub polymers: Vec<Polymer>,
    pub dependence: Vec<u128>,
    pub coefficients: Vec<EventCoefficients>,
}

impl WeightedPolymers {
    pub fn new(ctx: &AnnulusContext, polymers: Vec<Polymer>) -> Result<Self> {
        let dependence = polymers.iter().map(|p| ctx.dependence(p.mask)).collect();
        let coefficients = polymers.iter().map(|p| event_coefficients(ctx, p.mask)).collect::<Result<Vec<_>>>()?;
        Ok(WeightedPolymers { polymers, dependence, coefficients })
    }

    pub fn len(&self) -> usize {
        self.polymers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polymers.is_empty()
    }

    /// Signed weight of polymer `k`.
    pub fn weight(&self, k: usize, p: f64) -> f64 {
        sign_of(self.polymers[k].mask) as f64 * self.coefficients[k].probability(p)
    }

    /// Kotecký–Preiss sums for every singleton target at once, indexed by
    /// closure index. A polymer meets the dependence set of `{x}` exactly when
    /// `x` lies within distance 4 of it.
    pub fn singleton_kp_sums(&self, ctx: &AnnulusContext, p: f64) -> Vec<f64> {
        let mut sums = vec![0.0; ctx.closure.len()];
        for (k, poly) in self.polymers.iter().enumerate() {
            let term = self.weight(k, p).abs() * libm::exp(poly.size() as f64);
            if term == 0.0 {
                continue;
            }
            let hit = ones(poly.mask).fold(0u128, |m, i| m | ctx.ball4[i]) & ctx.random;
            for x in ones(hit) {
                sums[x] += term;
            }
        }
        sums
    }

    /// `|z_W| e^|W|` for every polymer, in list order.
    pub fn kp_terms(&self, p: f64) -> Vec<f64> {
        (0..self.len()).map(|k| self.weight(k, p).abs() * libm::exp(self.polymers[k].size() as f64)).collect()
    }

    /// `sum |z_W| e^|W|` over polymers whose dependence set meets `target`.
    pub fn kp_sum(&self, target: u128, p: f64) -> f64 {
        self.kp_sum_of(&self.kp_terms(p), target)
    }

    /// [`Self::kp_sum`] from precomputed [`Self::kp_terms`].
    pub fn kp_sum_of(&self, terms: &[f64], target: u128) -> f64 {
        self.dependence.iter().zip(terms).filter(|(dep, _)| *dep & target != 0).map(|(_, t)| t).sum()
    }
}

/// The truncated Kotecký–Preiss sum for `w_star` (its dependence set in
/// `ctx`), with whether it stays below `|w_star|`.
pub fn kp_condition_sum(ctx: &AnnulusContext, weighted: &WeightedPolymers, w_star: u128, p: f64) -> (f64, bool) {
    let s = weighted.kp_sum(ctx.dependence(w_star), p);
    (s, s <= w_star.count_ones() as f64)
}

/// Ursell factor of a cluster given its incompatibility matrix: the signed sum
/// over connected spanning subgraphs, divided by the multiplicity factorials.
pub fn ursell_coefficient(incompatible: &[Vec<bool>], multiplicities: &[usize]) -> f64 {
    let n = incompatible.len();
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|&(a, b)| incompatible[a][b]).collect();
    assert!(edges.len() <= 20, "cluster too large for subgraph enumeration");
    let mut total = 0i64;
    for subset in 0u32..(1 << edges.len()) {
        // Union-find style connectivity over the chosen edges.
        let mut label: Vec<usize> = (0..n).collect();
        for (e, &(a, b)) in edges.iter().enumerate() {
            if subset >> e & 1 == 1 {
                let (la, lb) = (label[a], label[b]);
                if la != lb {
                    label.iter_mut().filter(|l| **l == lb).for_each(|l| *l = la);
                }
            }
        }
        if label.iter().all(|&l| l == label[0]) {
            total += if subset.count_ones() % 2 == 0 { 1 } else { -1 };
        }
    }
    let factorials: f64 = multiplicities.iter().map(|&m| (1..=m).product::<usize>() as f64).product();
    total as f64 / factorials
}

/// A cluster: polymer indices (sorted, with repetition) into a weighted list.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cluster {
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn potential(&self, weighted: &WeightedPolymers, p: f64) -> f64 {
        let m = &self.members;
        let incompatible: Vec<Vec<bool>> = m
            .iter()
            .map(|&a| m.iter().map(|&b| weighted.dependence[a] & weighted.dependence[b] != 0).collect())
            .collect();
        let mut mult = Vec::new();
        let mut k = 0;
        while k < m.len() {
            let run = m[k..].iter().take_while(|&&x| x == m[k]).count();
            mult.push(run);
            k += run;
        }
        let product: f64 = m.iter().map(|&i| weighted.weight(i, p)).product();
        ursell_coefficient(&incompatible, &mult) * product
    }

    /// Union of the member polymers.
    pub fn support(&self, weighted: &WeightedPolymers) -> u128 {
        self.members.iter().fold(0u128, |acc, &i| acc | weighted.polymers[i].mask)
    }
}

/// Clusters of at most `max_members` polymers (connected incompatibility
/// graph) that contain a polymer from `seeds`.
pub fn clusters_from(weighted: &WeightedPolymers, seeds: &[usize], max_members: usize) -> Vec<Cluster> {
    let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
    let touching = |a: usize, b: usize| weighted.dependence[a] & weighted.dependence[b] != 0;
    let mut frontier: Vec<Vec<usize>> = seeds.iter().map(|&s| vec![s]).collect();
    for members in &frontier {
        found.insert(members.clone());
    }
    for _ in 1..max_members {
        let mut next = Vec::new();
        for members in &frontier {
            let reach = members.iter().fold(0u128, |acc, &i| acc | weighted.dependence[i]);
            for cand in 0..weighted.len() {
                if weighted.dependence[cand] & reach == 0 || !members.iter().any(|&i| touching(i, cand)) {
                    continue;
                }
                let mut grown = members.clone();
                grown.push(cand);
                grown.sort_unstable();
                if found.insert(grown.clone()) {
                    next.push(grown);
                }
            }
        }
        frontier = next;
    }
    found.into_iter().map(|members| Cluster { members }).collect()
}

/// `sum_C Phi(C)` over all clusters of at most `max_members` polymers.
pub fn ursell_cluster_sum(weighted: &WeightedPolymers, p: f64, max_members: usize) -> f64 {
    let seeds: Vec<usize> = (0..weighted.len()).collect();
    clusters_from(weighted, &seeds, max_members).iter().map(|c| c.potential(weighted, p)).sum()
}

/// Outcome of a large-cluster suppression check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuppressionReport {
    pub sum: f64,
    pub bound: f64,
    pub clusters: usize,
    pub holds: bool,
}

/// Sums `|Phi(C)|` over clusters whose support contains site `x` and has at
/// least `r` sites, against `p^(r / 4d)`.
pub fn suppression_check(
    ctx: &AnnulusContext,
    weighted: &WeightedPolymers,
    x: usize,
    p: f64,
    r: usize,
    max_members: usize,
) -> SuppressionReport {
    let seeds: Vec<usize> = (0..weighted.len()).filter(|&k| weighted.polymers[k].mask & bit(x) != 0).collect();
    let clusters: Vec<Cluster> = clusters_from(weighted, &seeds, max_members)
        .into_iter()
        .filter(|c| c.support(weighted).count_ones() as usize >= r)
        .collect();
    let sum: f64 = clusters.iter().map(|c| c.potential(weighted, p).abs()).sum();
    let bound = libm::pow(p, r as f64 / (4 * ctx.dim()) as f64);
    SuppressionReport { sum, bound, clusters: clusters.len(), holds: sum <= bound }
}

/// Checks `prod |z_Q| <= p^(sum |Q| / 2d) p^(-|outer boundary of Lambda|)` for
/// a family of boundary polymers.
pub fn boundary_polymer_bound(ctx: &AnnulusContext, family: &[u128], p: f64) -> Result<(f64, f64, bool)> {
    let mut product = 1.0;
    let mut size = 0usize;
    for &q in family {
        if !ctx.touches_inner_boundary(q) {
            return Err(invalid("boundary polymers must reach the thick boundary of the inner region"));
        }
        product *= event_coefficients(ctx, q)?.probability(p);
        size += q.count_ones() as usize;
    }
    let rhs = libm::pow(p, size as f64 / (2 * ctx.dim()) as f64) * libm::pow(p, -(ctx.inner_outer_boundary_len() as f64));
    Ok((product, rhs, product <= rhs))
}

/// How a weight bound was established.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certificate {
    /// `(1-p)^|W|`: every site of the polymer is vacant on the event.
    Vacancy,
    /// Product of single-site event probabilities over a packing of sites
    /// with disjoint event supports, times vacancy of the remaining sites.
    Packing,
    /// The exact weight.
    Exact,
}

/// Tallies of a weight-bound scan at one density.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundTally {
    pub polymers: u64,
    pub by_vacancy: u64,
    pub by_packing: u64,
    pub by_exact: u64,
    pub violations: u64,
    /// Largest `|z| / p^(|W|/2d)` among exactly evaluated polymers.
    pub worst_exact_ratio: f64,
    /// Up to a few violating polymers, for the report.
    pub examples: Vec<u128>,
}

impl BoundTally {
    pub fn merge(&mut self, other: &BoundTally) {
        self.polymers += other.polymers;
        self.by_vacancy += other.by_vacancy;
        self.by_packing += other.by_packing;
        self.by_exact += other.by_exact;
        self.violations += other.violations;
        self.worst_exact_ratio = self.worst_exact_ratio.max(other.worst_exact_ratio);
        for e in &other.examples {
            if self.examples.len() < 8 {
                self.examples.push(*e);
            }
        }
    }
}

/// Certifies `|z_W| <= p^(|W|/2d)` on a density grid for all polymers rooted at
/// one site, trying cheap upper bounds before the exact weight.
pub struct BoundScanner<'a> {
    ctx: &'a AnnulusContext,
    grid: Vec<f64>,
    single: Vec<Vec<f64>>,
    event_support: Vec<u128>,
    /// Exact joint event probabilities for pairs with overlapping supports,
    /// indexed `a * n + b` with `a < b`.
    pairs: Vec<Option<(u128, Vec<f64>)>>,
}

struct Packing<'s> {
    sites: &'s [usize],
    g: usize,
    target: f64,
    best: f64,
}

impl<'a> BoundScanner<'a> {
    pub fn new(ctx: &'a AnnulusContext, grid: &[f64]) -> Result<Self> {
        let n = ctx.closure.len();
        let mut single = vec![vec![0.0; n]; grid.len()];
        let mut event_support = vec![0u128; n];
        for i in ones(ctx.random) {
            let e = event_coefficients(ctx, bit(i))?;
            for (g, &p) in grid.iter().enumerate() {
                single[g][i] = e.probability(p);
            }
            event_support[i] = ctx.event_support(i);
        }
        let mut pairs = vec![None; n * n];
        for a in ones(ctx.random) {
            for b in ones(ctx.random & ctx.ball4[a] & !full_mask(a + 1)) {
                if event_support[a] & event_support[b] == 0 {
                    continue;
                }
                let e = event_coefficients(ctx, bit(a) | bit(b))?;
                let probs = grid.iter().map(|&p| e.probability(p)).collect();
                pairs[a * n + b] = Some((event_support[a] | event_support[b], probs));
            }
        }
        Ok(BoundScanner { ctx, grid: grid.to_vec(), single, event_support, pairs })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Best product bound over packings of singles and overlapping pairs
    /// whose event supports are disjoint; sites left out must still be
    /// vacant when they fall outside every chosen support.
    fn packing_bound(&self, w: u128, g: usize, target: f64) -> f64 {
        let mut buf = [0usize; 128];
        let mut len = 0;
        for i in ones(w) {
            buf[len] = i;
            len += 1;
        }
        let mut state = Packing { sites: &buf[..len], g, target, best: f64::INFINITY };
        self.pack(&mut state, 0, 0, 0, 0, 1.0);
        state.best
    }

    /// Greedy packing of single-site events in index order.
    fn greedy_bound(&self, w: u128, g: usize) -> f64 {
        let mut used = 0u128;
        let mut bound = 1.0;
        for i in ones(w) {
            if self.event_support[i] & used == 0 {
                used |= self.event_support[i];
                bound *= self.single[g][i];
            }
        }
        bound * powi(1.0 - self.grid[g], (w & !used).count_ones())
    }

    fn pack(&self, st: &mut Packing<'_>, k: usize, used: u128, taken: u128, loose: u128, acc: f64) {
        let g = st.g;
        if st.best <= st.target {
            return;
        }
        if k == st.sites.len() {
            let value = acc * powi(1.0 - self.grid[g], (loose & !used).count_ones());
            st.best = st.best.min(value);
            return;
        }
        let i = st.sites[k];
        if taken & bit(i) != 0 {
            self.pack(st, k + 1, used, taken, loose, acc);
            return;
        }
        if self.event_support[i] & used == 0 {
            self.pack(st, k + 1, used | self.event_support[i], taken, loose, acc * self.single[g][i]);
        }
        let n = self.ctx.closure.len();
        for &j in &st.sites[k + 1..] {
            if taken & bit(j) != 0 {
                continue;
            }
            if let Some((support, probs)) = &self.pairs[i * n + j] {
                if support & used == 0 {
                    self.pack(st, k + 1, used | support, taken | bit(j), loose, acc * probs[g]);
                }
            }
        }
        self.pack(st, k + 1, used, taken, loose | bit(i), acc);
    }

    /// Scans polymers rooted at `root`; returns one tally per grid density.
    pub fn scan_root(&self, root: usize, max_size: usize) -> Result<Vec<BoundTally>> {
        let mut tallies = vec![BoundTally::default(); self.grid.len()];
        let two_d = (2 * self.ctx.dim()) as f64;
        let mut failure = None;
        for_each_polymer_rooted(self.ctx, root, max_size, &mut |w| {
            if failure.is_some() {
                return;
            }
            let size = w.count_ones();
            let mut exact: Option<EventCoefficients> = None;
            for (g, &p) in self.grid.iter().enumerate() {
                let t = &mut tallies[g];
                t.polymers += 1;
                let target = libm::pow(p, size as f64 / two_d);
                if powi(1.0 - p, size) <= target {
                    t.by_vacancy += 1;
                    continue;
                }
                if self.greedy_bound(w, g) <= target || self.packing_bound(w, g, target) <= target {
                    t.by_packing += 1;
                    continue;
                }
                if exact.is_none() {
                    match event_coefficients(self.ctx, w) {
                        Ok(e) => exact = Some(e),
                        Err(e) => {
                            failure = Some(e);
                            return;
                        }
                    }
                }
                let z = exact.as_ref().map(|e| e.probability(p)).unwrap_or(0.0);
                t.by_exact += 1;
                t.worst_exact_ratio = t.worst_exact_ratio.max(z / target);
                if z > target {
                    t.violations += 1;
                    if t.examples.len() < 8 {
                        t.examples.push(w);
                    }
                }
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(tallies),
        }
    }

    /// Sequential scan over every root.
    pub fn scan(&self, max_size: usize) -> Result<Vec<BoundTally>> {
        let mut total = vec![BoundTally::default(); self.grid.len()];
        for root in ones(self.ctx.random) {
            for (t, r) in total.iter_mut().zip(self.scan_root(root, max_size)?) {
                t.merge(&r);
            }
        }
        Ok(total)
    }
}
