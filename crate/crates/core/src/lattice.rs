//! Sites, finite regions, configurations and the thinning maps.
//!
//! All windowed maps take an explicit boundary configuration. A neighbour value
//! that is found neither in the configuration nor in the boundary is an error
//! rather than an implicit zero.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};

/// Largest lattice dimension supported by [`Site`].
pub const MAX_DIM: usize = 3;

/// A point of `Z^d` for `1 <= d <= 3`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    dim: u8,
    coords: [i32; MAX_DIM],
}

impl Site {
    /// Builds a site from its coordinates. Panics unless `1 <= len <= 3`.
    pub fn new(coords: &[i32]) -> Site {
        Self::try_new(coords).expect("site dimension must be between 1 and 3")
    }

    pub fn try_new(coords: &[i32]) -> Result<Site> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::UnsupportedDimension(coords.len()));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site { dim: coords.len() as u8, coords: c })
    }

    pub fn origin(dim: usize) -> Site {
        Site::new(&[0, 0, 0][..dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim()]
    }

    pub fn coord(&self, axis: usize) -> i32 {
        self.coords()[axis]
    }

    /// The site moved by `delta` along `axis`.
    pub fn shifted(&self, axis: usize, delta: i32) -> Site {
        let mut s = *self;
        s.coords[axis] += delta;
        s
    }

    /// Componentwise sum; both sites must share a dimension.
    pub fn translated(&self, by: &Site) -> Site {
        debug_assert_eq!(self.dim, by.dim);
        let mut s = *self;
        for k in 0..self.dim() {
            s.coords[k] += by.coords[k];
        }
        s
    }

    /// The `2d` nearest neighbours, ordered axis by axis (minus before plus).
    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.dim()).flat_map(move |axis| [self.shifted(axis, -1), self.shifted(axis, 1)])
    }

    pub fn l1_distance(&self, other: &Site) -> u32 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }

    pub fn is_adjacent(&self, other: &Site) -> bool {
        self.dim == other.dim && self.l1_distance(other) == 1
    }

    /// Parity of the coordinate sum; odd sites carry the checkerboard pattern.
    pub fn is_odd(&self) -> bool {
        self.coords().iter().sum::<i32>().rem_euclid(2) == 1
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, c) in self.coords().iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A finite set of sites with a fixed dimension. Sites are kept sorted, so the
/// position of a site in [`Region::sites`] is its index.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Region {
    dim: usize,
    sites: Vec<Site>,
}

impl Region {
    pub fn empty(dim: usize) -> Region {
        Region { dim, sites: Vec::new() }
    }

    /// Collects sites into a region, dropping duplicates. Panics on mixed
    /// dimensions; use [`Region::try_new`] for untrusted input.
    pub fn new(dim: usize, sites: impl IntoIterator<Item = Site>) -> Region {
        Self::try_new(dim, sites).expect("all sites must share the region dimension")
    }

    pub fn try_new(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Region> {
        let mut v: Vec<Site> = sites.into_iter().collect();
        if let Some(bad) = v.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        v.sort_unstable();
        v.dedup();
        Ok(Region { dim, sites: v })
    }

    pub fn singleton(site: Site) -> Region {
        Region { dim: site.dim(), sites: alloc::vec![site] }
    }

    /// The box `lo..=hi` (inclusive in every coordinate).
    pub fn cuboid(lo: &[i32], hi: &[i32]) -> Region {
        assert_eq!(lo.len(), hi.len());
        let dim = lo.len();
        let mut sites = Vec::new();
        let mut cur: Vec<i32> = lo.to_vec();
        if lo.iter().zip(hi).any(|(a, b)| a > b) {
            return Region::empty(dim);
        }
        loop {
            sites.push(Site::new(&cur));
            let mut axis = 0;
            loop {
                if axis == dim {
                    return Region::new(dim, sites);
                }
                if cur[axis] < hi[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = lo[axis];
                axis += 1;
            }
        }
    }

    /// The cube of side `k` around the origin: coordinates run over
    /// `-(k-1)/2 ..= k/2` (integer division), so even sides extend one step
    /// further in the positive direction.
    pub fn centered_cube(dim: usize, k: usize) -> Region {
        let k = k as i32;
        let lo = -((k - 1) / 2);
        let hi = lo + k - 1;
        Region::cuboid(&[lo; MAX_DIM][..dim], &[hi; MAX_DIM][..dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn iter(&self) -> impl Iterator<Item = &Site> {
        self.sites.iter()
    }

    pub fn site(&self, index: usize) -> Site {
        self.sites[index]
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        self.sites.binary_search(site).ok()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.index_of(site).is_some()
    }

    pub fn is_subset(&self, other: &Region) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    pub fn union(&self, other: &Region) -> Region {
        Region::new(self.dim, self.sites.iter().chain(other.sites.iter()).copied())
    }

    pub fn intersection(&self, other: &Region) -> Region {
        Region::new(self.dim, self.sites.iter().filter(|s| other.contains(s)).copied())
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region::new(self.dim, self.sites.iter().filter(|s| !other.contains(s)).copied())
    }

    pub fn filter(&self, mut keep: impl FnMut(&Site) -> bool) -> Region {
        Region { dim: self.dim, sites: self.sites.iter().filter(|s| keep(s)).copied().collect() }
    }

    /// Sites of the region with at least one neighbour outside it.
    pub fn inner_boundary(&self) -> Region {
        self.filter(|s| s.neighbors().any(|n| !self.contains(&n)))
    }

    /// The region minus its inner boundary.
    pub fn interior(&self) -> Region {
        self.filter(|s| s.neighbors().all(|n| self.contains(&n)))
    }

    /// Sites outside the region adjacent to it.
    pub fn outer_boundary(&self) -> Region {
        Region::new(
            self.dim,
            self.sites.iter().flat_map(|s| s.neighbors().collect::<Vec<_>>()).filter(|n| !self.contains(n)),
        )
    }

    /// The region together with its outer boundary.
    pub fn extension(&self) -> Region {
        self.union(&self.outer_boundary())
    }

    /// Inner and outer boundary together.
    pub fn thick_boundary(&self) -> Region {
        self.inner_boundary().union(&self.outer_boundary())
    }
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.sites.iter()).finish()
    }
}

/// An occupancy assignment on a region.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Config {
    region: Region,
    occupied: Vec<bool>,
}

impl Config {
    pub fn new(region: Region, occupied: Vec<bool>) -> Result<Config> {
        if occupied.len() != region.len() {
            return Err(invalid("occupancy vector length differs from region size"));
        }
        Ok(Config { region, occupied })
    }

    pub fn vacant(region: Region) -> Config {
        let n = region.len();
        Config { region, occupied: alloc::vec![false; n] }
    }

    pub fn filled(region: Region) -> Config {
        let n = region.len();
        Config { region, occupied: alloc::vec![true; n] }
    }

    pub fn from_fn(region: Region, mut f: impl FnMut(&Site) -> bool) -> Config {
        let occupied = region.sites().iter().map(&mut f).collect();
        Config { region, occupied }
    }

    /// Occupied exactly on the listed sites (which must lie in the region).
    pub fn with_occupied(region: Region, occupied_sites: &[Site]) -> Config {
        Config::from_fn(region, |s| occupied_sites.contains(s))
    }

    /// The alternating pattern, occupied on sites with odd coordinate sum.
    pub fn checkerboard(region: Region) -> Config {
        Config::from_fn(region, Site::is_odd)
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn get(&self, site: &Site) -> Option<bool> {
        self.region.index_of(site).map(|i| self.occupied[i])
    }

    pub fn value_at(&self, index: usize) -> bool {
        self.occupied[index]
    }

    pub fn values(&self) -> &[bool] {
        &self.occupied
    }

    pub fn set(&mut self, site: &Site, value: bool) -> Result<()> {
        let i = self.region.index_of(site).ok_or(Error::UnresolvedNeighbor(*site))?;
        self.occupied[i] = value;
        Ok(())
    }

    pub fn occupied_sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.region.sites().iter().zip(&self.occupied).filter(|(_, &o)| o).map(|(s, _)| *s)
    }

    pub fn count_occupied(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Restriction to the part of `to` that lies inside this configuration.
    pub fn restrict(&self, to: &Region) -> Config {
        let region = self.region.intersection(to);
        let occupied = region.sites().iter().map(|s| self.get(s).unwrap_or(false)).collect();
        Config { region, occupied }
    }

    /// Joins two configurations; overlapping sites must agree.
    pub fn concat(&self, other: &Config) -> Result<Config> {
        for (s, v) in other.region.sites().iter().zip(&other.occupied) {
            if let Some(mine) = self.get(s) {
                if mine != *v {
                    return Err(invalid("configurations disagree on their overlap"));
                }
            }
        }
        let region = self.region.union(&other.region);
        let occupied = region
            .sites()
            .iter()
            .map(|s| self.get(s).or_else(|| other.get(s)).unwrap_or(false))
            .collect();
        Ok(Config { region, occupied })
    }
}

impl fmt::Debug for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.region.sites().iter().zip(self.occupied.iter().map(|&o| o as u8)))
            .finish()
    }
}

fn lookup(site: &Site, omega: &Config, boundary: &Config) -> Result<bool> {
    omega.get(site).or_else(|| boundary.get(site)).ok_or(Error::UnresolvedNeighbor(*site))
}

/// Whether `i` is occupied with every neighbour vacant. Neighbour values come
/// from `omega`, then from `boundary`.
pub fn is_isolated(i: &Site, omega: &Config, boundary: &Config) -> Result<bool> {
    if !lookup(i, omega, boundary)? {
        // Still insist that the neighbourhood is resolvable.
        for n in i.neighbors() {
            lookup(&n, omega, boundary)?;
        }
        return Ok(false);
    }
    let mut isolated = true;
    for n in i.neighbors() {
        if lookup(&n, omega, boundary)? {
            isolated = false;
        }
    }
    Ok(isolated)
}

/// The thinning map on the region of `omega`: keep exactly the isolated particles.
pub fn thin(omega: &Config, boundary: &Config) -> Result<Config> {
    let occupied = omega
        .region()
        .sites()
        .iter()
        .map(|s| is_isolated(s, omega, boundary))
        .collect::<Result<Vec<_>>>()?;
    Config::new(omega.region().clone(), occupied)
}

/// The complementary map: keep exactly the occupied sites that are not isolated.
pub fn thin_complement(omega: &Config, boundary: &Config) -> Result<Config> {
    let occupied = omega
        .region()
        .sites()
        .iter()
        .zip(omega.values())
        .map(|(s, &o)| Ok(o && !is_isolated(s, omega, boundary)?))
        .collect::<Result<Vec<_>>>()?;
    Config::new(omega.region().clone(), occupied)
}

/// Whether every occupied site of `k` has an occupied neighbour (anywhere).
pub fn is_t_feasible(omega: &Config, k: &Region, boundary: &Config) -> Result<bool> {
    for s in k.sites() {
        if is_isolated(s, omega, boundary)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Whether no two occupied sites are adjacent, i.e. the configuration is a
/// possible thinning image.
pub fn check_admissible(omega_prime: &Config) -> Result<()> {
    let occ: Vec<Site> = omega_prime.occupied_sites().collect();
    for (a, s) in occ.iter().enumerate() {
        for t in &occ[a + 1..] {
            if s.is_adjacent(t) {
                return Err(Error::NotAdmissible(*s, *t));
            }
        }
    }
    Ok(())
}

/// The sites where every preimage of a thinned configuration is forced, with
/// the forced values, and the remaining unfixed area.
#[derive(Clone, Debug)]
pub struct FixedSplit {
    pub fixed: Region,
    pub forced: Config,
    pub unfixed: UnfixedArea,
}

/// Splits the window of `omega_prime` into the fixed region (occupied image
/// sites and their neighbours) and its complement.
pub fn fixed_region(omega_prime: &Config) -> Result<FixedSplit> {
    check_admissible(omega_prime)?;
    let window = omega_prime.region().clone();
    let occ: Vec<Site> = omega_prime.occupied_sites().collect();
    let fixed = window.filter(|s| occ.iter().any(|o| o == s || o.is_adjacent(s)));
    let forced = Config::from_fn(fixed.clone(), |s| occ.contains(s));
    let s = window.difference(&fixed);
    Ok(FixedSplit {
        fixed,
        forced,
        unfixed: UnfixedArea { window, s, origin: Some(omega_prime.clone()) },
    })
}

/// A subset `S` of a window on which the first-layer model lives. Distances
/// and balls are measured along nearest-neighbour paths that stay in `S`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct UnfixedArea {
    window: Region,
    s: Region,
    origin: Option<Config>,
}

impl UnfixedArea {
    pub fn full(window: Region) -> UnfixedArea {
        UnfixedArea { s: window.clone(), window, origin: None }
    }

    pub fn new(window: Region, s: Region) -> Result<UnfixedArea> {
        if !s.is_subset(&window) {
            return Err(invalid("unfixed area must lie inside its window"));
        }
        Ok(UnfixedArea { window, s, origin: None })
    }

    pub fn window(&self) -> &Region {
        &self.window
    }

    pub fn sites(&self) -> &Region {
        &self.s
    }

    pub fn origin(&self) -> Option<&Config> {
        self.origin.as_ref()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.s.contains(site)
    }

    /// The same window with the listed sites removed from `S`.
    pub fn without(&self, removed: &Region) -> UnfixedArea {
        UnfixedArea { window: self.window.clone(), s: self.s.difference(removed), origin: None }
    }

    /// Breadth-first distances from `from` to every site of `S` (None when
    /// unreachable), indexed like [`UnfixedArea::sites`].
    pub fn distances_from(&self, from: &Site) -> Result<Vec<Option<u32>>> {
        let start = self.s.index_of(from).ok_or(Error::NotInUnfixedArea(*from))?;
        let mut dist = alloc::vec![None; self.s.len()];
        dist[start] = Some(0);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let d = dist[i].unwrap_or(0);
            for n in self.s.site(i).neighbors() {
                if let Some(j) = self.s.index_of(&n) {
                    if dist[j].is_none() {
                        dist[j] = Some(d + 1);
                        queue.push_back(j);
                    }
                }
            }
        }
        Ok(dist)
    }

    /// Shortest-path length inside `S`; `None` means infinite.
    pub fn distance(&self, i: &Site, j: &Site) -> Result<Option<u32>> {
        let target = self.s.index_of(j).ok_or(Error::NotInUnfixedArea(*j))?;
        Ok(self.distances_from(i)?[target])
    }

    /// Sites of `S` within path distance `n` of `center`.
    pub fn ball(&self, center: &Site, n: u32) -> Result<Region> {
        let dist = self.distances_from(center)?;
        Ok(Region::new(
            self.s.dim(),
            self.s.sites().iter().zip(dist).filter(|(_, d)| d.is_some_and(|d| d <= n)).map(|(s, _)| *s),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(k: usize) -> Region {
        Region::centered_cube(2, k)
    }

    #[test]
    fn centered_cube_conventions() {
        let b3 = sq(3);
        assert_eq!(b3.len(), 9);
        assert!(b3.contains(&Site::new(&[-1, -1])) && b3.contains(&Site::new(&[1, 1])));
        let b4 = sq(4);
        assert!(b4.contains(&Site::new(&[-1, -1])) && b4.contains(&Site::new(&[2, 2])));
        assert!(!b4.contains(&Site::new(&[-2, 0])));
    }

    #[test]
    fn boundary_sets_of_a_box() {
        let b = sq(5);
        assert_eq!(b.interior().len(), 9);
        assert_eq!(b.inner_boundary().len(), 16);
        assert_eq!(b.outer_boundary().len(), 20);
        assert_eq!(b.extension().len(), 45);
        assert_eq!(b.thick_boundary().len(), 36);
        let o = Region::singleton(Site::origin(2));
        assert!(o.interior().is_empty());
        assert_eq!(o.inner_boundary(), o);
    }

    #[test]
    fn isolation_examples() {
        let r = sq(3);
        let bnd = Config::vacant(r.outer_boundary());
        let c = Site::origin(2);
        let single = Config::with_occupied(r.clone(), &[c]);
        assert!(is_isolated(&c, &single, &bnd).unwrap());
        let pair = Config::with_occupied(r.clone(), &[c, Site::new(&[1, 0])]);
        assert!(!is_isolated(&c, &pair, &bnd).unwrap());
        let empty = Config::vacant(r.clone());
        assert!(!is_isolated(&c, &empty, &bnd).unwrap());
        let corner = Site::new(&[1, 1]);
        let missing = Config::vacant(Region::empty(2));
        assert_eq!(is_isolated(&corner, &single, &missing), Err(Error::UnresolvedNeighbor(Site::new(&[2, 1]))));
    }

    #[test]
    fn thinning_examples() {
        let r = sq(4);
        let bnd = Config::vacant(r.outer_boundary());
        let empty = Config::vacant(r.clone());
        assert_eq!(thin(&empty, &bnd).unwrap(), empty);
        let pair = Config::with_occupied(r.clone(), &[Site::new(&[0, 0]), Site::new(&[0, 1])]);
        assert_eq!(thin(&pair, &bnd).unwrap().count_occupied(), 0);
        assert_eq!(thin_complement(&pair, &bnd).unwrap(), pair);
        let lone = Config::with_occupied(r.clone(), &[Site::new(&[2, 2])]);
        assert_eq!(thin_complement(&lone, &bnd).unwrap().count_occupied(), 0);
        assert_eq!(thin(&lone, &bnd).unwrap(), lone);
    }

    #[test]
    fn feasibility_examples() {
        let r = sq(3);
        let vac = Config::vacant(r.outer_boundary());
        assert!(is_t_feasible(&Config::vacant(r.clone()), &r, &vac).unwrap());
        let lone = Config::with_occupied(r.clone(), &[Site::new(&[1, 0])]);
        assert!(!is_t_feasible(&lone, &r, &vac).unwrap());
        let mut bnd = vac.clone();
        bnd.set(&Site::new(&[2, 0]), true).unwrap();
        assert!(is_t_feasible(&lone, &r, &bnd).unwrap());
    }

    #[test]
    fn fixed_region_examples() {
        let r = sq(5);
        let alt = fixed_region(&Config::checkerboard(r.clone())).unwrap();
        assert!(alt.unfixed.sites().is_empty());
        let zero = fixed_region(&Config::vacant(r.clone())).unwrap();
        assert_eq!(zero.unfixed.sites(), &r);
        let one = fixed_region(&Config::with_occupied(r.clone(), &[Site::origin(2)])).unwrap();
        assert_eq!(one.fixed.len(), 5);
        assert_eq!(one.forced.count_occupied(), 1);
        let bad = Config::with_occupied(r, &[Site::origin(2), Site::new(&[0, 1])]);
        assert!(matches!(fixed_region(&bad), Err(Error::NotAdmissible(..))));
    }

    /// Plain breadth-first search over an adjacency matrix, independent of the
    /// site-based implementation.
    fn matrix_bfs(s: &[Site], from: usize, to: usize) -> Option<u32> {
        let n = s.len();
        let mut dist = alloc::vec![u32::MAX; n];
        dist[from] = 0;
        for _ in 0..n {
            for a in 0..n {
                for b in 0..n {
                    if dist[a] != u32::MAX && s[a].l1_distance(&s[b]) == 1 && dist[a] + 1 < dist[b] {
                        dist[b] = dist[a] + 1;
                    }
                }
            }
        }
        (dist[to] != u32::MAX).then_some(dist[to])
    }

    #[test]
    fn s_distance_against_matrix_search() {
        let window = sq(5);
        // A wall at x = 0 with a single gap at the top.
        let wall = window.filter(|s| s.coord(0) == 0 && s.coord(1) < 2);
        let area = UnfixedArea::full(window.clone()).without(&wall);
        let a = Site::new(&[-2, -2]);
        let b = Site::new(&[2, -2]);
        let sites = area.sites().sites().to_vec();
        let ia = area.sites().index_of(&a).unwrap();
        let ib = area.sites().index_of(&b).unwrap();
        assert_eq!(area.distance(&a, &b).unwrap(), matrix_bfs(&sites, ia, ib));
        assert_eq!(area.distance(&a, &b).unwrap(), Some(12));
        assert_eq!(area.distance(&a, &a).unwrap(), Some(0));
        assert_eq!(area.distance(&a, &Site::new(&[-1, -2])).unwrap(), Some(1));
        let closed = area.without(&Region::singleton(Site::new(&[0, 2])));
        assert_eq!(closed.distance(&a, &b).unwrap(), None);
        assert_eq!(closed.distance(&a, &Site::new(&[0, 0])), Err(Error::NotInUnfixedArea(Site::new(&[0, 0]))));
    }
}
