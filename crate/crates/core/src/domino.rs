//! The pair-spin picture of the first-layer model.
//!
//! The lattice is tiled by dominos along the first axis: domino `a` covers
//! `(2a_1, a_2, ..)` and `(2a_1 + 1, a_2, ..)`. A domino value `v` in `0..4`
//! reads as two bits (left, right), so `1` means only the right site is
//! occupied. The centre domino sits at the origin; its dependence set holds
//! every domino with a site within lattice distance two of a centre site.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::lattice::Site;

/// Part of the dependence set a domino offset belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DependenceClass {
    /// `±e_i`, `i >= 2`: side neighbours.
    V1,
    /// `±e_1`: the two dominos along the axis.
    V2,
    /// `±e_1 ± e_i`: diagonal neighbours.
    V3,
    /// `±2e_i`, `i >= 2`: two steps sideways.
    V4,
    /// `±e_i ± e_j`, `2 <= i < j`: sideways diagonals (empty for `d = 2`).
    V5,
}

impl DependenceClass {
    pub const ALL: [DependenceClass; 5] =
        [DependenceClass::V1, DependenceClass::V2, DependenceClass::V3, DependenceClass::V4, DependenceClass::V5];

    /// Expected number of offsets in dimension `d`.
    pub fn size(self, d: usize) -> usize {
        match self {
            DependenceClass::V1 | DependenceClass::V4 => 2 * (d - 1),
            DependenceClass::V2 => 2,
            DependenceClass::V3 => 4 * (d - 1),
            DependenceClass::V5 => 2 * (d - 1) * (d - 2),
        }
    }
}

/// A domino offset with its class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DependenceOffset {
    pub offset: Site,
    pub class: DependenceClass,
}

fn domino_sites(offset: &Site) -> [Site; 2] {
    let left = offset.shifted(0, offset.coord(0));
    [left, left.shifted(0, 1)]
}

/// The dependence set of the centre domino in dimension `d`, sorted by offset.
pub fn dependence_set(d: usize) -> Result<Vec<DependenceOffset>> {
    if !(2..=crate::lattice::MAX_DIM).contains(&d) {
        return Err(if d < 2 { invalid("the domino picture needs d >= 2") } else { Error::UnsupportedDimension(d) });
    }
    let centre = domino_sites(&Site::origin(d));
    let mut out = Vec::new();
    let span = [-2, -1, 0, 1, 2];
    let mut coords = vec![0i32; d];
    let total = span.len().pow(d as u32);
    for mut n in 0..total {
        for c in coords.iter_mut() {
            *c = span[n % span.len()];
            n /= span.len();
        }
        let offset = Site::new(&coords);
        if offset == Site::origin(d) {
            continue;
        }
        let near = domino_sites(&offset).iter().any(|s| centre.iter().any(|c| c.l1_distance(s) <= 2));
        if !near {
            continue;
        }
        let side: Vec<i32> = coords[1..].iter().copied().filter(|&c| c != 0).collect();
        let class = match (coords[0], side.as_slice()) {
            (0, [x]) if x.abs() == 1 => DependenceClass::V1,
            (0, [x]) if x.abs() == 2 => DependenceClass::V4,
            (0, [_, _]) => DependenceClass::V5,
            (_, []) => DependenceClass::V2,
            (_, [_]) => DependenceClass::V3,
            _ => return Err(invalid("unexpected offset in the dependence set")),
        };
        out.push(DependenceOffset { offset, class });
    }
    out.sort_by_key(|a| a.offset);
    Ok(out)
}

/// `|V_0(d)| = 2d^2 + 2d - 2`.
pub fn dependence_size(d: usize) -> usize {
    2 * d * d + 2 * d - 2
}

/// Which centre values have positive probability under a boundary.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AdmissibilityClass(u8);

impl AdmissibilityClass {
    pub fn from_flags(flags: [bool; 4]) -> AdmissibilityClass {
        AdmissibilityClass(flags.iter().enumerate().fold(0, |m, (i, &f)| m | (f as u8) << i))
    }

    pub fn from_bits(bits: u8) -> AdmissibilityClass {
        AdmissibilityClass(bits & 0xf)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn allows(self, value: u8) -> bool {
        self.0 >> value & 1 == 1
    }

    pub fn flags(self) -> [bool; 4] {
        [self.allows(0), self.allows(1), self.allows(2), self.allows(3)]
    }

    /// Parses strings like `+--+`.
    pub fn parse(s: &str) -> Result<AdmissibilityClass> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 4 {
            return Err(invalid("a class string has four signs"));
        }
        let mut flags = [false; 4];
        for (f, c) in flags.iter_mut().zip(chars) {
            *f = match c {
                '+' => true,
                '-' => false,
                _ => return Err(invalid("class strings use only '+' and '-'")),
            };
        }
        Ok(AdmissibilityClass::from_flags(flags))
    }
}

impl fmt::Display for AdmissibilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in 0..4 {
            f.write_str(if self.allows(v) { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for AdmissibilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Domino values on the dependence set, in [`dependence_set`] order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DominoBoundary {
    pub values: Vec<u8>,
}

impl DominoBoundary {
    pub fn constant(d: usize, value: u8) -> DominoBoundary {
        DominoBoundary { values: vec![value; dependence_size(d)] }
    }

    /// Decodes a base-4 index (offset `i` is digit `i`).
    pub fn from_index(d: usize, mut index: u64) -> DominoBoundary {
        let values = (0..dependence_size(d))
            .map(|_| {
                let v = (index % 4) as u8;
                index /= 4;
                v
            })
            .collect();
        DominoBoundary { values }
    }
}

/// The centre domino with its dependence set laid out as bit positions.
///
/// Bits `0` and `1` are the left and right centre sites; dependence domino `i`
/// occupies bits `2 + 2i` (left) and `3 + 2i` (right).
#[derive(Clone, Debug)]
pub struct LocalMap {
    dim: usize,
    offsets: Vec<DependenceOffset>,
    /// Centre sites followed by their outside neighbours, with neighbour masks.
    checks: Vec<(u128, u128)>,
}

impl LocalMap {
    pub fn new(d: usize) -> Result<LocalMap> {
        let offsets = dependence_set(d)?;
        let mut sites: Vec<Site> = domino_sites(&Site::origin(d)).to_vec();
        for o in &offsets {
            sites.extend(domino_sites(&o.offset));
        }
        if sites.len() > 128 {
            return Err(Error::UnsupportedDimension(d));
        }
        let bit = |s: &Site| sites.iter().position(|t| t == s).map(|i| 1u128 << i);
        let centre = [sites[0], sites[1]];
        let mut watched: Vec<Site> = centre.to_vec();
        for c in &centre {
            for n in c.neighbors() {
                if !watched.contains(&n) {
                    watched.push(n);
                }
            }
        }
        let mut checks = Vec::new();
        for s in &watched {
            let own = bit(s).ok_or(Error::UnresolvedNeighbor(*s))?;
            let mut nbrs = 0u128;
            for n in s.neighbors() {
                nbrs |= bit(&n).ok_or(Error::UnresolvedNeighbor(n))?;
            }
            checks.push((own, nbrs));
        }
        Ok(LocalMap { dim: d, offsets, checks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offsets(&self) -> &[DependenceOffset] {
        &self.offsets
    }

    fn class_of_bits(&self, boundary: u128) -> AdmissibilityClass {
        let mut flags = 0u8;
        for a in 0..4u8 {
            let occ = boundary | ((a >> 1) & 1) as u128 | (((a & 1) as u128) << 1);
            if self.checks.iter().all(|&(own, nbrs)| occ & own == 0 || occ & nbrs != 0) {
                flags |= 1 << a;
            }
        }
        AdmissibilityClass(flags)
    }

    fn boundary_bits(&self, values: impl Iterator<Item = u8>) -> u128 {
        values.enumerate().fold(0u128, |m, (i, v)| {
            m | (((v >> 1) & 1) as u128) << (2 + 2 * i) | ((v & 1) as u128) << (3 + 2 * i)
        })
    }

    /// The admissibility class induced by a boundary.
    pub fn class(&self, b: &DominoBoundary) -> Result<AdmissibilityClass> {
        if b.values.len() != self.offsets.len() {
            return Err(Error::DimensionMismatch { expected: self.offsets.len(), found: b.values.len() });
        }
        if b.values.iter().any(|&v| v > 3) {
            return Err(invalid("domino values lie in 0..4"));
        }
        Ok(self.class_of_bits(self.boundary_bits(b.values.iter().copied())))
    }

    /// Class of the boundary with base-4 index `index`.
    pub fn class_of_index(&self, mut index: u64) -> AdmissibilityClass {
        let digits = (0..self.offsets.len()).map(|_| {
            let v = (index % 4) as u8;
            index /= 4;
            v
        });
        self.class_of_bits(self.boundary_bits(digits))
    }
}

/// The admissibility class of a boundary in dimension `d`.
pub fn admissibility_class(b: &DominoBoundary, d: usize) -> Result<AdmissibilityClass> {
    LocalMap::new(d)?.class(b)
}

/// Pair weights `((1-p)^2, p(1-p), p(1-p), p^2)` restricted to the allowed
/// values and renormalised.
pub fn kernel_vector(p: f64, class: AdmissibilityClass) -> Result<[f64; 4]> {
    if class.bits() == 0 {
        return Err(Error::EmptyClass);
    }
    let q = 1.0 - p;
    let raw = [q * q, p * q, p * q, p * p];
    let mut v = [0.0; 4];
    for a in 0..4 {
        if class.allows(a as u8) {
            v[a] = raw[a];
        }
    }
    let z: f64 = v.iter().sum();
    if z <= 0.0 {
        // Only values of zero weight are allowed at this endpoint density;
        // spread the mass over them evenly.
        let n = class.bits().count_ones() as f64;
        for a in 0..4 {
            v[a] = if class.allows(a as u8) { 1.0 / n } else { 0.0 };
        }
        return Ok(v);
    }
    Ok(v.map(|x| x / z))
}

/// Half the L1 distance between two probability vectors.
pub fn tv_distance(u: &[f64; 4], w: &[f64; 4]) -> f64 {
    0.5 * u.iter().zip(w).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// The four rational curves `(rho, q, u, v)`.
pub fn closed_form_curves(p: f64) -> (f64, f64, f64, f64) {
    let q = 1.0 - p;
    (1.0 - p * p, 2.0 * p * q, q / (1.0 - p * q), q)
}

/// The closed-form Dobrushin constant `c(p, d)`.
pub fn dobrushin_constant_closed(p: f64, d: usize) -> f64 {
    let (rho, q, u, v) = closed_form_curves(p);
    let d = d as f64;
    rho * 2.0 * (d - 1.0) * (d - 2.0) + 2.0 * (d - 1.0) * q + 2.0 * u + 6.0 * (d - 1.0) * v
}

/// Closed-form curve the Dobrushin entry of a class follows.
pub fn class_curve(class: DependenceClass, p: f64) -> f64 {
    let (rho, q, u, v) = closed_form_curves(p);
    match class {
        DependenceClass::V1 => q,
        DependenceClass::V2 => u,
        DependenceClass::V3 | DependenceClass::V4 => v,
        DependenceClass::V5 => rho,
    }
}

/// Bisection bracket and tolerance for thresholds.
pub const THRESHOLD_BRACKET: (f64, f64) = (0.5, 1.0 - 1e-12);
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;

/// Largest density at which `c(p, d) = 1`; above it the Dobrushin constant is
/// below one.
pub fn threshold_dobrushin(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid("thresholds need d >= 2"));
    }
    let f = |p: f64| dobrushin_constant_closed(p, d) - 1.0;
    let (mut lo, mut hi) = THRESHOLD_BRACKET;
    // The constant must fall monotonically across the bracket.
    let samples = 256;
    let mut prev = f(lo);
    for i in 1..=samples {
        let x = lo + (hi - lo) * i as f64 / samples as f64;
        let y = f(x);
        if y > prev {
            return Err(Error::NoRoot);
        }
        prev = y;
    }
    if !(f(lo) > 0.0 && f(hi) < 0.0) {
        return Err(Error::NoRoot);
    }
    while hi - lo > THRESHOLD_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Disagreement-percolation threshold from the degree bound, or from a
/// supplied site-percolation threshold `pc` (solving `1 - p^2 = pc`).
pub fn threshold_disagreement(d: usize, site_percolation_pc: Option<f64>) -> Result<f64> {
    if d < 2 {
        return Err(invalid("thresholds need d >= 2"));
    }
    match site_percolation_pc {
        Some(pc) if pc > 0.0 && pc < 1.0 => Ok(libm::sqrt(1.0 - pc)),
        Some(_) => Err(invalid("a percolation threshold lies in (0, 1)")),
        None => {
            let n = dependence_size(d) as f64;
            Ok(libm::sqrt((n - 2.0) / (n - 1.0)))
        }
    }
}

/// Threshold from the crude bound `|V_0(d)| rho(p) < 1`.
pub fn threshold_simple(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid("thresholds need d >= 2"));
    }
    let n = dependence_size(d) as f64;
    Ok(libm::sqrt((n - 1.0) / n))
}

/// Restrictions on the dependence set coming from an unfixed area: removed
/// sites behave as vacant sites, so each domino keeps only the values that
/// leave its removed sites empty. Entry `i` is a 4-bit mask of allowed values.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SitePattern {
    pub allowed: Vec<u8>,
}

impl SitePattern {
    /// Every value allowed everywhere.
    pub fn full(d: usize) -> SitePattern {
        SitePattern { allowed: vec![0xf; dependence_size(d)] }
    }

    /// Removes sites given as `(domino index, side)` with side 0 = left.
    pub fn with_removed(d: usize, removed: &[(usize, u8)]) -> SitePattern {
        let mut pat = SitePattern::full(d);
        for &(i, side) in removed {
            let bit = if side == 0 { 2 } else { 1 };
            for v in 0..4u8 {
                if v & bit != 0 {
                    pat.allowed[i] &= !(1 << v);
                }
            }
        }
        pat
    }

    /// Builds the pattern from a removal flag per dependence site, ordered as
    /// domino 0 left, domino 0 right, domino 1 left, ...
    pub fn from_site_flags(d: usize, removed: &[bool]) -> SitePattern {
        let list: Vec<(usize, u8)> =
            removed.iter().enumerate().filter(|(_, &r)| r).map(|(k, _)| (k / 2, (k % 2) as u8)).collect();
        SitePattern::with_removed(d, &list)
    }

    fn values(&self, i: usize) -> Vec<u8> {
        (0..4u8).filter(|v| self.allowed[i] >> v & 1 == 1).collect()
    }

    /// Number of boundaries compatible with the pattern.
    pub fn boundary_count(&self) -> u64 {
        self.allowed.iter().map(|m| m.count_ones() as u64).product()
    }
}

/// Which class pairs occur for boundaries that differ at a single dependence
/// domino, one 16x16 bit matrix per offset. Entry `[a] >> b` is set when some
/// pair of boundaries with classes `a` and `b` differs only at that offset.
/// The matrices do not depend on `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoOccurrence {
    pub offsets: Vec<DependenceOffset>,
    pub pairs: Vec<[u16; 16]>,
    /// Every class that occurred.
    pub classes: BTreeSet<AdmissibilityClass>,
}

impl CoOccurrence {
    fn empty(offsets: Vec<DependenceOffset>) -> CoOccurrence {
        let n = offsets.len();
        CoOccurrence { offsets, pairs: vec![[0u16; 16]; n], classes: BTreeSet::new() }
    }

    pub fn merge(mut self, other: &CoOccurrence) -> CoOccurrence {
        for (a, b) in self.pairs.iter_mut().zip(&other.pairs) {
            for (x, y) in a.iter_mut().zip(b) {
                *x |= y;
            }
        }
        self.classes.extend(other.classes.iter().copied());
        self
    }

    /// Class pairs seen at offset `j`.
    pub fn pairs_at(&self, j: usize) -> Vec<(AdmissibilityClass, AdmissibilityClass)> {
        let mut out = Vec::new();
        for a in 0..16u8 {
            for b in 0..16u8 {
                if self.pairs[j][a as usize] >> b & 1 == 1 {
                    out.push((AdmissibilityClass(a), AdmissibilityClass(b)));
                }
            }
        }
        out
    }

    /// Dobrushin entry at offset `j`: the largest kernel distance over the
    /// class pairs seen there.
    pub fn entry(&self, j: usize, p: f64) -> Result<f64> {
        let mut best = 0.0f64;
        for (a, b) in self.pairs_at(j) {
            best = best.max(tv_distance(&kernel_vector(p, a)?, &kernel_vector(p, b)?));
        }
        Ok(best)
    }

    /// Sum of all entries.
    pub fn constant(&self, p: f64) -> Result<f64> {
        (0..self.pairs.len()).map(|j| self.entry(j, p)).sum()
    }
}

/// Exhaustive scan of all boundaries compatible with a site pattern. The scan
/// runs over mixed-radix indices; `chunk` selects a slice of `2^16` of them so
/// that callers can spread the work.
#[derive(Clone, Debug)]
pub struct BoundaryScan {
    map: LocalMap,
    pattern: SitePattern,
    choices: Vec<Vec<u8>>,
}

/// Boundaries handled per scan chunk.
pub const SCAN_CHUNK: u64 = 1 << 16;

impl BoundaryScan {
    pub fn new(d: usize, pattern: SitePattern) -> Result<BoundaryScan> {
        if d != 2 {
            return Err(Error::UnsupportedDimension(d));
        }
        let map = LocalMap::new(d)?;
        if pattern.allowed.len() != map.offsets().len() {
            return Err(Error::DimensionMismatch { expected: map.offsets().len(), found: pattern.allowed.len() });
        }
        let choices = (0..pattern.allowed.len()).map(|i| pattern.values(i)).collect::<Vec<_>>();
        if choices.iter().any(Vec::is_empty) {
            return Err(invalid("a site pattern must leave every domino at least one value"));
        }
        Ok(BoundaryScan { map, pattern, choices })
    }

    pub fn full(d: usize) -> Result<BoundaryScan> {
        BoundaryScan::new(d, SitePattern::full(d))
    }

    pub fn pattern(&self) -> &SitePattern {
        &self.pattern
    }

    pub fn chunk_count(&self) -> usize {
        self.pattern.boundary_count().div_ceil(SCAN_CHUNK) as usize
    }

    pub fn scan_chunk(&self, chunk: usize) -> CoOccurrence {
        let mut out = CoOccurrence::empty(self.map.offsets().to_vec());
        let total = self.pattern.boundary_count();
        let start = chunk as u64 * SCAN_CHUNK;
        let end = (start + SCAN_CHUNK).min(total);
        let n = self.choices.len();
        let mut digits = vec![0usize; n];
        let mut rem = start;
        for (i, c) in self.choices.iter().enumerate() {
            digits[i] = (rem % c.len() as u64) as usize;
            rem /= c.len() as u64;
        }
        let mut values: Vec<u8> = (0..n).map(|i| self.choices[i][digits[i]]).collect();
        for _ in start..end {
            let bits = self.map.boundary_bits(values.iter().copied());
            let here = self.map.class_of_bits(bits);
            out.classes.insert(here);
            for j in 0..n {
                // Pair with every larger allowed value at j, both orientations.
                for &w in &self.choices[j][digits[j] + 1..] {
                    let mut alt = values.clone();
                    alt[j] = w;
                    let there = self.map.class_of_bits(self.map.boundary_bits(alt.iter().copied()));
                    out.pairs[j][here.0 as usize] |= 1 << there.0;
                    out.pairs[j][there.0 as usize] |= 1 << here.0;
                }
            }
            // Advance the mixed-radix counter.
            for i in 0..n {
                digits[i] += 1;
                if digits[i] < self.choices[i].len() {
                    values[i] = self.choices[i][digits[i]];
                    break;
                }
                digits[i] = 0;
                values[i] = self.choices[i][0];
            }
        }
        out
    }

    /// Sequential scan of every chunk.
    pub fn scan(&self) -> CoOccurrence {
        (0..self.chunk_count())
            .map(|c| self.scan_chunk(c))
            .reduce(|a, b| a.merge(&b))
            .unwrap_or_else(|| CoOccurrence::empty(self.map.offsets().to_vec()))
    }
}

/// Brute-force Dobrushin entry at offset index `j` for `d = 2`.
pub fn dobrushin_entry_bruteforce(p: f64, j: usize, d: usize) -> Result<f64> {
    let table = BoundaryScan::full(d)?.scan();
    if j >= table.pairs.len() {
        return Err(invalid("offset index out of range"));
    }
    table.entry(j, p)
}

/// The realised classes of all boundaries, via a full scan.
pub fn class_census(d: usize) -> Result<BTreeSet<AdmissibilityClass>> {
    Ok(BoundaryScan::full(d)?.scan().classes)
}

/// A distinct curve among the pairwise distances of realised classes.
#[derive(Clone, Debug)]
pub struct CurveGroup {
    pub label: String,
    pub pairs: Vec<(AdmissibilityClass, AdmissibilityClass)>,
}

/// Groups the pairwise kernel distances of `classes` into distinct curves on
/// `grid`: two pairs share a curve when their distances agree within `tol` at
/// every grid point. Curves matching `rho`, `q`, `u`, `v` get those labels,
/// the others `c1`, `c2`, ... in order of first appearance.
pub fn group_tv_curves(classes: &[AdmissibilityClass], grid: &[f64], tol: f64) -> Result<Vec<CurveGroup>> {
    let mut groups: Vec<(Vec<f64>, CurveGroup)> = Vec::new();
    for (i, &a) in classes.iter().enumerate() {
        for &b in &classes[i + 1..] {
            let values = grid
                .iter()
                .map(|&p| Ok(tv_distance(&kernel_vector(p, a)?, &kernel_vector(p, b)?)))
                .collect::<Result<Vec<f64>>>()?;
            match groups.iter_mut().find(|(v, _)| v.iter().zip(&values).all(|(x, y)| (x - y).abs() <= tol)) {
                Some((_, g)) => g.pairs.push((a, b)),
                None => groups.push((values, CurveGroup { label: String::new(), pairs: vec![(a, b)] })),
            }
        }
    }
    let names = ["rho", "q", "u", "v"];
    let mut unnamed = 0;
    for (values, g) in groups.iter_mut() {
        let hit = names.iter().enumerate().find(|(k, _)| {
            grid.iter().zip(values.iter()).all(|(&p, &y)| {
                let c = closed_form_curves(p);
                let target = [c.0, c.1, c.2, c.3][*k];
                (target - y).abs() <= tol
            })
        });
        g.label = match hit {
            Some((_, n)) => String::from(*n),
            None => {
                unnamed += 1;
                alloc::format!("c{unnamed}")
            }
        };
    }
    Ok(groups.into_iter().map(|(_, g)| g).collect())
}
