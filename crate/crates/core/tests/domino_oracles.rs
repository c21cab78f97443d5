//! Domino classes, kernels and Dobrushin entries against site-level oracles.

use std::collections::{BTreeSet, HashSet};

use thinlab_core::domino::*;
use thinlab_core::Site;

fn domino_sites(offset: &Site) -> [Site; 2] {
    let left = offset.shifted(0, offset.coord(0));
    [left, left.shifted(0, 1)]
}

/// Class of a boundary computed on explicit site sets: a centre value is
/// allowed when no occupied centre site or centre neighbour ends up isolated.
fn class_by_sites(d: usize, offsets: &[DependenceOffset], values: &[u8]) -> AdmissibilityClass {
    let centre = domino_sites(&Site::origin(d));
    let mut known: HashSet<Site> = centre.iter().copied().collect();
    let mut occupied = HashSet::new();
    for (o, &v) in offsets.iter().zip(values) {
        let [l, r] = domino_sites(&o.offset);
        known.extend([l, r]);
        if v & 2 != 0 {
            occupied.insert(l);
        }
        if v & 1 != 0 {
            occupied.insert(r);
        }
    }
    let mut watched: Vec<Site> = centre.to_vec();
    for c in &centre {
        watched.extend(c.neighbors());
    }
    let mut flags = [false; 4];
    for (a, flag) in flags.iter_mut().enumerate() {
        let mut occ = occupied.clone();
        if a & 2 != 0 {
            occ.insert(centre[0]);
        }
        if a & 1 != 0 {
            occ.insert(centre[1]);
        }
        *flag = watched.iter().all(|s| {
            assert!(s.neighbors().all(|n| known.contains(&n)), "neighbourhood of {s} leaves the dependence set");
            !occ.contains(s) || s.neighbors().any(|n| occ.contains(&n))
        });
    }
    AdmissibilityClass::from_flags(flags)
}

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 33
    }
}

#[test]
fn local_map_matches_site_level_classes() {
    let mut rng = Lcg(5);
    for d in [2, 3] {
        let map = LocalMap::new(d).unwrap();
        for _ in 0..3000 {
            let values: Vec<u8> = (0..dependence_size(d)).map(|_| (rng.next() % 4) as u8).collect();
            let b = DominoBoundary { values: values.clone() };
            assert_eq!(map.class(&b).unwrap(), class_by_sites(d, map.offsets(), &values));
        }
    }
}

#[test]
fn census_has_seven_classes_all_allowing_the_full_domino() {
    let census = class_census(2).unwrap();
    assert_eq!(census.len(), 7);
    assert!(census.iter().all(|c| c.allows(3)));
    assert!(!census.contains(&AdmissibilityClass::parse("-+++").unwrap()));
    // Seven of the eight strings ending in `+` remain.
    let expected: BTreeSet<AdmissibilityClass> =
        (0..8u8).map(|low| AdmissibilityClass::from_bits(low | 8)).filter(|c| c.bits() != 0b1110).collect();
    assert_eq!(census, expected);
}

#[test]
fn kernel_vectors_are_normalised_on_realised_classes() {
    let census = class_census(2).unwrap();
    for c in &census {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let k = kernel_vector(p, *c).unwrap();
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for a in 0..4u8 {
                assert_eq!(k[a as usize] > 0.0, c.allows(a));
            }
        }
        let strong = kernel_vector(1.0 - 1e-6, *c).unwrap();
        for (a, x) in strong.iter().enumerate() {
            let target = if a == 3 { 1.0 } else { 0.0 };
            assert!((x - target).abs() < 1e-4);
        }
    }
}

#[test]
fn named_distances() {
    let minus = AdmissibilityClass::parse("---+").unwrap();
    let full = AdmissibilityClass::parse("++++").unwrap();
    let ends = AdmissibilityClass::parse("+--+").unwrap();
    for p in [0.1, 0.5, 0.9] {
        let (rho, q, _, _) = closed_form_curves(p);
        let dist = |a, b| tv_distance(&kernel_vector(p, a).unwrap(), &kernel_vector(p, b).unwrap());
        assert!((dist(minus, full) - rho).abs() < 1e-12);
        assert!((dist(ends, full) - q).abs() < 1e-12);
        assert_eq!(dist(full, full), 0.0);
    }
    let (rho, q, u, v) = closed_form_curves(0.9);
    assert!((rho - 0.19).abs() < 1e-15 && (q - 0.18).abs() < 1e-15);
    assert!((u - 0.1 / 0.91).abs() < 1e-15 && (v - 0.1).abs() < 1e-15);
}

#[test]
fn dobrushin_entries_follow_their_class_curves() {
    let table = BoundaryScan::full(2).unwrap().scan();
    assert!(table.offsets.iter().all(|o| o.class != DependenceClass::V5));
    for p in [0.8, 0.9, 0.95] {
        let mut total = 0.0;
        for (j, o) in table.offsets.iter().enumerate() {
            let entry = table.entry(j, p).unwrap();
            assert!((entry - class_curve(o.class, p)).abs() < 1e-12, "{:?} at {p}", o.class);
            total += entry;
        }
        assert!((total - dobrushin_constant_closed(p, 2)).abs() < 1e-12);
    }
    let v1 = table.offsets.iter().position(|o| o.class == DependenceClass::V1).unwrap();
    let v4 = table.offsets.iter().position(|o| o.class == DependenceClass::V4).unwrap();
    assert!((table.entry(v1, 0.95).unwrap() - 0.095).abs() < 1e-12);
    assert!((table.entry(v4, 0.95).unwrap() - 0.05).abs() < 1e-12);
}

#[test]
fn rho_is_the_largest_distance_between_realised_classes() {
    let census: Vec<AdmissibilityClass> = class_census(2).unwrap().into_iter().collect();
    for i in 0..=350 {
        let p = 0.65 + i as f64 * 0.001;
        let mut worst = 0.0f64;
        for a in &census {
            for b in &census {
                worst = worst.max(tv_distance(&kernel_vector(p, *a).unwrap(), &kernel_vector(p, *b).unwrap()));
            }
        }
        assert!((worst - closed_form_curves(p).0).abs() < 1e-12, "p={p}");
    }
}

#[test]
fn top_curves_are_ordered_above_the_crossing() {
    for i in 649..1000 {
        let p = i as f64 / 1000.0;
        let (rho, q, u, v) = closed_form_curves(p);
        assert!(rho >= q && q >= u && u >= v, "p={p}");
    }
    // Below the crossing q and u swap.
    let (_, q, u, _) = closed_form_curves(0.64);
    assert!(q < u);
}

fn removal_flags(rng: &mut Lcg, sites: usize) -> Vec<bool> {
    (0..sites).map(|_| rng.next() % 4 == 0).collect()
}

#[test]
fn removing_sites_never_raises_the_constant() {
    let sites = 2 * dependence_size(2);
    let full = BoundaryScan::full(2).unwrap().scan();
    let mut rng = Lcg(11);
    let mut patterns: Vec<Vec<bool>> = Vec::new();
    // Single holes at every site, then nested random removals.
    for k in 0..sites {
        let mut flags = vec![false; sites];
        flags[k] = true;
        patterns.push(flags);
    }
    for _ in 0..12 {
        patterns.push(removal_flags(&mut rng, sites));
    }
    for flags in patterns {
        let coarse = BoundaryScan::new(2, SitePattern::from_site_flags(2, &flags)).unwrap().scan();
        let mut finer = flags.clone();
        let extra = (rng.next() as usize) % sites;
        finer[extra] = true;
        let fine = BoundaryScan::new(2, SitePattern::from_site_flags(2, &finer)).unwrap().scan();
        for p in [0.6, 0.8, 0.9, 0.95] {
            let c_full = full.constant(p).unwrap();
            let c_coarse = coarse.constant(p).unwrap();
            let c_fine = fine.constant(p).unwrap();
            assert!(c_coarse <= c_full + 1e-12 && c_fine <= c_coarse + 1e-12, "{flags:?} at {p}");
        }
    }
}

#[test]
fn threshold_values_and_ordering() {
    let dob2 = threshold_dobrushin(2).unwrap();
    assert!((dob2 - 0.9155).abs() < 1e-3);
    assert!((threshold_dobrushin(3).unwrap() - 0.9663).abs() < 1e-3);
    assert!((dobrushin_constant_closed(dob2, 2) - 1.0).abs() < 1e-8);
    assert!((threshold_disagreement(2, None).unwrap() - 0.9428).abs() < 1e-4);
    assert!((threshold_disagreement(3, None).unwrap() - 0.9759).abs() < 1e-4);
    assert!((threshold_disagreement(2, Some(0.288)).unwrap() - 0.8438).abs() < 1e-4);
    assert!((threshold_simple(2).unwrap() - 0.9f64.sqrt()).abs() < 1e-15);
    let mut last = 0.0;
    for d in 2..=10 {
        let dob = threshold_dobrushin(d).unwrap();
        let simple = threshold_simple(d).unwrap();
        assert!(dob > last && simple > dob, "d={d}");
        last = dob;
        // Above the root the constant stays below one.
        for i in 1..=100 {
            let p = dob + (1.0 - dob) * i as f64 / 100.0;
            assert!(dobrushin_constant_closed(p, d) < 1.0);
        }
        let n = dependence_size(d) as f64;
        let p = simple + 1e-6;
        assert!(n * (1.0 - p * p) < 1.0);
    }
    assert!(threshold_dobrushin(1).is_err());
}
