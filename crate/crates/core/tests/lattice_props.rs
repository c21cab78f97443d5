use proptest::prelude::*;
use thinlab_core::lattice::*;
use thinlab_core::Error;

fn window(dim: usize, side: i32) -> Region {
    let lo = vec![0; dim];
    let hi = vec![side - 1; dim];
    Region::cuboid(&lo, &hi)
}

/// A random window (d = 1..3), a configuration on it and one on its outer boundary.
fn field() -> impl Strategy<Value = (Config, Config)> {
    (1usize..=3).prop_flat_map(|dim| {
        let side = match dim {
            1 => 9,
            2 => 4,
            _ => 3,
        };
        let w = window(dim, side);
        let ring = w.outer_boundary();
        (proptest::collection::vec(any::<bool>(), w.len()), proptest::collection::vec(any::<bool>(), ring.len()))
            .prop_map(move |(a, b)| (Config::new(w.clone(), a).unwrap(), Config::new(ring.clone(), b).unwrap()))
    })
}

proptest! {
    #[test]
    fn thinning_is_idempotent((omega, boundary) in field()) {
        let once = thin(&omega, &boundary).unwrap();
        let twice = thin(&once, &boundary).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn thinning_splits_the_configuration((omega, boundary) in field()) {
        let kept = thin(&omega, &boundary).unwrap();
        let rest = thin_complement(&omega, &boundary).unwrap();
        for ((&a, &b), &o) in kept.values().iter().zip(rest.values()).zip(omega.values()) {
            prop_assert!(!(a && b));
            prop_assert_eq!(a || b, o);
        }
    }

    #[test]
    fn images_have_no_adjacent_particles((omega, boundary) in field()) {
        let kept = thin(&omega, &boundary).unwrap();
        prop_assert!(check_admissible(&kept).is_ok());
    }

    #[test]
    fn thick_boundary_pieces_are_consistent(dim in 1usize..=3, k in 1usize..=4) {
        let lambda = Region::centered_cube(dim, k);
        let inner = lambda.inner_boundary();
        let interior = lambda.interior();
        prop_assert!(inner.intersection(&interior).is_empty());
        prop_assert_eq!(inner.union(&interior), lambda.clone());
        prop_assert_eq!(lambda.extension(), lambda.union(&lambda.outer_boundary()));
        prop_assert_eq!(lambda.thick_boundary(), inner.union(&lambda.outer_boundary()));
        prop_assert!(lambda.outer_boundary().intersection(&lambda).is_empty());
    }
}

/// Every preimage of an image agrees with the forced values on the fixed set.
#[test]
fn fixed_region_is_forced_by_every_preimage() {
    let w = window(2, 3);
    let boundary = Config::vacant(w.outer_boundary());
    let mut checked = 0;
    for bits in 0u32..(1 << w.len()) {
        let omega = Config::new(w.clone(), (0..w.len()).map(|i| bits >> i & 1 == 1).collect()).unwrap();
        let image = thin(&omega, &boundary).unwrap();
        let split = fixed_region(&image).unwrap();
        for s in split.fixed.iter() {
            assert_eq!(omega.get(s), split.forced.get(s), "site {s} of {bits:#b}");
        }
        assert!(split.unfixed.sites().intersection(&split.fixed).is_empty());
        checked += 1;
    }
    assert_eq!(checked, 512);
}

fn random_area(seed: u64) -> UnfixedArea {
    let w = window(2, 6);
    let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
    let s = w.filter(|_| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state % 4 != 0
    });
    UnfixedArea::new(w, s).unwrap()
}

/// Path distances inside S satisfy the metric axioms on each component.
#[test]
fn s_distance_is_a_metric() {
    for seed in 0..20 {
        let area = random_area(seed);
        let sites = area.sites().sites().to_vec();
        let table: Vec<Vec<Option<u32>>> = sites.iter().map(|x| area.distances_from(x).unwrap()).collect();
        for a in 0..sites.len() {
            assert_eq!(table[a][a], Some(0));
            for b in 0..sites.len() {
                assert_eq!(table[a][b], table[b][a]);
                if a != b {
                    assert_ne!(table[a][b], Some(0));
                }
                let Some(ab) = table[a][b] else { continue };
                for c in 0..sites.len() {
                    if let (Some(ac), Some(cb)) = (table[a][c], table[c][b]) {
                        assert!(ab <= ac + cb);
                    }
                }
            }
        }
    }
}

#[test]
fn unresolved_neighbours_are_reported() {
    let w = window(2, 2);
    let omega = Config::filled(w.clone());
    let partial = Config::vacant(Region::singleton(Site::new(&[-1, 0])));
    assert!(matches!(thin(&omega, &partial), Err(Error::UnresolvedNeighbor(_))));
}

#[test]
fn adjacent_image_particles_are_rejected() {
    let w = window(1, 3);
    let image = Config::with_occupied(w, &[Site::new(&[0]), Site::new(&[1])]);
    assert!(matches!(fixed_region(&image), Err(Error::NotAdmissible(_, _))));
}
