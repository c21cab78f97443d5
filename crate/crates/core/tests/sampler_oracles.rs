//! Monte Carlo estimates against exact values from the counting engine.

use thinlab_core::exact::{CountPlan, FirstLayer, Requirement};
use thinlab_core::sampler::*;
use thinlab_core::{Config, Region, Site, UnfixedArea};

fn config(p: f64, window: Region, seed: u64, sweeps: usize, boundary: Config) -> SamplerConfig {
    SamplerConfig { p, window, seed, sweeps, boundary }
}

fn closed_neighbourhood(d: usize) -> Region {
    let o = Site::origin(d);
    Region::new(d, std::iter::once(o).chain(o.neighbors()))
}

/// Survival probability of the origin from the counting engine.
fn engine_marginal(p: f64, d: usize) -> f64 {
    let free = closed_neighbourhood(d);
    let plan = CountPlan::new(&free, &Config::vacant(Region::empty(d)), &[], &[Requirement::isolated(Site::origin(d))])
        .unwrap();
    let counts = plan.count();
    counts.both.evaluate(p) / counts.base.evaluate(p)
}

#[test]
fn bernoulli_fields_are_reproducible_and_unbiased() {
    let window = Region::cuboid(&[0, 0], &[99, 99]);
    let boundary = Config::vacant(window.outer_boundary());
    let a = sample_bernoulli(&config(0.3, window.clone(), 9, 1, boundary.clone())).unwrap();
    let b = sample_bernoulli(&config(0.3, window.clone(), 9, 1, boundary.clone())).unwrap();
    let c = sample_bernoulli(&config(0.3, window.clone(), 10, 1, boundary)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let est = Estimate::from_hits(a.count_occupied() as u64, window.len() as u64);
    assert!(est.deviation(0.3) < 4.0);
}

#[test]
fn thinned_marginals_match_closed_form_and_engine() {
    for d in [1, 2] {
        let window = Region::centered_cube(d, 3);
        let boundary = Config::vacant(window.outer_boundary());
        for i in 1..=9 {
            let p = i as f64 / 10.0;
            let exact = thinned_marginal_exact(p, d);
            assert!((engine_marginal(p, d) - exact).abs() < 1e-15);
            let cfg = config(p, window.clone(), 100 + i, 1, boundary.clone());
            let est = empirical_thinned_marginal(&cfg, &Site::origin(d), 200_000).unwrap();
            assert!(est.deviation(exact) < 4.0, "d={d} p={p}: {est:?} vs {exact}");
        }
    }
}

#[test]
fn thinned_value_agrees_with_isolation_on_sampled_fields() {
    let window = Region::cuboid(&[-3, -3], &[3, 3]);
    let boundary = Config::vacant(window.outer_boundary());
    let mut hits = 0u64;
    let runs = 4000u64;
    for seed in 0..runs {
        let omega = sample_bernoulli(&config(0.2, window.clone(), seed, 1, boundary.clone())).unwrap();
        let alive = thinned_value(&omega, &Site::origin(2)).unwrap();
        let by_hand = omega.get(&Site::origin(2)).unwrap()
            && Site::origin(2).neighbors().all(|n| !omega.get(&n).unwrap());
        assert_eq!(alive, by_hand);
        hits += alive as u64;
    }
    assert!(Estimate::from_hits(hits, runs).deviation(thinned_marginal_exact(0.2, 2)) < 4.0);
}

fn stationary_matches_kernel(window: Region, boundary: Config, p: f64, sweeps: usize, sigmas: f64) {
    let s = UnfixedArea::full(window.clone());
    let layer = FirstLayer::new(&window, &s, &boundary).unwrap();
    let cfg = config(p, window.clone(), 21, sweeps, boundary);
    let free = s.sites().clone();
    for (mask, est) in stationary_frequencies(&cfg, &s, 100).unwrap() {
        let omega = Config::new(free.clone(), (0..free.len()).map(|b| mask >> b & 1 == 1).collect()).unwrap();
        let exact = layer.probability(p, &omega).unwrap();
        if exact == 0.0 {
            assert_eq!(est.estimate, 0.0, "infeasible state {mask:#b} visited");
        } else {
            assert!(est.deviation(exact) < sigmas, "{mask:#b}: {est:?} vs {exact}");
        }
    }
}

#[test]
fn stationary_law_matches_first_layer_kernel() {
    let square = Region::cuboid(&[0, 0], &[1, 1]);
    stationary_matches_kernel(square.clone(), Config::vacant(square.outer_boundary()), 0.4, 200_000, 4.0);
    stationary_matches_kernel(square.clone(), Config::checkerboard(square.outer_boundary()), 0.6, 200_000, 4.0);
    let row = Region::cuboid(&[0, 0], &[3, 0]);
    stationary_matches_kernel(row.clone(), Config::filled(row.outer_boundary()), 0.5, 200_000, 4.0);
}

#[test]
fn strong_field_fills_dominos() {
    let window = Region::cuboid(&[0, 0], &[7, 7]);
    let s = UnfixedArea::full(window.clone());
    let cfg = config(0.99, window.clone(), 5, 200, Config::checkerboard(window.outer_boundary()));
    let (_, trace) = heat_bath_chain(&cfg, &s).unwrap();
    let tail: Vec<f64> = trace[100..].iter().map(|t| t.full_dominos).collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    assert!(mean > 0.99 * 0.99 - 0.02, "mean full fraction {mean}");
    assert!(trace.iter().enumerate().all(|(t, s)| s.sweep == t + 1));
}

#[test]
fn chains_are_reproducible() {
    let window = Region::cuboid(&[0, 0], &[5, 3]);
    let s = UnfixedArea::full(window.clone());
    let cfg = config(0.7, window.clone(), 77, 30, Config::vacant(window.outer_boundary()));
    assert_eq!(heat_bath_chain(&cfg, &s).unwrap(), heat_bath_chain(&cfg, &s).unwrap());
}

#[test]
fn coupled_chains_merge_at_high_density() {
    let annulus = CoupledAnnulus::new(6).unwrap();
    let trace = disagreement_experiment(0.95, &annulus, 200, 1).unwrap();
    let tail = &trace[100..];
    let mean = tail.iter().map(|r| r.fraction).sum::<f64>() / tail.len() as f64;
    assert!(mean < 0.01, "tail disagreement {mean}");
}

#[test]
fn identical_boundaries_never_disagree() {
    let annulus = CoupledAnnulus::new(4).unwrap();
    let outer = annulus.window.outer_boundary();
    let b = Config::checkerboard(outer);
    let trace = disagreement_between(0.5, &annulus, 50, 3, &b, &b).unwrap();
    assert!(trace.iter().all(|r| r.fraction == 0.0));
}

#[test]
fn invalid_settings_are_rejected() {
    let window = Region::cuboid(&[0, 0], &[1, 1]);
    let boundary = Config::vacant(window.outer_boundary());
    assert!(sample_bernoulli(&config(1.5, window.clone(), 0, 1, boundary.clone())).is_err());
    assert!(sample_bernoulli(&config(0.5, window.clone(), 0, 0, boundary.clone())).is_err());
    // The origin's neighbours leave a 2x2 window.
    let cfg = config(0.5, window, 0, 1, boundary);
    assert!(empirical_thinned_marginal(&cfg, &Site::origin(2), 10).is_err());
    assert!(CoupledAnnulus::new(0).is_err());
}
