//! Invariant suites run by `thinlab verify`.

use std::fmt;

use anyhow::Result;
use thinlab_core::domino::{class_curve, dobrushin_constant_closed, AdmissibilityClass, BoundaryScan};
use thinlab_core::exact::{CountPlan, FirstLayer, Requirement};
use thinlab_core::polymer::{polymer_partition_identity, AnnulusContext};
use thinlab_core::sampler::{empirical_thinned_marginal, stationary_frequencies, thinned_marginal_exact, SamplerConfig};
use thinlab_core::{Config, Region, Site, UnfixedArea};

use crate::commands::{self, Fill, PolymerWindow};
use crate::format::sig12;
use crate::manifest::Table;
use crate::parallel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    DobrushinBruteforce,
    PolymerIdentity,
    KpScan,
    ClassCensus,
    SamplerOracle,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::DobrushinBruteforce => "dobrushin-bruteforce",
            Suite::PolymerIdentity => "polymer-identity",
            Suite::KpScan => "kp-scan",
            Suite::ClassCensus => "class-census",
            Suite::SamplerOracle => "sampler-oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.name, self.detail, if self.pass { "PASS" } else { "FAIL" })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: Suite) -> SuiteReport {
        SuiteReport { suite, checks: Vec::new() }
    }

    fn check(&mut self, name: impl Into<String>, detail: impl Into<String>, pass: bool) {
        self.checks.push(Check { name: name.into(), detail: detail.into(), pass });
    }

    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    /// Rows `check,detail,pass`.
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["check", "detail", "pass"]);
        for c in &self.checks {
            t.push(vec![c.name.clone(), c.detail.clone(), c.pass.to_string()]);
        }
        t
    }
}

/// Knobs of the suites; the defaults are the documented verification scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Samples per marginal and sweeps per stationary chain.
    pub samples: u64,
    /// Polymer truncation of the kp scan.
    pub kp_truncation: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { seed: 0, samples: 1_000_000, kp_truncation: 4 }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    match suite {
        Suite::ClassCensus => class_census(),
        Suite::DobrushinBruteforce => dobrushin_bruteforce(),
        Suite::PolymerIdentity => polymer_identity(),
        Suite::KpScan => kp_scan(opts),
        Suite::SamplerOracle => sampler_oracle(opts),
    }
}

fn class_census() -> Result<SuiteReport> {
    let mut r = SuiteReport::new(Suite::ClassCensus);
    let classes = parallel::domino_scan(&BoundaryScan::full(2)?).classes;
    let missing = AdmissibilityClass::parse("-+++")?;
    let all_full = classes.iter().all(|c| c.allows(3));
    let absent = !classes.contains(&missing);
    r.check(
        "census",
        format!("{} classes, (-,+,+,+) {}", classes.len(), if absent { "absent" } else { "present" }),
        classes.len() == 7 && absent,
    );
    r.check("full-domino", "every realised class allows value 3", all_full);
    let names: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
    r.check("classes", names.join(" "), true);
    Ok(r)
}

/// Densities at which Dobrushin entries are compared with their curves.
pub const CURVE_CHECK_DENSITIES: [f64; 3] = [0.8, 0.9, 0.95];

fn dobrushin_bruteforce() -> Result<SuiteReport> {
    let mut r = SuiteReport::new(Suite::DobrushinBruteforce);
    let table = parallel::domino_scan(&BoundaryScan::full(2)?);
    for p in CURVE_CHECK_DENSITIES {
        let mut worst = 0.0f64;
        let mut total = 0.0;
        for (j, o) in table.offsets.iter().enumerate() {
            let e = table.entry(j, p)?;
            worst = worst.max((e - class_curve(o.class, p)).abs());
            total += e;
        }
        r.check(format!("entries p={p}"), format!("max deviation from class curves {worst:.3e}"), worst <= 1e-12);
        let closed = dobrushin_constant_closed(p, 2);
        r.check(
            format!("constant p={p}"),
            format!("sum {} vs closed form {}", sig12(total), sig12(closed)),
            (total - closed).abs() <= 1e-12,
        );
    }
    Ok(r)
}

/// One polymer-identity instance.
#[derive(Clone, Debug)]
pub struct IdentityFixture {
    pub name: String,
    pub delta: Region,
    pub lambda: Region,
    pub inner: Fill,
    pub outer: Fill,
}

impl IdentityFixture {
    pub fn context(&self) -> Result<AnnulusContext> {
        let inner = Config::from_fn(self.lambda.thick_boundary(), |_| self.inner.occupied());
        let outer = Config::from_fn(self.delta.outer_boundary(), |_| self.outer.occupied());
        Ok(AnnulusContext::full(&self.delta, &self.lambda, &inner, &outer)?)
    }
}

/// The bundled fixtures: lines, boxes up to 4x4 and a 5x5 annulus around the
/// origin, with vacant and occupied surroundings.
pub fn identity_fixtures() -> Vec<IdentityFixture> {
    let origin1 = || Region::singleton(Site::new(&[0]));
    let mut out = Vec::new();
    let mut add = |name: String, delta: Region, lambda: Region, inner: Fill, outer: Fill| {
        out.push(IdentityFixture { name, delta, lambda, inner, outer });
    };
    for (inner, outer) in [(Fill::Vacant, Fill::Vacant), (Fill::Vacant, Fill::Occupied), (Fill::Occupied, Fill::Vacant)]
    {
        add(format!("line11-{inner:?}-{outer:?}"), Region::cuboid(&[-5], &[5]), origin1(), inner, outer);
    }
    add("line7-occupied".into(), Region::cuboid(&[-3], &[3]), origin1(), Fill::Occupied, Fill::Occupied);
    add("line13-vacant".into(), Region::cuboid(&[-6], &[6]), origin1(), Fill::Vacant, Fill::Vacant);
    for outer in [Fill::Vacant, Fill::Occupied] {
        add(format!("box5x3-{outer:?}"), Region::cuboid(&[-2, -1], &[2, 1]), Region::empty(2), Fill::Vacant, outer);
        add(format!("box4x4-{outer:?}"), Region::cuboid(&[-1, -1], &[2, 2]), Region::empty(2), Fill::Vacant, outer);
        add(format!("box4x3-{outer:?}"), Region::cuboid(&[0, 0], &[3, 2]), Region::empty(2), Fill::Vacant, outer);
        add(
            format!("cube2x2x3-{outer:?}"),
            Region::cuboid(&[0, 0, 0], &[1, 1, 2]),
            Region::empty(3),
            Fill::Vacant,
            outer,
        );
    }
    add(
        "annulus5x5-Vacant-Occupied".into(),
        Region::centered_cube(2, 5),
        Region::singleton(Site::origin(2)),
        Fill::Vacant,
        Fill::Occupied,
    );
    out
}

fn polymer_identity() -> Result<SuiteReport> {
    let mut r = SuiteReport::new(Suite::PolymerIdentity);
    for fx in identity_fixtures() {
        let ctx = fx.context()?;
        let id = polymer_partition_identity(&ctx)?;
        r.check(
            fx.name.clone(),
            format!(
                "{} random sites, {} families, {} active polymers, lhs {:?}",
                ctx.random_mask().count_ones(),
                id.families,
                id.active_polymers,
                id.lhs
            ),
            id.equal,
        );
    }
    Ok(r)
}

/// Result of the kp scan on one exterior.
#[derive(Clone, Debug)]
pub struct KpOutcome {
    pub exterior: Fill,
    pub estimate: Option<f64>,
    pub table: Table,
    pub direct_checks: usize,
    pub certified: bool,
}

/// Upper end of the kp grid.
pub const KP_GRID_TOP: f64 = 1e-2;

pub fn kp_outcome(exterior: Fill, truncation: usize) -> Result<KpOutcome> {
    let win = PolymerWindow { side: 7, origin_inside: false, inner: Fill::Vacant, exterior };
    let ctx = win.context()?;
    let scan = commands::kp_scan(&ctx, truncation, &commands::kp_grid(KP_GRID_TOP))?;
    let (direct_checks, certified) = match scan.estimate {
        Some(p) => commands::kp_certificate(&ctx, &scan.weighted, p, 4),
        None => (0, false),
    };
    Ok(KpOutcome { exterior, estimate: scan.estimate, table: scan.table, direct_checks, certified })
}

fn kp_scan(opts: &VerifyOptions) -> Result<SuiteReport> {
    let mut r = SuiteReport::new(Suite::KpScan);
    for exterior in [Fill::Vacant, Fill::Occupied] {
        let out = kp_outcome(exterior, opts.kp_truncation)?;
        let detail = match out.estimate {
            Some(p) => format!(
                "7x7 window, polymers up to size {}: q1 estimate {}, targets up to size 4 certified ({} direct)",
                opts.kp_truncation,
                sig12(p),
                out.direct_checks
            ),
            None => "condition fails at every grid density".to_string(),
        };
        r.check(format!("kp-{exterior:?}"), detail, out.estimate.is_some() && out.certified);
    }
    Ok(r)
}

/// Marginal densities checked by the sampler suite.
pub const MARGINAL_DENSITIES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Survival probability of the origin from the counting engine.
pub fn engine_marginal(p: f64, d: usize) -> Result<f64> {
    let o = Site::origin(d);
    let free = Region::new(d, std::iter::once(o).chain(o.neighbors()));
    let plan = CountPlan::new(&free, &Config::vacant(Region::empty(d)), &[], &[Requirement::isolated(o)])?;
    let counts = plan.count();
    Ok(counts.both.evaluate(p) / counts.base.evaluate(p))
}

/// Stationary-law windows: at most four dominos each.
pub fn stationary_windows() -> Vec<(String, Region, Config, f64)> {
    let square = Region::cuboid(&[0, 0], &[1, 1]);
    let row = Region::cuboid(&[0, 0], &[3, 0]);
    let block = Region::cuboid(&[0, 0], &[3, 1]);
    vec![
        ("2x2-vacant".into(), square.clone(), Config::vacant(square.outer_boundary()), 0.4),
        ("2x2-checkerboard".into(), square.clone(), Config::checkerboard(square.outer_boundary()), 0.4),
        ("4x1-occupied".into(), row.clone(), Config::filled(row.outer_boundary()), 0.5),
        ("4x2-vacant".into(), block.clone(), Config::vacant(block.outer_boundary()), 0.6),
    ]
}

/// Two-sided false-alarm rate of a 3 sigma test.
pub const THREE_SIGMA_RATE: f64 = 0.0027;

/// Per-outcome cutoff (in standard errors) that keeps the chance of any false
/// alarm among `outcomes` independent tests at the 3 sigma rate.
pub fn familywise_cutoff(outcomes: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let per_test = 1.0 - (1.0 - THREE_SIGMA_RATE).powf(1.0 / outcomes.max(1) as f64);
    Normal::standard().inverse_cdf(1.0 - per_test / 2.0)
}

/// Worst deviation of a stationary run and the number of outcomes with
/// positive probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryDeviation {
    pub worst: f64,
    pub outcomes: usize,
}

impl StationaryDeviation {
    pub fn cutoff(&self) -> f64 {
        familywise_cutoff(self.outcomes)
    }

    pub fn passed(&self) -> bool {
        self.worst <= self.cutoff()
    }
}

/// Largest deviation (in standard errors) of the chain's whole-window
/// frequencies from the first-layer kernel. The error of each outcome is the
/// batch-means estimate, floored by the binomial error of the exact value.
pub fn stationary_deviation(
    window: &Region,
    boundary: &Config,
    p: f64,
    sweeps: u64,
    seed: u64,
) -> Result<StationaryDeviation> {
    let s = UnfixedArea::full(window.clone());
    let layer = FirstLayer::new(window, &s, boundary)?;
    let cfg = SamplerConfig { p, window: window.clone(), seed, sweeps: sweeps as usize, boundary: boundary.clone() };
    let free = s.sites().clone();
    let mut worst = 0.0f64;
    let mut outcomes = 0;
    for (mask, est) in stationary_frequencies(&cfg, &s, 100)? {
        let omega = Config::new(free.clone(), (0..free.len()).map(|b| mask >> b & 1 == 1).collect())?;
        let exact = layer.probability(p, &omega)?;
        outcomes += usize::from(exact > 0.0);
        let binomial = (exact * (1.0 - exact) / est.samples as f64).sqrt();
        let se = est.stderr.max(binomial);
        let dev = if se > 0.0 { (est.estimate - exact).abs() / se } else if est.estimate == exact { 0.0 } else { f64::INFINITY };
        worst = worst.max(dev);
    }
    Ok(StationaryDeviation { worst, outcomes })
}

fn sampler_oracle(opts: &VerifyOptions) -> Result<SuiteReport> {
    let mut r = SuiteReport::new(Suite::SamplerOracle);
    for d in [1, 2] {
        let window = Region::centered_cube(d, 3);
        let boundary = Config::vacant(window.outer_boundary());
        let mut worst = 0.0f64;
        let mut engine_gap = 0.0f64;
        for (i, p) in MARGINAL_DENSITIES.into_iter().enumerate() {
            let exact = thinned_marginal_exact(p, d);
            engine_gap = engine_gap.max((engine_marginal(p, d)? - exact).abs());
            let cfg = SamplerConfig {
                p,
                window: window.clone(),
                seed: opts.seed.wrapping_add(i as u64),
                sweeps: 1,
                boundary: boundary.clone(),
            };
            let est = empirical_thinned_marginal(&cfg, &Site::origin(d), opts.samples)?;
            worst = worst.max(est.deviation(exact));
        }
        r.check(
            format!("marginal d={d}"),
            format!("{} samples per density, worst {worst:.2} sigma, engine gap {engine_gap:.1e}", opts.samples),
            worst <= 3.0 && engine_gap <= 1e-14,
        );
    }
    for (name, window, boundary, p) in stationary_windows() {
        let dev = stationary_deviation(&window, &boundary, p, opts.samples, opts.seed)?;
        r.check(
            format!("stationary {name}"),
            format!(
                "p={p}, {} sweeps, worst {:.2} sigma over {} outcomes (family-wise 3 sigma cutoff {:.2})",
                opts.samples,
                dev.worst,
                dev.outcomes,
                dev.cutoff()
            ),
            dev.passed(),
        );
    }
    Ok(r)
}
