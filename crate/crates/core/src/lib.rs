//! Exact and Monte Carlo machinery for Bernoulli lattice fields under local
//! thinning (keep a particle only when all its nearest neighbours are vacant).
//!
//! The crate is `no_std` with `alloc`. Long enumerations are exposed as
//! independent chunks so that a std front end can fan them out over threads;
//! every chunked computation also has a sequential entry point.
//!
//! Modules:
//! - [`lattice`]: sites, regions, configurations, the thinning maps and the
//!   fixed/unfixed split induced by a thinned configuration.
//! - [`exact`]: occupancy-count enumeration, first-layer kernels, the local
//!   function `F` and finite-volume conditional probabilities of the image field.
//! - [`domino`]: the pair-spin reformulation, admissibility classes, total
//!   variation curves, Dobrushin constants and uniqueness thresholds.
//! - [`polymer`]: polymers, exact weights, the polymer-family identity and
//!   truncated cluster-expansion checks.
//! - [`sampler`]: seeded Bernoulli sampling and a domino heat-bath chain.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod domino;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod polymer;
pub mod sampler;

mod bits;

pub use error::{Error, Result};
pub use lattice::{Config, Region, Site, UnfixedArea};
