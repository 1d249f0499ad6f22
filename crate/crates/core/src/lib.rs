//! Computable calculus of variations over generalized smooth functions.
//!
//! Generalized numbers are represented as sampled ε-nets over a gauge
//! ([`gauge`]). Heaviside and Dirac singularities are embedded through a
//! vanishing-moment mollifier ([`mollifier`]) and handled as ordinary smooth
//! nets by the calculus layer ([`gsf`]). On top of that sit higher-order
//! Euler–Lagrange, du Bois-Reymond and Noether identities ([`variational`]),
//! three singular mechanical systems integrated per ε ([`dynamics`]) and a
//! forward-backward sweep for weak Pontryagin extremals ([`optctrl`]).
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature.
#![cfg_attr(not(test), no_std)]
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the component formulas of the numerical kernels.
#![allow(clippy::needless_range_loop)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod dynamics;
pub mod error;
pub mod gauge;
pub mod gsf;
pub mod linalg;
pub mod mollifier;
pub mod ode;
pub mod optctrl;
pub mod poly;
pub mod quad;
pub mod variational;

pub use error::{Error, Result};
pub use gauge::{AsymptoticClass, ClassTag, Gauge, GaugeKind, GenNumber, Thresholds};
pub use mollifier::{EmbeddedField, MollifierSpec, Source};


/// Version of this library, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
