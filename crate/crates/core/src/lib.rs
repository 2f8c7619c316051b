//! Monte Carlo and numerical tools for the convergence of first absolute
//! moments of renewal counting processes N(s) and subordinator first-passage
//! times T(s), together with the stable-law constants those limits involve.
//!
//! * [`distributions`]: inter-arrival laws and the stable limit law W.
//! * [`scaling`]: slowly varying functions, c(x) and the normalizers g(s).
//! * [`renewal`]: N(s), overshoots, Wald's identity, the exact Poisson oracle.
//! * [`subordinator`]: T(s), the skeleton count N*(s) and their coupling.
//! * [`limits`]: limit constants, E|W|^r in closed form and by quadrature.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod limits;
pub mod mc;
pub mod quadrature;
pub mod renewal;
pub mod scaling;
pub mod special;
pub mod subordinator;
pub mod table;

pub use distributions::stable::StableParams;
pub use distributions::InterarrivalSpec;
pub use error::{Error, Result};
pub use limits::{CaseKind, LimitCase};
pub use mc::McEstimate;
pub use scaling::{ScalingSolution, SlowlyVarying};
pub use subordinator::SubordinatorSpec;
pub use table::ConvergenceRow;
