//! Certified lower/upper bounds on the extremal density `m(D)` of
//! distance-avoiding sets, together with numerically exercised versions of
//! the analytic machinery behind them: the zooming-out operator, saturation
//! functionals for admissible measures, a granular enumeration/search lower
//! bound for rasterized sets on tori, and exact rank certificates for
//! squared-distance matrices.
//!
//! Everything that feeds a certificate is computed in exact rational
//! arithmetic; floating point only appears in diagnostics and in Fourier-side
//! error bounds where it is safe to over-estimate.

pub mod bits;
pub mod distance;
pub mod error;
pub mod granular;
pub mod grid;
pub mod onedim;
pub mod rankcert;
pub mod rat;
pub mod saturation;
pub mod solver;
pub mod zoom;

pub use distance::{DistanceMode, DistanceSet};
pub use error::{AvoidError, Result};
pub use grid::{BoundsReport, GridIndicator, SlackMode, Violation};
pub use rat::Rat;
