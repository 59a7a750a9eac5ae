// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combinatorics;
pub mod dd;
pub mod decimal;
pub mod error;
pub mod funcspace;

pub use dd::{Dd, Real};
pub use error::{Error, Result};
pub use funcspace::{SeriesMap, UnimodalMap};
pub use combinatorics::OrderType;
pub mod renorm;
pub use renorm::{FixedPointSolution, Precision, SolverOptions, SweepTable};
pub mod limit;
pub use limit::{EwLimitEstimate, LimitDiagnostics, PresentationIntervals};
pub mod complexdyn;
pub use complexdyn::{FlatExpMap, JuliaRaster, Tag, Viewport};
pub mod verify;
