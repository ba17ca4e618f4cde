//! Convex-order preserving quantisation of probability measures on ℝ^d and
//! discrete martingale optimal transport.
//!
//! Given a martingale coupling π of μ ≤cx ν and two finite partitions, the
//! barycentric quantiser replaces every cell (product cell) by its
//! conditional barycentre. The resulting finitely supported pair
//! (μ_n, ν_n) stays in convex order and converges to (μ, ν) as the
//! partitions refine, so the martingale transport problem between them is a
//! finite linear program.
//!
//! Modules:
//! - [`measures`]: points, discrete measures and couplings, partitions,
//!   quadrature grids, transport kernels, costs.
//! - [`quantise`]: U-quantisation, (proper) barycentric quantisation,
//!   partition builders.
//! - [`lp`]: two-phase revised simplex.
//! - [`mot`]: OT/MOT assembly and solves, Wasserstein distances, convex-order
//!   checks, quantisation error bounds.
//! - [`couplings`]: analytic martingale transports between uniform and
//!   Gaussian laws.
//! - [`experiment`]: stability tables and the worked example pipelines.

pub mod couplings;
pub mod experiment;
pub mod lp;
pub mod measures;
pub mod mot;
pub mod par;
pub mod quantise;

pub use measures::{
    Atom, BoxBounds, BoxCell, Cell, CostFunction, CouplingAtom, DiscreteCoupling, DiscreteMeasure,
    KernelBranch, KernelCoupling, MeasureError, Partition, PartitionError, Point, QuadratureMeasure,
};
pub use par::Execution;
