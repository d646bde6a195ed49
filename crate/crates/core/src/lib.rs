//! Monte Carlo engine for the neutron transport problem: branching-process
//! and random-walk simulators for the principal eigenvalue and
//! eigenfunctions, importance sampling via Doob h-transforms, cost
//! accounting with complexity-based budget planning, a sequential Monte
//! Carlo particle filter, and an analytic slab-reactor oracle for
//! verification.

pub mod cost;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod htransform;
pub mod nbp;
pub mod nrw;
pub mod numeric;
pub mod rng;
pub mod slab1d;
pub mod smc;
pub mod xsection;

pub use error::{Error, Result};
pub use geometry::{Circle, Domain, RegionId, Vec2, VelocitySpace};
pub use nbp::{simulate_nbp, NbpForest, NbpParticle, DEFAULT_POPULATION_CAP};
pub use nrw::{simulate_nrw, EndCause, NrwPath, PathEvent};
pub use rng::{cycle_rng, SimRng};
pub use xsection::{CrossSectionField, FissionKernel, Material, ScatterKernel, Violation};
