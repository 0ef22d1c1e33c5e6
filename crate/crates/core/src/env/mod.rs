//! Environment machinery: the driving Markov chain, the shift, laws of
//! motion on `R^n`, paths and cocycles.

mod chain;
mod path;
mod stream;
mod system;

pub use chain::{
    check_irreducible, stationary_distribution, validate_transition, EnvironmentChain,
    STATIONARY_RESIDUAL, SUM_TOLERANCE,
};
pub use path::{simulate_path, Path};
pub use stream::OmegaStream;
pub use system::{
    compose_cocycle, Domain, FixedPointDerivativeFn, JacobianFn, LawFn, LipschitzBoundFn,
    RandomSystem, SystemBuilder, FIXED_POINT_TOLERANCE,
};
