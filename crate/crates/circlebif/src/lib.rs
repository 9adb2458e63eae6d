//! circlebif: numerical bifurcation analysis for one- and two-parameter
//! families of orientation-preserving circle diffeomorphisms.
//!
//! The toolkit computes rotation numbers, enumerates and classifies
//! periodic orbits, traces saddle-node curves through the parameter plane
//! by pseudo-arclength continuation (detecting cusps, tangencies,
//! intersections and boundary hits), constructs families with a prescribed
//! number of coexisting periodic orbits, and evaluates the source-count
//! parity invariant that separates families up to weak topological
//! equivalence.
//!
//! The numeric core is generic over the scalar type (see [`scalar::Scalar`]);
//! the aliases below pin the default `f64` instantiation that the CLI and
//! the shipped tolerances target.

pub mod bifurcation;
pub mod census;
pub mod cli;
pub mod family;
pub mod invariants;
pub mod jet;
pub mod linalg;
pub mod output;
pub mod rational;
pub mod rotation;
pub mod scalar;

pub use rational::Rational;
pub use scalar::Scalar;

/// Default scalar type.
pub type Real = f64;

pub type Jet = jet::Jet3<Real>;
pub type Family = family::FamilySpec<Real>;
pub type Orbit = census::PeriodicOrbit<Real>;
pub type Census = census::OrbitCensus<Real>;
pub type Curve = bifurcation::SaddleNodeCurve<Real>;
pub type Diagram = bifurcation::BifurcationDiagram<Real>;
