//! Billiards in the exterior of ball obstacles on the m-torus, computed in
//! the universal cover.
//!
//! The crate validates obstacle configurations against the standing
//! geometric assumptions, decides admissibility of reflection itineraries,
//! builds the directed graphs that encode them, constructs trajectory pieces
//! and periodic orbits of prescribed type by length minimization, traces the
//! exact flow, and samples the admissible rotation set with executable
//! versions of its convexity, density, and proper-inclusion properties.
//!
//! Module map:
//!
//! * [`scene`] — obstacle configurations, validation, the between-predicate
//!   via hull distance, and the escape-bound search.
//! * [`admissible`] — symbolic itineraries, the increment graph and the exact
//!   transition graph, connectors, cycle enumeration, block concatenation.
//! * [`varpath`] — variational construction of trajectory pieces and periodic
//!   orbits with reflection, grazing, and clearance certificates.
//! * [`flow`] — exact ray-traced dynamics, time reversal, rotation estimates,
//!   and the far-flight construction.
//! * [`rotset`] — rotation samples, cloud and hull, the convexity experiment
//!   with its error budget, density probe, and the inclusion certificate.
//! * [`io`] — file formats for scenes, sequences, graphs, orbits, flights,
//!   and clouds.

pub mod admissible;
pub mod flow;
pub mod hull;
pub mod io;
pub mod linalg;
pub mod raycast;
pub mod rotset;
pub mod scene;
pub mod varpath;

pub use admissible::{
    check_admissible, AdmissibilityVerdict, IncrementGraph, PeriodicType, SymbolicSequence,
    TransitionGraph,
};
pub use flow::{Flight, FlowState};
pub use rotset::{RotationCloud, RotationSample};
pub use scene::{LatticeObstacleId, Obstacle, Scene, ValidationReport};
pub use varpath::{PeriodicOrbit, TrajectoryPiece};
