//! Quasi-periodic invariant tori of Hamiltonian systems with first integrals.
//!
//! The crate solves the invariance equation `X_H∘K = DK ω` for a Fourier
//! parameterization `K` by a quasi-Newton method built on an adapted
//! symplectic frame, with an iso-energetic variant that moves `ω` along a
//! ray to hit a prescribed level of a conserved quantity. The certificate
//! module evaluates the explicit constants of the a-posteriori theorem and
//! reports the hypothesis ratio.

pub mod certificate;
pub mod cohomology;
pub mod fourier;
pub mod frames;
pub mod iso;
pub mod linalg;
pub mod solver;
pub mod system;

pub use certificate::{
    build_ledger, estimate_global_constants, kam_check, CertificateError, CertificateMode, CertificateOptions,
    CertificateReport, ConstantLedger, GlobalNormConstants,
};
pub use cohomology::{solve_cohomological, CohomologyError, DiophantineParams};
pub use fourier::{FourierError, FourierMap, GridField};
pub use frames::{FrameBundle, FrameError, TorusCandidate};
pub use iso::{iterate_kam_iso, FrequencyRay, IsoRun};
pub use solver::{iterate_kam, KamRun, NewtonSchedule, RunStatus, SolverError};
pub use system::{builtin_system, Conserved, Domain, FrameCase, HamiltonianSystem, SystemError};

/// Library version embedded in every output document.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
