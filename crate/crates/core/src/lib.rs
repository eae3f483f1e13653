//! Numerical laboratory for conformal-energy minimization over
//! piecewise-linear self-maps of the unit disk.
//!
//! The library minimizes E*_A(h) = int A(K(w,h)) J(w,h) dw over discrete
//! finite-distortion maps with a prescribed boundary homeomorphism and then
//! verifies every checkable structure at the computed minimizer: the
//! holomorphy of the Ahlfors-Hopf differential A'(K) h_w conj(h_wbar), the
//! inner- and outer-variational weak forms, the energy duality
//! E*_A(h) = E_A(h^{-1}), the nonlinear Beltrami equation h_wbar = B(w, h_w)
//! with its ellipticity bounds, positivity of the Jacobian, and
//! initialization-independence of the minimizer.
//!
//! Modules follow the pipeline: [`mesh`] triangulates the disk and carries PL
//! maps; [`profile`] holds the convex integrand A; [`boundary`] produces
//! quasisymmetric traces; [`oracle`] supplies harmonic and conformal reference
//! maps; [`minimize`] runs the feasible descent; [`distortion`], [`variation`],
//! [`hopf`] and [`beltrami`] implement the diagnostics; [`report`] owns run
//! directories and artifact formats.

pub mod beltrami;
pub mod boundary;
pub mod distortion;
pub mod error;
pub mod hopf;
pub mod mesh;
pub mod minimize;
pub mod oracle;
pub mod profile;
pub mod report;
pub mod seeding;
pub mod variation;

pub use error::{Error, Result};
pub use mesh::{build_disk_mesh, read_map, read_mesh, wirtinger, DiscreteMap, DiskMesh};
pub use profile::{power_profile, validate_profile, EnergyProfile};

pub use num_complex::Complex64;
