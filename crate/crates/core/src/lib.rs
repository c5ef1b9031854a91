//! Numerical laboratory for the van der Waals interaction between neutral
//! model atoms: few-body grid spectra, Feshbach-Schur reduction, symmetric
//! group projectors, IMS localization and C6 coefficients.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod feshbach;
pub mod lattice;
pub mod linalg;
pub mod localization;
pub mod manybody;
pub mod spectral;
pub mod symmetry;
pub mod vdw;

pub use error::{Error, Result};
pub use lattice::{build_grid, smoothed_cutoff, CutoffFn, Grid, PotentialKind, PotentialSpec};
pub use linalg::LinearOperator;
pub use manybody::{
    assemble_cluster, assemble_full, enumerate_decompositions, intercluster, Decomposition, ManyBodyOperator, Mode,
    Nucleus, SystemSpec,
};
pub use feshbach::{CutoffGroundBasis, FeshbachProblem, FeshbachResult, FixedPoint};
pub use localization::{ImsReport, Partition, StabilityReport};
pub use spectral::SpectralResult;
pub use symmetry::{CharacterProjector, SymmetryType};
pub use vdw::{C6Result, Method, PowerFit, SweepOptions, SweepPoint, VdwReport};
