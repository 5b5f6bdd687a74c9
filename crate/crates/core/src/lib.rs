//! Label-guided signed-graph augmentation for graph neural diffusion.
//!
//! Collapsing nodes (CNs) are extra labeled nodes wired to every training node:
//! `+1` to training nodes that share the CN's label and `-1` to the rest. The
//! resulting signed adjacency drives attractive and repulsive message passing.
//!
//! Modules:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | graph and signed-matrix primitives, Laplacians, energies, homophily |
//! | [`augment`] | connection matrix, augmented adjacency, label adjacency |
//! | [`eig`] | cyclic Jacobi symmetric eigensolver |
//! | [`dynamics`] | continuous-time diffusion variants, Euler integration, closed form, flocking |
//! | [`learner`] | GCN/GAT/UYGCN/UYGAT models, reverse-mode gradients, Adam, metrics |
//! | [`diagnostics`] | over-smoothing probe, sensitivity bound, spectrum, curvature, energy traces |
//! | [`datasets`] | CSV dataset loading, SBM generation, stratified splits |

pub mod augment;
pub mod datasets;
pub mod diagnostics;
pub mod dynamics;
pub mod eig;
mod error;
pub mod graph;
pub mod learner;

pub use error::{Error, Result};
