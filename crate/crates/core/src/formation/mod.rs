//! Configurations, stress assembly, spectral analysis and the stabilizability
//! check shared by every other module.

mod config;
mod graph;
mod spectral;

pub use config::{kernel_basis, numeric_rank, Configuration, AFFINE_RANK_TOL};
pub use graph::{
    assemble_stress, complete_edge_count, complete_incidence, edge_index, extract_topology,
    StressMatrix, StressVector, Topology, TopologyExtraction,
};
pub use spectral::{
    sorted_eigen, spectral_efficiency, spectral_report, verify_stabilizable, SpectralReport,
    Tolerances, VerificationReport,
};
