//! Sieve bounds for random walks on labeling groups `(Z/c)^X`, driven by
//! Cayley graph expansion on block quotients.
//!
//! The pieces, bottom up: [`labeling`] (the group and its blocks), [`blocks`]
//! (quotients, generator counts, sampled generating sets), [`spectral`]
//! (exact Cayley spectra), [`walk`] (Monte Carlo and exact walk laws),
//! [`instances`] (triangles, grid squares, progressions), [`bounds`] (decay
//! constants and sieve inequalities) and [`harness`] (seeded experiments).

pub mod blocks;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod instances;
pub mod io;
pub mod labeling;
pub mod rng;
pub mod spectral;
pub mod walk;

pub use blocks::{
    kappa, BlockSystem, DeltaPolicy, GeneratorOptions, GeneratorSystem, QuotientOrder, StepWeighting,
};
pub use bounds::{compute_eta, sieve_bound, BoundReport, EtaMode, SieveParams};
pub use error::{Result, SieveError};
pub use harness::{run_alon_roichman, run_sieve_experiment, ExperimentConfig, ResultRow};
pub use instances::{Instance, InstanceSpec};
pub use labeling::{Block, GroundSet, GroundTag, Labeling, Site};
pub use spectral::{cayley_spectrum, AbelianGroup, Character, LoopConvention, SpectrumReport};
pub use walk::{exact_block_distribution, exact_moment, exact_survival_probability, walk, WalkConfig};
