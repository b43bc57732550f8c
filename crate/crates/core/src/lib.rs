//! Supervised learning of hyperplane arrangements for locality-sensitive
//! hashing.
//!
//! Each hyperplane normal is a particle on the unit sphere that performs a
//! Metropolis-Hastings random walk toward positions separating sampled
//! negative pairs while keeping positive pairs together. The learned
//! arrangement turns feature vectors into bit codes searched by Hamming
//! distance.
//!
//! ```
//! use mlsh::prelude::*;
//!
//! let data = generate_gaussian_sign_dataset(100, RngSeed(1)).unwrap();
//! let cfg = TrainConfig {
//!     bits: 8,
//!     batches: 2,
//!     steps_per_batch: 20,
//!     proposal_stddev: 0.05,
//!     objective: ObjectiveConfig::default(),
//!     sampling: SamplingConfig::balanced("randomhit-randommiss".parse().unwrap(), 200),
//!     seed: RngSeed(7),
//!     shared_pairs: true,
//!     track_best: false,
//!     record_trajectory: false,
//! };
//! let (arrangement, report) = train(&data, &cfg).unwrap();
//! let code = arrangement.encode(data.vector(0)).unwrap();
//! assert_eq!(code.len(), 8);
//! assert!(report.mean_acceptance() <= 1.0);
//! ```

pub mod data;
pub mod error;
pub mod hashing;
pub mod io;
pub mod mcmc;
pub mod objective;
pub mod pairs;
pub mod preprocess;
pub mod search;
pub mod seed;
pub mod synth;
pub mod vector;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::data::{common_label, LabelSet, LabeledDataset};
    pub use crate::error::{Error, Result};
    pub use crate::hashing::{
        encode, hamming, pairwise_cosine_matrix, random_arrangement, BitCode, HyperplaneArrangement,
    };
    pub use crate::io::ModelFile;
    pub use crate::mcmc::{train, TrainConfig, TrainReport};
    pub use crate::objective::{evaluate, ObjectiveConfig, ObjectiveKind};
    pub use crate::pairs::{
        sample_pair_set, NegativeMethod, PairSampler, PairSet, PositiveMethod, SamplingConfig,
        SamplingMethods,
    };
    pub use crate::preprocess::{fit_preprocess, PreprocessModel};
    pub use crate::search::{
        recall_precision_curve, top_k_by_hamming, top_k_by_l2, CodeTable, Curve, EvalPoint,
        HammingRanker, L2Ranker,
    };
    pub use crate::seed::RngSeed;
    pub use crate::synth::{generate_clusters, generate_gaussian_sign_dataset};
}
