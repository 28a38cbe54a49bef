//! Hybrid resampling and balanced random forests for imbalanced binary
//! classification.
//!
//! The library implements the SMOTE-RUS-NC resampling pipeline (NC cleaning,
//! partial random undersampling, SMOTE to parity), its constituent samplers
//! and the usual baselines (ENN, Tomek links, SMOTE-ENN, SMOTE-Tomek), CART
//! random forests including the balanced (BRF) and SRN-BRF variants, and a
//! stratified cross-validation harness that applies sampling inside training
//! folds only.
//!
//! ```no_run
//! use srn::dataset::load_keel;
//! use srn::samplers::{smote_rus_nc, SamplerConfig};
//!
//! let data = load_keel(std::path::Path::new("data/yeast4.dat"))?;
//! let out = smote_rus_nc(&data, &SamplerConfig { seed: 42, ..Default::default() })?;
//! println!("removed {} majority rows, synthesized {} minority rows",
//!          out.removed_majority, out.synthesized_minority);
//! # Ok::<(), srn::error::Error>(())
//! ```

pub mod bench;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod forest;
pub mod neighbors;
pub mod rng;
pub mod samplers;

pub use dataset::{ClassStats, Label, LabeledDataset};
pub use error::{Error, Result};
pub use forest::{DecisionTree, ForestKind, ForestModel};
pub use samplers::{ResampleOutcome, SamplerConfig};
