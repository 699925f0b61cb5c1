//! Joint alignment and clustering of time-warped sequences.
//!
//! Each observed sequence is explained by its own Gaussian-process fit over
//! warped and unwarped inputs; the aligned "pseudo-observations" are tied
//! together by a GP latent variable model, and monotone warps are learned
//! non-parametrically. Everything is fitted by MAP with Adam.
//!
//! Module map:
//! * [`kernels`]: covariance functions and Gram matrices.
//! * [`gp`]: exact and sparse GP marginal likelihoods with gradients, posterior prediction.
//! * [`warps`]: monotone warp families.
//! * [`model`]: the joint objective, its gradient and manifold sampling.
//! * [`optimizer`]: initialization and the Adam fitting loop.
//! * [`baselines`]: DTW and the energy / basis-warp variants.
//! * [`synth`]: synthetic benchmark generation and error metrics.

pub mod baselines;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod model;
pub mod optimizer;
pub mod synth;
pub mod warps;

pub use baselines::{dtw_align, dtw_align_dataset, energy_objective, fit_variant, VariantSpec};
pub use error::{Error, Result};
pub use gp::GpFit;
pub use kernels::{KernelFamily, KernelSpec, Points};
pub use model::{objective, sample_manifold, AlignmentObjective, Dataset, ModelConfig, ModelState, WarpConfig};
pub use optimizer::{fit, initialize, Adam, Field, FitConfig, FitResult, StageSpec};
pub use synth::{alignment_error, cluster_purity, generate, warping_error, GenConfig};
pub use warps::{WarpFamily, WarpParams};

pub(crate) const LOG_2PI: f64 = 1.837_877_066_409_345_3;
