//! Shared fixtures for the benchmarks.

use gpalign_core::{generate, Dataset, GenConfig};

/// A seeded single-group dataset of `j` sequences with `n` samples.
pub fn dataset(j: usize, n: usize, d: usize) -> Dataset {
    generate(&GenConfig {
        j,
        n,
        d,
        groups: 1,
        warp_roughness: 1.0,
        noise_sd: 0.05,
        seed: 0,
    })
    .expect("valid generator config")
}
