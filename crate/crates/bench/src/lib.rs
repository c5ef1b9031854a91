//! Shared fixtures for the criterion benchmarks under `benches/`.

use vdwlab_core::{build_grid, Result, SystemSpec};

/// Two hydrogen atoms at separation `r` on an `n`-point grid over `[-half_width, half_width]`.
pub fn hydrogen_pair(n: usize, half_width: f64, r: f64) -> Result<SystemSpec> {
    let grid = build_grid(n, (-half_width, half_width))?;
    Ok(SystemSpec::hydrogen_pair_on(r, grid))
}

/// Deterministic dense test vector of length `dim`.
pub fn test_vector(dim: usize) -> Vec<f64> {
    (0..dim).map(|i| ((i as f64) * 0.618_033_988_75).sin()).collect()
}
