//! Shared fixtures for the criterion benches in `benches/`.

use triharm::surrogates::{band_noise, Surrogate, SurrogateParams};
use triharm::{GridFunction, GridSpec, LpFamily, Result};

/// `m` decaying surrogates on `spec`, seeds `seed..seed + m`.
pub fn surrogates(spec: GridSpec, m: usize, seed: u64) -> Result<Vec<GridFunction>> {
    let params = SurrogateParams::for_grid(&spec);
    (0..m as u64).map(|k| Surrogate::generate(&params, seed + k)?.sample(spec, 1.0)).collect()
}

/// `m` noise inputs filling the resolvable band of `spec`.
pub fn band_inputs(spec: GridSpec, m: usize, seed: u64) -> Result<Vec<GridFunction>> {
    let (lo, hi) = LpFamily::build(spec)?.band();
    (0..m as u64).map(|k| band_noise(spec, lo, hi, seed + k)).collect()
}
