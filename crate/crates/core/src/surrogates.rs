//! Band-limited test inputs with a spectral hole at the origin and fast
//! spatial decay: finite sums of Gaussian wave packets whose spectra are
//! truncated where the Gaussian drops below `e^{-trunc}`.
//!
//! A surrogate is kept as a list of packets so that it can be sampled on any
//! grid and dilated exactly: `f_t(x) = f(t x)` has spectrum `t^-dim f_hat(xi/t)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{inverse_transform, GridFunction, GridSpec, SpectralFunction, C64};
use crate::lp_frame::shell_range;

#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub amp: C64,
    /// Spectral centre.
    pub centre: [f64; 2],
    /// Spectral standard deviation.
    pub width: f64,
    /// Physical centre.
    pub pos: [f64; 2],
    /// Spectral truncation radius.
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateParams {
    pub dim: usize,
    /// Spectrum lives in `lo < |xi| <= hi`.
    pub lo: f64,
    pub hi: f64,
    pub packets: usize,
    /// Physical centres are drawn from `|x| <= spread`.
    pub spread: f64,
    /// Distance from the origin at which `|f| <= e^{-decay}` relative.
    pub edge: f64,
    /// Smallest dilation factor the decay must survive.
    pub t_min: f64,
    /// Spectral truncation level `e^{-trunc}`.
    pub trunc: f64,
    /// Target spatial decay exponent.
    pub decay: f64,
}

impl SurrogateParams {
    /// Shells `[j_min + 2, j_max - 2]` of `spec` when they exist, else the
    /// widest band clear of the lowest shells; decay by the margin edge.
    pub fn for_grid(spec: &GridSpec) -> Self {
        let (j_min, j_max) = shell_range(spec);
        let lo = 2f64.powi(j_min + 1);
        let hi = if j_max - j_min >= 4 { 2f64.powi(j_max - 1) } else { 2f64.powi(j_max) };
        Self {
            dim: spec.dim(),
            lo,
            hi,
            packets: 4,
            spread: spec.l() / 32.0,
            edge: spec.l() * 0.4,
            t_min: 1.0,
            trunc: 36.0,
            decay: 29.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Surrogate {
    pub dim: usize,
    pub packets: Vec<Packet>,
}

impl Surrogate {
    pub fn generate(params: &SurrogateParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut packets = Vec::with_capacity(params.packets);
        for _ in 0..params.packets {
            let mut pos = [0.0; 2];
            for p in pos.iter_mut().take(params.dim) {
                *p = rng.gen_range(-params.spread..=params.spread);
            }
            let dist = params.edge - params.spread * (params.dim as f64).sqrt() / params.t_min;
            if dist <= 0.0 {
                return Err(Error::InvalidArgument("packet spread exceeds the decay edge".into()));
            }
            // Gaussian envelope exp(-2 pi^2 w^2 (t x)^2) reaches e^{-decay} at the edge
            let width = (2.0 * params.decay).sqrt() / (2.0 * PI * dist * params.t_min);
            let radius = (2.0 * params.trunc).sqrt() * width;
            if params.hi - params.lo <= 2.0 * radius {
                return Err(Error::InvalidArgument(format!(
                    "band ({}, {}] too narrow for packets of spectral radius {radius}",
                    params.lo, params.hi
                )));
            }
            let r: f64 = rng.gen_range(params.lo + radius..params.hi - radius);
            let mut centre = [0.0; 2];
            if params.dim == 1 {
                centre[0] = if rng.gen_bool(0.5) { r } else { -r };
            } else {
                let a: f64 = rng.gen_range(0.0..2.0 * PI);
                centre = [r * a.cos(), r * a.sin()];
            }
            let amp = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            packets.push(Packet { amp, centre, width, pos, radius });
        }
        Ok(Self { dim: params.dim, packets })
    }

    /// Spectrum of `x -> f(t x)` at `xi`.
    pub fn spectrum_at(&self, xi: [f64; 2], t: f64) -> C64 {
        let u = [xi[0] / t, xi[1] / t];
        let jac = t.powi(-(self.dim as i32));
        let mut acc = C64::new(0.0, 0.0);
        for p in &self.packets {
            let d2: f64 = (0..self.dim).map(|d| (u[d] - p.centre[d]).powi(2)).sum();
            if d2.sqrt() > p.radius {
                continue;
            }
            let phase: f64 = (0..self.dim).map(|d| u[d] * p.pos[d]).sum();
            acc += p.amp * (-d2 / (2.0 * p.width * p.width)).exp() * C64::from_polar(1.0, -2.0 * PI * phase);
        }
        acc * jac
    }

    pub fn spectrum(&self, spec: GridSpec, t: f64) -> Result<SpectralFunction> {
        if spec.dim() != self.dim {
            return Err(Error::SpecMismatch("surrogate dimension differs from grid".into()));
        }
        SpectralFunction::from_fn(spec, |xi| self.spectrum_at(xi, t))
    }

    /// Samples of `x -> f(t x)`.
    pub fn sample(&self, spec: GridSpec, t: f64) -> Result<GridFunction> {
        Ok(inverse_transform(&self.spectrum(spec, t)?))
    }
}

/// Complex Gaussian noise on the lattice points with `lo <= |xi| <= hi`,
/// zero elsewhere. No spatial decay; for algebraic cross-checks.
pub fn band_noise(spec: GridSpec, lo: f64, hi: f64, seed: u64) -> Result<GridFunction> {
    if !(lo >= 0.0 && hi >= lo) {
        return Err(Error::InvalidArgument(format!("bad band [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..spec.len())
        .map(|i| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let r = spec.xi_norm(i);
            if r >= lo && r <= hi {
                C64::new(re, im)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(inverse_transform(&SpectralFunction::new(spec, values)?))
}
