//! Scale-invariant Sobolev norms of symbols:
//! `sup_k || sigma(2^k .) W ||_{L^2_s}` with `W = Psi_hat` (or `Theta_hat`),
//! the weighted norm taken on the transform side.
//!
//! `sigma(2^k eta) W(eta)` is sampled on a fixed cube `[-B/2, B/2)^D`,
//! `D = m dim`, containing the window support; the transform is a D-dimensional
//! FFT and the `zeta` integral a Riemann sum on the dual lattice.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};

use super::{LocalMode, Symbol};
use crate::error::{Error, Result};
use crate::grid::C64;
use crate::lp_frame::{big_theta_hat, psi_hat, AnnularPartition};

/// Sample cube for the windowed symbol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevGrid {
    /// Points per axis (a power of two).
    pub points: usize,
    /// Cube side `B`.
    pub side: f64,
}

impl SobolevGrid {
    /// At most `2^18` samples in total, between 8 and 64 per axis; the cube
    /// side is 2.5 window radii.
    pub fn for_window(dims: usize, mode: LocalMode) -> Self {
        let per = 1usize << (18 / dims.max(1)).min(6);
        let radius = match mode {
            LocalMode::Psi => 2.0,
            LocalMode::Theta => 8.0,
        };
        Self { points: per.max(8), side: 2.5 * radius }
    }
}

/// Transform-side weight.
#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    /// `(1 + 4 pi^2 |zeta|^2)^s`.
    Isotropic(f64),
    /// `prod_i (1 + 4 pi^2 |zeta_i|^2)^{s_i}`, one exponent per slot.
    Product(Vec<f64>),
}

impl Weight {
    fn validate(&self, m: usize) -> Result<()> {
        let ok = match self {
            Weight::Isotropic(s) => *s >= 0.0,
            Weight::Product(v) => v.len() == m && v.iter().all(|s| *s >= 0.0),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("Sobolev weight {self:?} must be nonnegative, one per slot")));
        }
        Ok(())
    }

    fn eval(&self, zeta: &[f64], dim: usize) -> f64 {
        match self {
            Weight::Isotropic(s) => {
                let z2: f64 = zeta.iter().map(|z| z * z).sum();
                (1.0 + 4.0 * PI * PI * z2).powf(*s)
            }
            Weight::Product(v) => v
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let z2: f64 = zeta[i * dim..(i + 1) * dim].iter().map(|z| z * z).sum();
                    (1.0 + 4.0 * PI * PI * z2).powf(*s)
                })
                .product(),
        }
    }
}

fn fft_axes(data: &mut [C64], m: usize, dims: usize) {
    let fft = FftPlanner::new().plan_fft(m, FftDirection::Forward);
    let mut line = vec![C64::new(0.0, 0.0); m];
    for axis in 0..dims {
        let stride = m.pow((dims - 1 - axis) as u32);
        let total = data.len();
        for start in 0..total {
            // first element of each line along `axis`
            if (start / stride) % m != 0 {
                continue;
            }
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = data[start + t * stride];
            }
            fft.process(&mut line);
            for (t, v) in line.iter().enumerate() {
                data[start + t * stride] = *v;
            }
        }
    }
}

/// `|| sigma(2^k .) W ||_{L^2_s}` for one `k`.
pub fn windowed_norm(
    sigma: &Symbol,
    m: usize,
    dim: usize,
    k: i32,
    window: LocalMode,
    weight: &Weight,
    grid: &SobolevGrid,
) -> Result<f64> {
    weight.validate(m)?;
    let dims = m * dim;
    let mm = grid.points;
    let d = grid.side / mm as f64;
    let total = mm.pow(dims as u32);
    let scale = 2f64.powi(k);
    let mut data: Vec<C64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut xi = [[0.0; 2]; 3];
            let mut r2 = 0.0;
            let mut rest = flat;
            for a in (0..dims).rev() {
                let t = rest % mm;
                rest /= mm;
                let eta = -grid.side / 2.0 + t as f64 * d;
                r2 += eta * eta;
                xi[a / dim][a % dim] = scale * eta;
            }
            let r = r2.sqrt();
            let w = match window {
                LocalMode::Psi => psi_hat(r),
                LocalMode::Theta => big_theta_hat(r),
            };
            if w == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                sigma.eval(&xi[..m], dim) * w
            }
        })
        .collect();
    fft_axes(&mut data, mm, dims);
    let cell = d.powi(dims as i32);
    let dz = 1.0 / grid.side;
    let sum: f64 = data
        .par_iter()
        .enumerate()
        .map(|(flat, v)| {
            let mut zeta = [0.0; 6];
            let mut rest = flat;
            for a in (0..dims).rev() {
                let p = rest % mm;
                rest /= mm;
                let q = if p < mm / 2 { p as f64 } else { p as f64 - mm as f64 };
                zeta[a] = q * dz;
            }
            weight.eval(&zeta[..dims], dim) * (v * cell).norm_sqr()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok((sum * dz.powi(dims as i32)).sqrt())
}

/// `(k, || sigma(2^k .) Psi_hat ||_{L^2_s})` over the resolvable shells.
pub fn ls2_profile(sigma: &Symbol, part: &AnnularPartition, weight: &Weight) -> Result<Vec<(i32, f64)>> {
    let m = part.m();
    let dim = part.spec().dim();
    let grid = SobolevGrid::for_window(m * dim, LocalMode::Psi);
    part.shells().map(|k| Ok((k, windowed_norm(sigma, m, dim, k, LocalMode::Psi, weight, &grid)?))).collect()
}

/// `sup_k || sigma(2^k .) Psi_hat ||_{L^2_s}` over the resolvable shells.
pub fn ls2_norm(sigma: &Symbol, part: &AnnularPartition, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("Sobolev index must be nonnegative, got {s}")));
    }
    Ok(ls2_profile(sigma, part, &Weight::Isotropic(s))?.iter().map(|r| r.1).fold(0.0, f64::max))
}

/// Product-type variant with one Sobolev index per slot.
pub fn ls2_norm_product(sigma: &Symbol, part: &AnnularPartition, s: &[f64]) -> Result<f64> {
    Ok(ls2_profile(sigma, part, &Weight::Product(s.to_vec()))?.iter().map(|r| r.1).fold(0.0, f64::max))
}

/// `sup_k || sigma(2^k .) Theta_hat ||_{L^2_s}`, the norm of the localized
/// pieces `sigma_k(2^k .)`.
pub fn localized_sup(sigma: &Symbol, part: &AnnularPartition, s: f64) -> Result<f64> {
    let m = part.m();
    let dim = part.spec().dim();
    let grid = SobolevGrid::for_window(m * dim, LocalMode::Theta);
    let w = Weight::Isotropic(s);
    let mut best = 0.0f64;
    for k in part.shells() {
        best = best.max(windowed_norm(sigma, m, dim, k, LocalMode::Theta, &w, &grid)?);
    }
    Ok(best)
}
