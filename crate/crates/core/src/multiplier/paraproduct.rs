//! Frequency-ordering split of a trilinear multiplier.
//!
//! For the ordering `j_1 >= j_2 >= j_3`:
//! `T^(1) = sum_j T_{sigma_j}(Lambda_j f_1, Gamma_{j-S} f_2, Gamma_{j-S} f_3)` and
//! `T^(2),k = sum_j T_{sigma_j}(Lambda_j f_1, Lambda_{j-k} f_2, Gamma_{j-k} f_3)`
//! with `S = shift` and `k < pieces`. The remaining triples of the ordering
//! (`k >= pieces`) are collected in `tail`, so that `sum_k t2k + tail` over the
//! six orderings partitions the full triple sum.
//!
//! Ties go to the first ordering in [`ORDERINGS`] that accepts them, which is
//! the stable descending sort of the slot indices. For an ordering `(a, b, c)`
//! this makes `j_a > j_b` strict when `a > b` and `j_b > j_c` strict when `b > c`.

use serde::{Deserialize, Serialize};

use super::{apply_sparse, LocalMode, OutputSpectrum, Symbol};
use crate::error::{Error, Result};
use crate::grid::{forward_transform, GridFunction, SpectralFunction};
use crate::lp_frame::{AnnularPartition, Kind, LpFamily};

/// Slot orderings in precedence order; `(a, b, c)` means `j_a >= j_b >= j_c`.
pub const ORDERINGS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Band tolerance for paraproduct inputs, relative to the spectral peak.
pub const BAND_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaConfig {
    /// Gap in `Gamma_{j - shift}` of the first piece.
    pub shift: i32,
    /// Number of second-type pieces, `k = 0 .. pieces - 1`.
    pub pieces: i32,
}

impl Default for ParaConfig {
    fn default() -> Self {
        Self { shift: 10, pieces: 10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParaproductPieces {
    pub ordering: [usize; 3],
    pub t1: GridFunction,
    pub t2k: Vec<GridFunction>,
    pub tail: GridFunction,
}

impl ParaproductPieces {
    /// `sum_k t2k + tail`: every triple owned by this ordering, once.
    pub fn owned(&self) -> Result<GridFunction> {
        let mut acc = self.tail.clone();
        for t in &self.t2k {
            acc = acc.add(t)?;
        }
        Ok(acc)
    }

    /// `t1 + sum_k t2k`.
    pub fn split_sum(&self) -> Result<GridFunction> {
        let mut acc = self.t1.clone();
        for t in &self.t2k {
            acc = acc.add(t)?;
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// Ordering `j_1 >= j_2 >= j_3`.
    pub main: ParaproductPieces,
    /// The other five orderings, in [`ORDERINGS`] order.
    pub residual: Vec<ParaproductPieces>,
}

impl Decomposition {
    /// Sum of the owned parts of all six orderings.
    pub fn total(&self) -> Result<GridFunction> {
        let mut acc = self.main.owned()?;
        for r in &self.residual {
            acc = acc.add(&r.owned()?)?;
        }
        Ok(acc)
    }
}

fn filtered(s: &SpectralFunction, kind: Kind, j: i32) -> SpectralFunction {
    let spec = *s.spec();
    let mut out = s.clone();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        let w = LpFamily::profile_at(kind, j, spec.xi_norm(i));
        *v = if w == 0.0 { *v * 0.0 } else { *v * w };
    }
    out
}

struct Inputs {
    spectra: [SpectralFunction; 3],
}

impl Inputs {
    fn new(fam: &LpFamily, f: [&GridFunction; 3]) -> Result<Self> {
        for g in f {
            fam.check_band(g, BAND_TOL)?;
        }
        Ok(Self { spectra: f.map(forward_transform) })
    }
}

fn check_setup(sigma: &Symbol, part: &AnnularPartition, fam: &LpFamily, cfg: &ParaConfig) -> Result<()> {
    if part.m() != 3 {
        return Err(Error::InvalidArgument("paraproduct split needs a trilinear partition".into()));
    }
    part.spec().ensure_same(fam.spec())?;
    if let Some(a) = sigma.arity() {
        if a != 3 {
            return Err(Error::InvalidArgument(format!("symbol arity {a}, expected 3")));
        }
    }
    if cfg.shift < 0 || cfg.pieces < 0 {
        return Err(Error::InvalidArgument(format!("negative paraproduct parameters {cfg:?}")));
    }
    Ok(())
}

fn ordering_pieces(
    sigma: &Symbol,
    fam: &LpFamily,
    inp: &Inputs,
    ord: [usize; 3],
    cfg: &ParaConfig,
) -> Result<ParaproductPieces> {
    let spec = *fam.spec();
    let [a, b, c] = ord;
    let k0 = (a > b) as i32;
    let gap_c = (b > c) as i32;
    let empty = || OutputSpectrum::zeros(spec, 3);
    let mut t1 = empty();
    let mut t2k: Vec<OutputSpectrum> = (0..cfg.pieces).map(|_| empty()).collect();
    let mut tail = empty();
    let slots = |ga: SpectralFunction, gb: SpectralFunction, gc: SpectralFunction| {
        let mut v: [Option<SpectralFunction>; 3] = [None, None, None];
        v[a] = Some(ga);
        v[b] = Some(gb);
        v[c] = Some(gc);
        v.map(|x| x.expect("all slots filled"))
    };
    for j in fam.shells() {
        let sig = sigma.clone().localized(LocalMode::Theta, j);
        let la = filtered(&inp.spectra[a], Kind::Psi, j);
        let g = slots(
            la.clone(),
            filtered(&inp.spectra[b], Kind::Theta, j - cfg.shift),
            filtered(&inp.spectra[c], Kind::Theta, j - cfg.shift),
        );
        t1.add_assign(&apply_sparse(&sig, &g)?);
        for k in k0.. {
            let jb = j - k;
            if jb < fam.j_min() {
                break;
            }
            let g = slots(
                la.clone(),
                filtered(&inp.spectra[b], Kind::Psi, jb),
                filtered(&inp.spectra[c], Kind::Theta, jb - gap_c),
            );
            let piece = apply_sparse(&sig, &g)?;
            if k < cfg.pieces {
                t2k[k as usize].add_assign(&piece);
            } else {
                tail.add_assign(&piece);
            }
        }
    }
    Ok(ParaproductPieces {
        ordering: ord,
        t1: t1.to_grid(),
        t2k: t2k.iter().map(|s| s.to_grid()).collect(),
        tail: tail.to_grid(),
    })
}

/// Pieces for all six orderings. Inputs must be band-limited to the
/// resolvable annulus of `fam`.
pub fn paraproduct_decompose(
    sigma: &Symbol,
    part: &AnnularPartition,
    fam: &LpFamily,
    f: [&GridFunction; 3],
    cfg: &ParaConfig,
) -> Result<Decomposition> {
    check_setup(sigma, part, fam, cfg)?;
    let inp = Inputs::new(fam, f)?;
    let mut all = ORDERINGS
        .iter()
        .map(|&o| ordering_pieces(sigma, fam, &inp, o, cfg))
        .collect::<Result<Vec<_>>>()?;
    let main = all.remove(0);
    Ok(Decomposition { main, residual: all })
}

/// Output spectrum of `T_{sigma_k}(Lambda_k f_1, Gamma_{k-shift} f_2, Gamma_{k-shift} f_3)`
/// on the unfolded sum lattice.
pub fn high_low_low(
    sigma: &Symbol,
    fam: &LpFamily,
    f: [&GridFunction; 3],
    k: i32,
    shift: i32,
) -> Result<OutputSpectrum> {
    fam.check_j(k)?;
    let s = f.map(forward_transform);
    let g = [
        filtered(&s[0], Kind::Psi, k),
        filtered(&s[1], Kind::Theta, k - shift),
        filtered(&s[2], Kind::Theta, k - shift),
    ];
    apply_sparse(&sigma.clone().localized(LocalMode::Theta, k), &g)
}
