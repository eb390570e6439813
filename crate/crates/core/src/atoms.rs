//! Synthetic `H^p` atoms with certified support, size and vanishing moments,
//! and numerical checks of the atom decay estimates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_spaces::HardyProfile;
use crate::grid::{lp_norm_abs, GridFunction, GridSpec, C64};
use crate::lp_frame::LpFamily;
use crate::maximal::DyadicCube;

/// Largest supported moment order.
pub const MAX_ORDER: usize = 6;
/// Fewest samples per axis inside the cube.
pub const MIN_SAMPLES: usize = 16;
/// Moment tolerance relative to the `L^1` norm, in cube-normalized coordinates.
pub const MOMENT_TOL: f64 = 1e-10;
const RETRIES: u64 = 8;

/// `[n/p - n]_+`.
pub fn min_order(dim: usize, p: f64) -> usize {
    let n = dim as f64;
    let v = n / p - n;
    if v <= 0.0 {
        0
    } else {
        (v + 1e-9).floor() as usize
    }
}

/// Default order `[n/p - n]_+ + 2`.
pub fn default_order(dim: usize, p: f64) -> usize {
    min_order(dim, p) + 2
}

/// Multi-indices of total degree at most `m`.
pub fn multi_indices(dim: usize, m: usize) -> Vec<[u32; 2]> {
    let mut out = Vec::new();
    for total in 0..=m as u32 {
        if dim == 1 {
            out.push([total, 0]);
        } else {
            for a in (0..=total).rev() {
                out.push([a, total - a]);
            }
        }
    }
    out
}

/// Chebyshev polynomial `T_k(u)`.
fn cheb(k: usize, u: f64) -> f64 {
    let (mut a, mut b) = (1.0, u);
    if k == 0 {
        return a;
    }
    for _ in 1..k {
        let c = 2.0 * u * b - a;
        a = b;
        b = c;
    }
    b
}

fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub support: bool,
    pub size: bool,
    pub moments: bool,
    pub order_admissible: bool,
    /// `sup|a| / |Q|^{-1/p}`.
    pub size_ratio: f64,
    /// Largest normalized moment over `|gamma| <= M`, relative to `||a||_1`.
    pub max_moment: f64,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.support && self.size && self.moments && self.order_admissible
    }
}

#[derive(Clone, Debug)]
pub struct Atom {
    pub f: GridFunction,
    pub cube: DyadicCube,
    pub p: f64,
    pub order: usize,
    /// Seed that produced the accepted draw.
    pub seed: u64,
}

/// Metadata written next to an atom's samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub cube: DyadicCube,
    pub p: f64,
    pub order: usize,
    pub seed: u64,
    pub certificate: Certificate,
}

impl Atom {
    /// Side factor `(10 sqrt n)^k` of the dilate `Q^{*k}`.
    pub fn dilate_factor(&self, k: i32) -> f64 {
        (10.0 * (self.cube.dim as f64).sqrt()).powi(k)
    }

    pub fn in_dilate(&self, k: i32, x: [f64; 2]) -> bool {
        self.cube.dilate_contains(self.dilate_factor(k), x)
    }

    /// Re-checks support, size and moment invariants.
    pub fn validate(&self) -> Result<Certificate> {
        let spec = *self.f.spec();
        let inside = self.cube.indices(&spec)?;
        let mut mask = vec![false; spec.len()];
        for &i in &inside {
            mask[i] = true;
        }
        let support = self.f.values().iter().zip(&mask).all(|(v, &m)| m || *v == C64::new(0.0, 0.0));
        let bound = self.cube.volume().powf(-1.0 / self.p);
        let size_ratio = self.f.max_abs() / bound;
        let l1 = lp_norm_abs(&spec, &self.f.abs(), 1.0)?;
        let c = self.cube.centre();
        let half = self.cube.side() / 2.0;
        let mut max_moment = 0.0f64;
        for g in multi_indices(spec.dim(), self.order) {
            let mut acc = C64::new(0.0, 0.0);
            for &i in &inside {
                let x = spec.point(i);
                let mut w = 1.0;
                for d in 0..spec.dim() {
                    w *= ((x[d] - c[d]) / half).powi(g[d] as i32);
                }
                acc += self.f.values()[i] * w;
            }
            let m = (acc * spec.cell()).norm() / l1.max(f64::MIN_POSITIVE);
            max_moment = max_moment.max(m);
        }
        Ok(Certificate {
            support,
            size: size_ratio <= 1.0,
            moments: max_moment <= MOMENT_TOL,
            order_admissible: self.order >= min_order(spec.dim(), self.p) && self.order <= MAX_ORDER,
            size_ratio,
            max_moment,
        })
    }

    /// JSON sidecar: cube, p, M, seed and certification results.
    pub fn sidecar_json(&self) -> Result<String> {
        let s = Sidecar { cube: self.cube, p: self.p, order: self.order, seed: self.seed, certificate: self.validate()? };
        Ok(serde_json::to_string_pretty(&s)?)
    }

    /// Rebuilds an atom from its samples and sidecar; the stored certificate
    /// is ignored, call [`Atom::validate`] to recheck.
    pub fn from_sidecar(f: GridFunction, sidecar: &str) -> Result<Self> {
        let s: Sidecar = serde_json::from_str(sidecar)?;
        if s.cube.dim != f.spec().dim() {
            return Err(Error::SpecMismatch("sidecar cube dimension differs from the samples".into()));
        }
        Ok(Self { f, cube: s.cube, p: s.p, order: s.order, seed: s.seed })
    }
}

/// Draws `w r` on `Q` (a smooth bump times a random Chebyshev sum), removes
/// every moment of order `<= m` by projecting `r` onto the complement of the
/// polynomials in `L^2(Q, w)`, and scales the sup to `|Q|^{-1/p} / 2`.
pub fn make_atom(spec: GridSpec, cube: DyadicCube, p: f64, m: usize, seed: u64) -> Result<Atom> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("atoms need 0 < p <= 1, got {p}")));
    }
    if m > MAX_ORDER {
        return Err(Error::InvalidArgument(format!("moment order {m} exceeds {MAX_ORDER}")));
    }
    let need = min_order(spec.dim(), p);
    if m < need {
        return Err(Error::InvalidArgument(format!("moment order {m} below [n/p - n]_+ = {need}")));
    }
    if cube.samples(&spec)? < MIN_SAMPLES {
        return Err(Error::TooCoarse(format!("cube side needs at least {MIN_SAMPLES} samples per axis")));
    }
    let inside = cube.indices(&spec)?;
    let c = cube.centre();
    let half = cube.side() / 2.0;
    let dim = spec.dim();
    let u: Vec<[f64; 2]> = inside
        .iter()
        .map(|&i| {
            let x = spec.point(i);
            [(x[0] - c[0]) / half, if dim == 1 { 0.0 } else { (x[1] - c[1]) / half }]
        })
        .collect();
    let w: Vec<f64> = u.iter().map(|v| (0..dim).map(|d| bump(v[d])).product()).collect();
    let basis = weighted_orthonormal(&u, &w, dim, m)?;
    // detail down to about two samples so every resolvable shell sees the atom
    let degree = (m + 4).max(cube.samples(&spec)? / 2);
    for attempt in 0..RETRIES {
        let s = seed + attempt;
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let nb = if dim == 1 { 1 } else { degree + 1 };
        let coef: Vec<f64> = (0..(degree + 1) * nb).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut r: Vec<f64> = u
            .iter()
            .map(|v| {
                let mut acc = 0.0;
                for a in 0..=degree {
                    for b in 0..nb {
                        let t1 = if dim == 1 { 1.0 } else { cheb(b, v[1]) };
                        // equal energy per octave of degree
                        let taper = ((1 + a) * (1 + b)) as f64;
                        acc += coef[a * nb + b] * cheb(a, v[0]) * t1 / taper.sqrt();
                    }
                }
                acc
            })
            .collect();
        let before = weighted_norm(&r, &w);
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = r.iter().zip(b).zip(&w).map(|((x, y), z)| x * y * z).sum();
                for (x, y) in r.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        if weighted_norm(&r, &w) < 1e-6 * before {
            continue;
        }
        let vals: Vec<f64> = r.iter().zip(&w).map(|(a, b)| a * b).collect();
        let peak = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale = cube.volume().powf(-1.0 / p) / 2.0 / peak;
        let mut out = vec![C64::new(0.0, 0.0); spec.len()];
        for (&i, v) in inside.iter().zip(&vals) {
            out[i] = C64::new(v * scale, 0.0);
        }
        let atom = Atom { f: GridFunction::new(spec, out)?, cube, p, order: m, seed: s };
        let cert = atom.validate()?;
        if !cert.passed() {
            return Err(Error::Degenerate(format!("atom failed certification: {cert:?}")));
        }
        return Ok(atom);
    }
    Err(Error::Degenerate(format!("projection annihilated {RETRIES} draws from seed {seed}")))
}

fn weighted_norm(r: &[f64], w: &[f64]) -> f64 {
    r.iter().zip(w).map(|(a, b)| a * a * b).sum::<f64>().sqrt()
}

/// Monomials `u^gamma`, `|gamma| <= m`, orthonormalized in `sum f g w` by
/// modified Gram-Schmidt applied twice.
fn weighted_orthonormal(u: &[[f64; 2]], w: &[f64], dim: usize, m: usize) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for g in multi_indices(dim, m) {
        let mut v: Vec<f64> = u.iter().map(|x| x[0].powi(g[0] as i32) * x[1].powi(g[1] as i32)).collect();
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = v.iter().zip(b).zip(w).map(|((x, y), z)| x * y * z).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nv = weighted_norm(&v, w);
        if !(nv > 1e-12) {
            return Err(Error::Degenerate("polynomial basis is rank deficient on the cube".into()));
        }
        for x in v.iter_mut() {
            *x /= nv;
        }
        basis.push(v);
    }
    Ok(basis)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub j: i32,
    /// `sup |Lambda_j a| / bound` and the same for `Gamma_j`.
    pub lambda: f64,
    pub gamma: f64,
    /// `||Lambda_j a||_r / bound_r` for `r = 1, 2, inf`.
    pub lambda_lr: [f64; 3],
    pub gamma_lr: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub rows: Vec<DecayRow>,
    /// Largest ratio anywhere in the sweep.
    pub max: f64,
    /// Largest max/min across `j` of any column, zeros skipped.
    pub spread: f64,
}

fn column_spread(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.filter(|x| *x > 0.0).collect();
    if v.is_empty() {
        return 1.0;
    }
    let hi = v.iter().cloned().fold(0.0, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Ratios of `|Lambda_j a|`, `|Gamma_j a|` and their `L^r` norms to the atom
/// decay bounds, over every resolvable shell.
pub fn decay_profile_check(fam: &LpFamily, a: &Atom, l0: f64) -> Result<DecayReport> {
    if !(2.0..=8.0).contains(&l0) {
        return Err(Error::InvalidArgument(format!("L0 must lie in [2, 8], got {l0}")));
    }
    let cert = a.validate()?;
    if !cert.passed() {
        return Err(Error::Degenerate("atom is not certified".into()));
    }
    let spec = *fam.spec();
    let n = spec.dim() as f64;
    let ell = a.cube.side();
    let xq = a.cube.corner();
    let mo = a.order as f64;
    let mut rows = Vec::new();
    for j in fam.shells() {
        let t = 2f64.powi(j) * ell;
        let base = ell.powf(-n / a.p) * t.powf(mo + n + 1.0).min(1.0);
        let bound: Vec<f64> = (0..spec.len())
            .map(|i| {
                let x = spec.point(i);
                if a.in_dilate(1, x) {
                    base
                } else {
                    let d2: f64 = (0..spec.dim()).map(|d| (2f64.powi(j) * (x[d] - xq[d])).powi(2)).sum();
                    base * (1.0 + d2).powf(-l0 / 2.0)
                }
            })
            .collect();
        let lam = fam.lambda(&a.f, j)?;
        let gam = fam.gamma(&a.f, j)?;
        let pointwise = |g: &GridFunction| g.values().iter().zip(&bound).map(|(v, b)| v.norm() / b).fold(0.0, f64::max);
        let lr = |g: &GridFunction| -> Result<[f64; 3]> {
            let mut out = [0.0; 3];
            for (k, r) in [1.0, 2.0, f64::INFINITY].into_iter().enumerate() {
                let inv_r = if r.is_infinite() { 0.0 } else { 1.0 / r };
                let b = ell.powf(-n / a.p + n * inv_r) * t.powf(mo + n - n * inv_r + 1.0).min(1.0);
                out[k] = lp_norm_abs(&spec, &g.abs(), r)? / b;
            }
            Ok(out)
        };
        rows.push(DecayRow { j, lambda: pointwise(&lam), gamma: pointwise(&gam), lambda_lr: lr(&lam)?, gamma_lr: lr(&gam)? });
    }
    let mut max = 0.0f64;
    let mut spread = 1.0f64;
    let cols: Vec<Box<dyn Fn(&DecayRow) -> f64>> = vec![
        Box::new(|r| r.lambda),
        Box::new(|r| r.gamma),
        Box::new(|r| r.lambda_lr[0]),
        Box::new(|r| r.lambda_lr[1]),
        Box::new(|r| r.lambda_lr[2]),
        Box::new(|r| r.gamma_lr[0]),
        Box::new(|r| r.gamma_lr[1]),
        Box::new(|r| r.gamma_lr[2]),
    ];
    for c in &cols {
        max = rows.iter().map(|r| c(r)).fold(max, f64::max);
        spread = spread.max(column_spread(rows.iter().map(|r| c(r))));
    }
    Ok(DecayReport { rows, max, spread })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    pub eps: f64,
    /// `(l, sup|phi_l * a| / (2^{l(N+n+eps)} int |y - x_Q|^{N+eps} |a(y)| dy))`.
    pub rows: Vec<(i32, f64)>,
    /// Fitted `C_eps`: the largest ratio.
    pub constant: f64,
}

/// Moment-cancellation bound for `phi_l * a` with `N` the atom's moment order.
pub fn cancellation_check(profile: &HardyProfile, a: &Atom, eps: f64) -> Result<CancellationReport> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps must lie in [0, 1], got {eps}")));
    }
    let spec = *a.f.spec();
    profile.spec().ensure_same(&spec)?;
    let n = spec.dim() as f64;
    let big_n = a.order as f64;
    let xq = a.cube.corner();
    let weighted: f64 = a
        .f
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let y = spec.point(i);
            let d = (0..spec.dim()).map(|k| (y[k] - xq[k]).powi(2)).sum::<f64>().sqrt();
            d.powf(big_n + eps) * v.norm()
        })
        .sum::<f64>()
        * spec.cell();
    let mut rows = Vec::new();
    for (l, g) in profile.l_range().zip(profile.convolve_all(&a.f)?) {
        let rhs = 2f64.powf(l as f64 * (big_n + n + eps)) * weighted;
        rows.push((l, g.max_abs() / rhs));
    }
    let constant = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(CancellationReport { eps, rows, constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::inner;

    fn spec() -> GridSpec {
        GridSpec::new(1, 256, 32.0).unwrap()
    }

    #[test]
    fn orders() {
        assert_eq!(min_order(1, 1.0), 0);
        assert_eq!(min_order(1, 0.5), 1);
        assert_eq!(min_order(2, 0.5), 2);
        assert_eq!(min_order(1, 0.3), 2);
        assert_eq!(default_order(1, 0.5), 3);
        assert_eq!(multi_indices(2, 2).len(), 6);
    }

    #[test]
    fn p_one_order_zero() {
        let q = DyadicCube::new(1, 0, [0, 0]);
        let s = GridSpec::new(1, 512, 32.0).unwrap();
        let a = make_atom(s, q, 1.0, 0, 1).unwrap();
        let c = a.validate().unwrap();
        assert!(c.passed());
        assert!(a.f.max_abs() <= 1.0);
        let total: C64 = a.f.values().iter().sum::<C64>() * s.cell();
        assert!(total.norm() < 1e-12);
    }

    #[test]
    fn p_half_kills_two_moments() {
        let q = DyadicCube::new(1, -1, [1, 0]);
        let a = make_atom(spec(), q, 0.5, 1, 2).unwrap();
        assert!(a.validate().unwrap().passed());
        assert!(make_atom(spec(), q, 0.5, 0, 2).is_err());
        assert!(make_atom(spec(), q, 0.5, 7, 2).is_err());
    }

    #[test]
    fn two_dimensional_atoms_certify() {
        let s = GridSpec::new(2, 64, 8.0).unwrap();
        let q = DyadicCube::new(2, -1, [0, -1]);
        for m in [0, 2, 4] {
            let a = make_atom(s, q, 0.5, m.max(2), 9).unwrap();
            assert!(a.validate().unwrap().passed());
        }
    }

    #[test]
    fn seeds_differ() {
        let q = DyadicCube::new(1, -1, [0, 0]);
        let a = make_atom(spec(), q, 1.0, 2, 1).unwrap();
        let b = make_atom(spec(), q, 1.0, 2, 2).unwrap();
        let ab = inner(&a.f, &b.f).unwrap().norm();
        let aa = inner(&a.f, &a.f).unwrap().norm();
        let bb = inner(&b.f, &b.f).unwrap().norm();
        assert!(ab / (aa * bb).sqrt() < 0.99);
    }

    #[test]
    fn cube_too_small() {
        let q = DyadicCube::new(1, 2, [0, 0]);
        assert!(matches!(make_atom(spec(), q, 1.0, 0, 1), Err(Error::TooCoarse(_))));
    }

    #[test]
    fn decay_report_is_finite() {
        let fam = LpFamily::build(spec()).unwrap();
        let q = DyadicCube::new(1, -1, [0, 0]);
        let a = make_atom(spec(), q, 1.0, 2, 3).unwrap();
        let r = decay_profile_check(&fam, &a, 2.0).unwrap();
        assert_eq!(r.rows.len(), fam.shells().count());
        assert!(r.max.is_finite() && r.spread.is_finite());
        assert!(decay_profile_check(&fam, &a, 1.0).is_err());
    }

    #[test]
    fn cancellation_constant_is_finite() {
        let p = HardyProfile::build(spec()).unwrap();
        let q = DyadicCube::new(1, -1, [0, 0]);
        let a = make_atom(spec(), q, 1.0, 1, 4).unwrap();
        for eps in [0.0, 0.5, 1.0] {
            let r = cancellation_check(&p, &a, eps).unwrap();
            assert!(r.constant.is_finite() && r.constant > 0.0);
        }
    }

    #[test]
    fn sidecar() {
        let q = DyadicCube::new(1, -1, [0, 0]);
        let a = make_atom(spec(), q, 1.0, 1, 4).unwrap();
        let v: serde_json::Value = serde_json::from_str(&a.sidecar_json().unwrap()).unwrap();
        assert_eq!(v["certificate"]["support"], true);
        assert_eq!(v["order"], 1);
    }
}
