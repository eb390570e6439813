//! Sampled functions on the box `[-L/2, L/2)^dim`, the discrete Fourier pair,
//! Riemann-sum integrals, norms, moments and convolution.
//!
//! Physical samples are stored in natural order (index 0 is `x = -L/2`).
//! Spectra are stored centred: index `c` along an axis is the frequency
//! `(c - N/2) / L`. The forward transform is `h^dim * sum f(x) e^{-2 pi i x.xi}`
//! and the inverse is `L^-dim * sum F(xi) e^{+2 pi i x.xi}`.

use std::cell::RefCell;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Fraction of the box length, measured from each face, that must hold a decayed function.
pub const MARGIN_FRACTION: f64 = 0.1;
/// Default relative bound for samples inside the margin.
pub const MARGIN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    log2_n: u32,
    log2_l: i32,
}

impl GridSpec {
    /// `n` must be a power of two at least 16 and `l` a power of two.
    pub fn new(dim: usize, n: usize, l: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if !n.is_power_of_two() || n < 16 {
            return Err(Error::InvalidGrid(format!("N must be a power of two >= 16, got {n}")));
        }
        let log2_l = dyadic_log2(l)
            .ok_or_else(|| Error::InvalidGrid(format!("L must be a power of two, got {l}")))?;
        Ok(Self { dim, log2_n: n.trailing_zeros(), log2_l })
    }

    pub fn from_logs(dim: usize, log2_n: u32, log2_l: i32) -> Result<Self> {
        Self::new(dim, 1usize << log2_n, 2f64.powi(log2_l))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n(&self) -> usize {
        1 << self.log2_n
    }
    pub fn log2_n(&self) -> u32 {
        self.log2_n
    }
    pub fn log2_l(&self) -> i32 {
        self.log2_l
    }
    pub fn l(&self) -> f64 {
        2f64.powi(self.log2_l)
    }
    pub fn h(&self) -> f64 {
        2f64.powi(self.log2_l - self.log2_n as i32)
    }
    pub fn log2_h(&self) -> i32 {
        self.log2_l - self.log2_n as i32
    }
    /// Number of samples, `N^dim`.
    pub fn len(&self) -> usize {
        self.n().pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Quadrature weight `h^dim`.
    pub fn cell(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }
    pub fn coord(&self, i: usize) -> f64 {
        -self.l() / 2.0 + i as f64 * self.h()
    }
    /// Frequency of centred index `c` along one axis.
    pub fn freq(&self, c: usize) -> f64 {
        self.freq_int(c) as f64 / self.l()
    }
    /// Integer lattice label `k` of centred index `c`.
    pub fn freq_int(&self, c: usize) -> i64 {
        c as i64 - (self.n() / 2) as i64
    }
    /// Per-axis indices of a flat index (unused axes are zero).
    pub fn split(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n(), idx % self.n()]
        }
    }
    pub fn join(&self, ix: [usize; 2]) -> usize {
        if self.dim == 1 {
            ix[0]
        } else {
            ix[0] * self.n() + ix[1]
        }
    }
    /// Physical point of a flat index.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.split(idx);
        if self.dim == 1 {
            [self.coord(a), 0.0]
        } else {
            [self.coord(a), self.coord(b)]
        }
    }
    /// Frequency vector of a flat centred index.
    pub fn xi(&self, idx: usize) -> [f64; 2] {
        let [a, b] = self.split(idx);
        if self.dim == 1 {
            [self.freq(a), 0.0]
        } else {
            [self.freq(a), self.freq(b)]
        }
    }
    /// Integer lattice label of a flat centred index.
    pub fn xi_int(&self, idx: usize) -> [i64; 2] {
        let [a, b] = self.split(idx);
        if self.dim == 1 {
            [self.freq_int(a), 0]
        } else {
            [self.freq_int(a), self.freq_int(b)]
        }
    }
    /// `|xi|` at a flat centred index.
    pub fn xi_norm(&self, idx: usize) -> f64 {
        let [k0, k1] = self.xi_int(idx);
        ((k0 * k0 + k1 * k1) as f64).sqrt() / self.l()
    }
    /// Flat index of the origin `x = 0`.
    pub fn origin(&self) -> usize {
        self.join([self.n() / 2, self.n() / 2])
    }
    /// Nyquist frequency `N / (2L)`.
    pub fn nyquist(&self) -> f64 {
        self.n() as f64 / (2.0 * self.l())
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::SpecMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Exact base-2 logarithm of a positive power of two.
pub fn dyadic_log2(x: f64) -> Option<i32> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    let e = x.log2().round() as i32;
    (2f64.powi(e) == x).then_some(e)
}

/// Samples on the physical grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<C64>,
}

/// Samples on the frequency lattice (centred order).
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFunction {
    spec: GridSpec,
    values: Vec<C64>,
}

fn check_values(spec: &GridSpec, values: &[C64]) -> Result<()> {
    if values.len() != spec.len() {
        return Err(Error::InvalidGrid(format!(
            "expected {} samples, got {}",
            spec.len(),
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

macro_rules! sampled_common {
    ($t:ty) => {
        impl $t {
            pub fn new(spec: GridSpec, values: Vec<C64>) -> Result<Self> {
                check_values(&spec, &values)?;
                Ok(Self { spec, values })
            }
            pub fn zeros(spec: GridSpec) -> Self {
                Self { spec, values: vec![C64::new(0.0, 0.0); spec.len()] }
            }
            pub fn spec(&self) -> &GridSpec {
                &self.spec
            }
            pub fn values(&self) -> &[C64] {
                &self.values
            }
            pub fn into_values(self) -> Vec<C64> {
                self.values
            }
            pub fn scale(&self, c: C64) -> Self {
                Self { spec: self.spec, values: self.values.iter().map(|v| v * c).collect() }
            }
            pub fn add(&self, other: &Self) -> Result<Self> {
                self.spec.ensure_same(&other.spec)?;
                let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
                Ok(Self { spec: self.spec, values })
            }
            pub fn sub(&self, other: &Self) -> Result<Self> {
                self.spec.ensure_same(&other.spec)?;
                let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
                Ok(Self { spec: self.spec, values })
            }
            /// Pointwise product.
            pub fn mul(&self, other: &Self) -> Result<Self> {
                self.spec.ensure_same(&other.spec)?;
                let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
                Ok(Self { spec: self.spec, values })
            }
            pub fn max_abs(&self) -> f64 {
                self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
            }
            /// `max |self - other| / max |other|` (absolute when `other` vanishes).
            pub fn rel_diff(&self, other: &Self) -> f64 {
                let d = self
                    .values
                    .iter()
                    .zip(&other.values)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                let s = other.max_abs();
                if s > 0.0 {
                    d / s
                } else {
                    d
                }
            }
            pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
                write_binary(w, &self.spec, &self.values, None)
            }
            pub fn read_binary<R: Read>(r: R) -> Result<Self> {
                let (spec, values, _) = read_binary(r, false)?;
                Self::new(spec, values)
            }
            pub fn to_json(&self) -> Result<String> {
                Ok(serde_json::to_string(&SampledJson::from_parts(&self.spec, &self.values))?)
            }
            pub fn from_json(s: &str) -> Result<Self> {
                let j: SampledJson = serde_json::from_str(s)?;
                let (spec, values) = j.into_parts()?;
                Self::new(spec, values)
            }
        }
    };
}

sampled_common!(GridFunction);
sampled_common!(SpectralFunction);

impl GridFunction {
    /// Samples `f` at every grid point.
    pub fn from_fn(spec: GridSpec, f: impl Fn([f64; 2]) -> C64) -> Result<Self> {
        let values = (0..spec.len()).map(|i| f(spec.point(i))).collect();
        Self::new(spec, values)
    }
    pub fn from_real(spec: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        Self::from_fn(spec, |x| C64::new(f(x), 0.0))
    }
    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }
    pub fn forward(&self) -> SpectralFunction {
        forward_transform(self)
    }
    /// Applies the Fourier multiplier `m(xi)`.
    pub fn multiply(&self, m: impl Fn([f64; 2]) -> C64) -> GridFunction {
        let mut s = forward_transform(self);
        for (i, v) in s.values.iter_mut().enumerate() {
            *v *= m(self.spec.xi(i));
        }
        inverse_transform(&s)
    }
    /// Applies a radial multiplier `m(|xi|)`.
    pub fn multiply_radial(&self, m: impl Fn(f64) -> f64) -> GridFunction {
        let mut s = forward_transform(self);
        for (i, v) in s.values.iter_mut().enumerate() {
            *v *= m(self.spec.xi_norm(i));
        }
        inverse_transform(&s)
    }
    /// Periodic translate: sample `i` moves to `i + shift` on each axis.
    pub fn roll(&self, shift: [i64; 2]) -> GridFunction {
        let spec = self.spec;
        let n = spec.n() as i64;
        let mut out = vec![C64::new(0.0, 0.0); spec.len()];
        for (i, v) in self.values.iter().enumerate() {
            let [a, b] = spec.split(i);
            let a = (a as i64 + shift[0]).rem_euclid(n) as usize;
            let b = if spec.dim == 1 { 0 } else { (b as i64 + shift[1]).rem_euclid(n) as usize };
            out[spec.join([a, b])] = *v;
        }
        GridFunction { spec, values: out }
    }
}

impl SpectralFunction {
    pub fn from_fn(spec: GridSpec, f: impl Fn([f64; 2]) -> C64) -> Result<Self> {
        let values = (0..spec.len()).map(|i| f(spec.xi(i))).collect();
        Self::new(spec, values)
    }
    pub fn inverse(&self) -> GridFunction {
        inverse_transform(self)
    }
    pub(crate) fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(n, dir))
}

/// Unnormalized in-place DFT along every axis of a `dim`-dimensional block.
fn fft_nd(data: &mut [C64], n: usize, dim: usize, dir: FftDirection) {
    let fft = plan(n, dir);
    // rows (last axis is contiguous)
    fft.process(data);
    if dim == 2 {
        let mut col = vec![C64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            fft.process(&mut col);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
    }
}

/// Sign `(-1)^k` for the centred label of DFT bin `q` along one axis.
fn bin_sign(q: usize, n: usize) -> f64 {
    let k = if q < n / 2 { q as i64 } else { q as i64 - n as i64 };
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

fn centred(q: usize, n: usize) -> usize {
    (q + n / 2) % n
}

/// `f_hat(xi_k) = h^dim sum_x f(x) e^{-2 pi i x.xi_k}`.
pub fn forward_transform(f: &GridFunction) -> SpectralFunction {
    let spec = f.spec;
    let n = spec.n();
    let mut data = f.values.clone();
    fft_nd(&mut data, n, spec.dim, FftDirection::Forward);
    let w = spec.cell();
    let mut out = vec![C64::new(0.0, 0.0); spec.len()];
    for (idx, v) in data.into_iter().enumerate() {
        let [q0, q1] = spec.split(idx);
        let (c, s) = if spec.dim == 1 {
            (centred(q0, n), bin_sign(q0, n))
        } else {
            (centred(q0, n) * n + centred(q1, n), bin_sign(q0, n) * bin_sign(q1, n))
        };
        out[c] = v * (w * s);
    }
    SpectralFunction { spec, values: out }
}

/// `f(x) = L^-dim sum_k F(xi_k) e^{2 pi i x.xi_k}`.
pub fn inverse_transform(s: &SpectralFunction) -> GridFunction {
    let spec = s.spec;
    let n = spec.n();
    let mut data = vec![C64::new(0.0, 0.0); spec.len()];
    for (idx, slot) in data.iter_mut().enumerate() {
        let [q0, q1] = spec.split(idx);
        let (c, sg) = if spec.dim == 1 {
            (centred(q0, n), bin_sign(q0, n))
        } else {
            (centred(q0, n) * n + centred(q1, n), bin_sign(q0, n) * bin_sign(q1, n))
        };
        *slot = s.values[c] * sg;
    }
    fft_nd(&mut data, n, spec.dim, FftDirection::Inverse);
    let w = spec.l().powi(-(spec.dim as i32));
    for v in data.iter_mut() {
        *v *= w;
    }
    GridFunction { spec, values: data }
}

/// Riemann-sum `L^p` norm; `p = f64::INFINITY` gives the sup norm.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    lp_norm_abs(f.spec(), &f.abs(), p)
}

/// `L^p` norm of a nonnegative sample vector on `spec`.
pub fn lp_norm_abs(spec: &GridSpec, a: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    if p.is_infinite() {
        return Ok(a.iter().copied().fold(0.0, f64::max));
    }
    let m = a.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return Ok(0.0);
    }
    // scale by the max to keep small p well conditioned
    let s: f64 = a.iter().map(|v| (v / m).powf(p)).sum();
    Ok(m * (spec.cell() * s).powf(1.0 / p))
}

/// `sum_x h^dim x^alpha f(x)`.
pub fn moment(f: &GridFunction, alpha: &[u32]) -> C64 {
    let spec = f.spec;
    let mut acc = C64::new(0.0, 0.0);
    for (i, v) in f.values.iter().enumerate() {
        let x = spec.point(i);
        let mut w = 1.0;
        for (d, &a) in alpha.iter().enumerate().take(spec.dim) {
            w *= x[d].powi(a as i32);
        }
        acc += v * w;
    }
    acc * spec.cell()
}

/// `<f, g> = h^dim sum f conj(g)`.
pub fn inner(f: &GridFunction, g: &GridFunction) -> Result<C64> {
    f.spec.ensure_same(&g.spec)?;
    let s: C64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum();
    Ok(s * f.spec.cell())
}

/// Periodic grid convolution `h^dim sum_y f(y) g(x - y)` via spectra.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    f.spec.ensure_same(&g.spec)?;
    let mut a = forward_transform(f);
    let b = forward_transform(g);
    for (u, v) in a.values.iter_mut().zip(&b.values) {
        *u *= v;
    }
    Ok(inverse_transform(&a))
}

/// `|| (sum_k |a_k|^q)^{1/q} ||_{L^p}` for rows `a_k` of nonnegative samples;
/// `q = f64::INFINITY` takes the pointwise max.
pub fn mixed_norm(spec: &GridSpec, rows: &[Vec<f64>], p: f64, q: f64) -> Result<f64> {
    lp_norm_abs(spec, &mixed_pointwise(spec, rows, q)?, p)
}

/// Pointwise `l^q` norm across `rows`.
pub fn mixed_pointwise(spec: &GridSpec, rows: &[Vec<f64>], q: f64) -> Result<Vec<f64>> {
    if !(q > 0.0) {
        return Err(Error::InvalidArgument(format!("q must be positive, got {q}")));
    }
    let mut acc = vec![0.0f64; spec.len()];
    if q.is_infinite() {
        for r in rows {
            for (a, v) in acc.iter_mut().zip(r) {
                *a = a.max(*v);
            }
        }
    } else {
        let m = rows.iter().flatten().copied().fold(0.0, f64::max);
        if m == 0.0 {
            return Ok(acc);
        }
        for r in rows {
            for (a, v) in acc.iter_mut().zip(r) {
                *a += (v / m).powf(q);
            }
        }
        for a in acc.iter_mut() {
            *a = m * a.powf(1.0 / q);
        }
    }
    Ok(acc)
}

/// True when a flat index lies in the outer margin of the box.
pub fn in_margin(spec: &GridSpec, idx: usize) -> bool {
    let edge = spec.l() * (0.5 - MARGIN_FRACTION);
    let x = spec.point(idx);
    x[..spec.dim].iter().any(|c| c.abs() >= edge)
}

/// Largest margin sample relative to the sup norm (0 for the zero function).
pub fn margin_ratio(f: &GridFunction) -> f64 {
    let m = f.max_abs();
    if m == 0.0 {
        return 0.0;
    }
    let worst = (0..f.spec.len())
        .filter(|&i| in_margin(&f.spec, i))
        .map(|i| f.values[i].norm())
        .fold(0.0, f64::max);
    worst / m
}

/// Decay guard: the function must be negligible in the outer margin.
pub fn check_margin(f: &GridFunction, tol: f64) -> Result<()> {
    let r = margin_ratio(f);
    if r > tol {
        return Err(Error::MarginViolation(r));
    }
    Ok(())
}

const HEADER_BYTES: usize = 24;

pub(crate) fn write_binary<W: Write>(
    mut w: W,
    spec: &GridSpec,
    values: &[C64],
    m: Option<u64>,
) -> Result<()> {
    w.write_all(&(spec.dim as u64).to_le_bytes())?;
    w.write_all(&(spec.n() as u64).to_le_bytes())?;
    w.write_all(&spec.l().to_le_bytes())?;
    if let Some(m) = m {
        w.write_all(&m.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(values.len() * 16);
    for v in values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads the grid binary layout; with `with_m` an extra 8-byte arity field
/// follows the header and the payload holds `N^(m*dim)` values.
pub(crate) fn read_binary<R: Read>(mut r: R, with_m: bool) -> Result<(GridSpec, Vec<C64>, u64)> {
    let mut head = [0u8; HEADER_BYTES];
    r.read_exact(&mut head).map_err(|e| Error::Format(format!("short header: {e}")))?;
    let word = |i: usize| {
        let mut b = [0u8; 8];
        b.copy_from_slice(&head[8 * i..8 * i + 8]);
        b
    };
    let dim = u64::from_le_bytes(word(0)) as usize;
    let n = u64::from_le_bytes(word(1)) as usize;
    let l = f64::from_le_bytes(word(2));
    let spec = GridSpec::new(dim, n, l)?;
    let m = if with_m {
        let mut b = [0u8; 8];
        r.read_exact(&mut b).map_err(|e| Error::Format(format!("short header: {e}")))?;
        u64::from_le_bytes(b)
    } else {
        1
    };
    if !(1..=3).contains(&m) {
        return Err(Error::Format(format!("arity {m} outside 1..=3")));
    }
    let count = spec.len().pow(m as u32);
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != count * 16 {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            count * 16
        )));
    }
    let f = |c: &[u8]| {
        let mut b = [0u8; 8];
        b.copy_from_slice(c);
        f64::from_le_bytes(b)
    };
    let values = payload.chunks_exact(16).map(|c| C64::new(f(&c[..8]), f(&c[8..]))).collect();
    Ok((spec, values, m))
}

#[derive(Serialize, Deserialize)]
struct SampledJson {
    dim: usize,
    n: usize,
    l: f64,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SampledJson {
    fn from_parts(spec: &GridSpec, values: &[C64]) -> Self {
        Self {
            dim: spec.dim,
            n: spec.n(),
            l: spec.l(),
            re: values.iter().map(|v| v.re).collect(),
            im: values.iter().map(|v| v.im).collect(),
        }
    }
    fn into_parts(self) -> Result<(GridSpec, Vec<C64>)> {
        let spec = GridSpec::new(self.dim, self.n, self.l)?;
        if self.re.len() != self.im.len() {
            return Err(Error::Format("re/im length mismatch".into()));
        }
        let values = self.re.into_iter().zip(self.im).map(|(a, b)| C64::new(a, b)).collect();
        Ok((spec, values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn direct_dft(f: &GridFunction) -> Vec<C64> {
        let spec = f.spec();
        (0..spec.len())
            .map(|k| {
                let xi = spec.xi(k);
                let mut acc = C64::new(0.0, 0.0);
                for (i, v) in f.values().iter().enumerate() {
                    let x = spec.point(i);
                    let ph = -2.0 * PI * (x[0] * xi[0] + x[1] * xi[1]);
                    acc += v * C64::from_polar(1.0, ph);
                }
                acc * spec.cell()
            })
            .collect()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(3, 64, 8.0).is_err());
        assert!(GridSpec::new(1, 48, 8.0).is_err());
        assert!(GridSpec::new(1, 8, 8.0).is_err());
        assert!(GridSpec::new(1, 64, 6.0).is_err());
        assert!(GridSpec::new(1, 64, 0.5).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        let spec = GridSpec::new(1, 16, 4.0).unwrap();
        let mut v = vec![C64::new(0.0, 0.0); 16];
        v[3] = C64::new(f64::NAN, 0.0);
        assert!(matches!(GridFunction::new(spec, v), Err(Error::NonFinite(3))));
    }

    #[test]
    fn forward_matches_direct_sum_1d_and_2d() {
        for spec in [GridSpec::new(1, 32, 4.0).unwrap(), GridSpec::new(2, 16, 2.0).unwrap()] {
            let f = GridFunction::from_fn(spec, |x| {
                C64::new((x[0] * 1.3).sin() + x[1], (x[0] - 0.2 * x[1]).cos())
            })
            .unwrap();
            let a = forward_transform(&f);
            let b = direct_dft(&f);
            for (u, v) in a.values().iter().zip(&b) {
                assert!((u - v).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn gaussian_transform_is_gaussian() {
        let spec = GridSpec::new(1, 256, 32.0).unwrap();
        let f = GridFunction::from_real(spec, |x| (-PI * x[0] * x[0]).exp()).unwrap();
        let s = forward_transform(&f);
        for (i, v) in s.values().iter().enumerate() {
            let xi = spec.xi(i)[0];
            assert!((v - C64::new((-PI * xi * xi).exp(), 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn single_frequency_inverse_is_constant() {
        let spec = GridSpec::new(1, 64, 8.0).unwrap();
        let mut s = SpectralFunction::zeros(spec);
        s.values_mut()[32] = C64::new(1.0, 0.0);
        let f = inverse_transform(&s);
        for v in f.values() {
            assert!((v - C64::new(1.0 / 8.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let spec = GridSpec::new(2, 16, 4.0).unwrap();
        let z = GridFunction::zeros(spec);
        assert_eq!(forward_transform(&z).max_abs(), 0.0);
        assert_eq!(inverse_transform(&SpectralFunction::zeros(spec)).max_abs(), 0.0);
        assert_eq!(lp_norm(&z, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn lp_norm_of_indicator() {
        let spec = GridSpec::new(2, 64, 8.0).unwrap();
        let f = GridFunction::from_real(spec, |x| {
            if (0.0..1.0).contains(&x[0]) && (0.0..2.0).contains(&x[1]) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        for p in [0.5, 1.0, 3.0] {
            assert!((lp_norm(&f, p).unwrap() - 2f64.powf(1.0 / p)).abs() < 1e-12);
        }
        assert_eq!(lp_norm(&f, f64::INFINITY).unwrap(), 1.0);
        assert!(lp_norm(&f, 0.0).is_err());
    }

    #[test]
    fn moments_of_gaussian_and_odd_function() {
        let spec = GridSpec::new(1, 256, 32.0).unwrap();
        let g = GridFunction::from_real(spec, |x| (-PI * x[0] * x[0]).exp()).unwrap();
        assert!((moment(&g, &[2]).re - 1.0 / (2.0 * PI)).abs() < 1e-6);
        let odd = GridFunction::from_real(spec, |x| x[0] * (-x[0] * x[0]).exp()).unwrap();
        assert!(moment(&odd, &[0]).norm() < 1e-12);
    }

    #[test]
    fn convolution_identity_and_gaussians() {
        let spec = GridSpec::new(1, 256, 32.0).unwrap();
        let gauss = |a: f64| {
            GridFunction::from_real(spec, move |x| (-PI * x[0] * x[0] / (a * a)).exp() / a).unwrap()
        };
        let f = gauss(1.5);
        let mut d = GridFunction::zeros(spec);
        let o = spec.origin();
        let mut vals = d.clone().into_values();
        vals[o] = C64::new(1.0 / spec.h(), 0.0);
        d = GridFunction::new(spec, vals).unwrap();
        assert!(convolve(&f, &d).unwrap().rel_diff(&f) < 1e-12);
        let c = convolve(&gauss(1.0), &gauss(2.0)).unwrap();
        let w = (5f64).sqrt();
        assert!(c.sub(&gauss(w)).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn convolution_matches_brute_force() {
        let spec = GridSpec::new(1, 64, 8.0).unwrap();
        let f = GridFunction::from_fn(spec, |x| C64::new((x[0]).sin(), x[0].cos() * 0.3)).unwrap();
        let g = GridFunction::from_real(spec, |x| (-x[0] * x[0]).exp()).unwrap();
        let c = convolve(&f, &g).unwrap();
        let n = spec.n();
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                // periodic difference of natural indices; origin sits at N/2
                let d = (i + n + n / 2 - j) % n;
                acc += f.values()[j] * g.values()[d];
            }
            acc *= spec.h();
            assert!((acc - c.values()[i]).norm() < 1e-10 * (1.0 + c.max_abs()));
        }
    }

    #[test]
    fn margin_guard() {
        let spec = GridSpec::new(1, 256, 32.0).unwrap();
        let g = GridFunction::from_real(spec, |x| (-PI * x[0] * x[0]).exp()).unwrap();
        assert!(check_margin(&g, MARGIN_TOL).is_ok());
        let wide = GridFunction::from_real(spec, |x| (-0.01 * x[0] * x[0]).exp()).unwrap();
        assert!(matches!(check_margin(&wide, MARGIN_TOL), Err(Error::MarginViolation(_))));
    }

    #[test]
    fn binary_and_json_round_trip() {
        let spec = GridSpec::new(2, 16, 0.5).unwrap();
        let f = GridFunction::from_fn(spec, |x| C64::new(x[0], -x[1])).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 16 * 256);
        assert_eq!(GridFunction::read_binary(&buf[..]).unwrap(), f);
        assert_eq!(GridFunction::from_json(&f.to_json().unwrap()).unwrap(), f);
        assert!(GridFunction::read_binary(&buf[..30]).is_err());
    }
}
