//! m-linear Fourier multipliers on the grid lattice.
//!
//! `T_sigma(f_1, .., f_m)(x) = L^{-m dim} sum sigma(xi) prod f_i_hat(xi_i) e^{2 pi i x.(xi_1 + .. + xi_m)}`
//! where the sum runs over the m-fold lattice. Output spectra are kept on the
//! unfolded sum lattice (`m N` labels per axis) so supports can be read off
//! without aliasing.

pub mod paraproduct;
pub mod sobolev;

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    check_margin, forward_transform, inverse_transform, lp_norm, margin_ratio, moment, read_binary, write_binary, GridFunction,
    GridSpec, SpectralFunction, C64,
};
use crate::lp_frame::{big_theta_hat, psi_hat, theta_hat, AnnularPartition, Kind, LpFamily};

/// Largest `m * dim * log2 N` the direct oracle and full tensors accept.
pub const DIRECT_BUDGET: u32 = 18;
/// Relative margin bound for inputs to [`moment_check`].
pub const MOMENT_MARGIN_TOL: f64 = 1e-9;
/// Moment tolerance relative to `||g||_1`.
pub const MOMENT_TOL: f64 = 1e-7;
/// Fixed number of work chunks for the sparse sums, so results do not depend
/// on the thread count.
const CHUNKS: usize = 64;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn direct_cost(m: usize, spec: &GridSpec) -> u32 {
    (m * spec.dim()) as u32 * spec.log2_n()
}

fn check_budget(m: usize, spec: &GridSpec) -> Result<()> {
    let cost = direct_cost(m, spec);
    if cost > DIRECT_BUDGET {
        return Err(Error::BudgetExceeded { cost, budget: DIRECT_BUDGET });
    }
    Ok(())
}

fn check_arity(m: usize) -> Result<()> {
    if !(1..=3).contains(&m) {
        return Err(Error::InvalidArgument(format!("m must be 1, 2 or 3, got {m}")));
    }
    Ok(())
}

fn common_spec(inputs: &[&GridFunction]) -> Result<GridSpec> {
    let first = inputs.first().ok_or_else(|| Error::InvalidArgument("no inputs".into()))?;
    let spec = *first.spec();
    for f in inputs {
        spec.ensure_same(f.spec())?;
    }
    Ok(spec)
}

/// `1 - theta_hat(u)`: 0 on `u <= 1`, 1 on `u >= 2`.
pub fn vanish_cutoff(u: f64) -> f64 {
    1.0 - theta_hat(u)
}

/// One-variable radial profile used by separable symbols.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    One,
    Zero,
    Filter { filter: Kind, j: i32 },
}

impl Factor {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Factor::One => 1.0,
            Factor::Zero => 0.0,
            Factor::Filter { filter, j } => LpFamily::profile_at(*filter, *j, r),
        }
    }

    pub fn sample(&self, spec: GridSpec) -> Result<SpectralFunction> {
        SpectralFunction::from_fn(spec, |xi| C64::new(self.eval((xi[0] * xi[0] + xi[1] * xi[1]).sqrt()), 0.0))
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::One => write!(f, "one"),
            Factor::Zero => write!(f, "zero"),
            Factor::Filter { filter, j } => {
                let name = match filter {
                    Kind::Theta => "theta",
                    Kind::Psi => "psi",
                    Kind::ThetaTilde => "theta_tilde",
                    Kind::PsiTilde => "psi_tilde",
                };
                write!(f, "{name}:{j}")
            }
        }
    }
}

impl FromStr for Factor {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "one" => return Ok(Factor::One),
            "zero" => return Ok(Factor::Zero),
            _ => {}
        }
        let (name, j) = s.split_once(':').ok_or_else(|| Error::InvalidArgument(format!("bad factor `{s}`")))?;
        let filter = match name {
            "theta" => Kind::Theta,
            "psi" => Kind::Psi,
            "theta_tilde" => Kind::ThetaTilde,
            "psi_tilde" => Kind::PsiTilde,
            _ => return Err(Error::InvalidArgument(format!("unknown filter `{name}`"))),
        };
        let j = j.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad shell in `{s}`")))?;
        Ok(Factor::Filter { filter, j })
    }
}

/// Named symbol families.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    One,
    /// `|xi|^{i tau}`.
    Mihlin(f64),
    RandomBand(u64),
    Separable(Vec<Factor>),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::One => write!(f, "one"),
            Family::Mihlin(t) => write!(f, "mihlin({t})"),
            Family::RandomBand(s) => write!(f, "random_band({s})"),
            Family::Separable(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "separable({})", parts.join(","))
            }
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "one" {
            return Ok(Family::One);
        }
        let bad = || Error::InvalidArgument(format!("unknown symbol family `{s}`"));
        let (name, rest) = s.split_once('(').ok_or_else(bad)?;
        let arg = rest.strip_suffix(')').ok_or_else(bad)?;
        match name.trim() {
            "mihlin" => Ok(Family::Mihlin(arg.trim().parse().map_err(|_| bad())?)),
            "random_band" => Ok(Family::RandomBand(arg.trim().parse().map_err(|_| bad())?)),
            "separable" => {
                let v = arg.split(',').map(Factor::from_str).collect::<Result<Vec<_>>>()?;
                if v.is_empty() || v.len() > 3 {
                    return Err(bad());
                }
                Ok(Family::Separable(v))
            }
            _ => Err(bad()),
        }
    }
}

/// Smooth degree-0 symbol `sum_k c_k Psi_hat(|xi|/2^k) (1 + <u, xi/|xi|>/2)` with
/// random unit-scale `c_k` and a random direction `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomBand {
    pub seed: u64,
    coef: Vec<C64>,
    dir: [f64; 6],
}

const RB_K: i32 = 64;

impl RandomBand {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef = (-RB_K..=RB_K)
            .map(|_| C64::from_polar(rng.gen_range(0.5..1.5), rng.gen_range(0.0..2.0 * PI)))
            .collect();
        let mut dir = [0.0; 6];
        for d in dir.iter_mut() {
            *d = rng.gen_range(-0.4..0.4);
        }
        Self { seed, coef, dir }
    }

    fn eval(&self, xi: &[[f64; 2]], dim: usize) -> C64 {
        let mut r2 = 0.0;
        let mut dot = 0.0;
        let mut c = 0;
        for v in xi {
            for &x in &v[..dim] {
                r2 += x * x;
                dot += self.dir[c] * x;
                c += 1;
            }
        }
        if r2 == 0.0 {
            return zero();
        }
        let r = r2.sqrt();
        let g = 1.0 + 0.5 * dot / r;
        let k0 = r.log2().floor() as i32;
        let mut acc = zero();
        for k in k0 - 1..=k0 + 2 {
            let w = psi_hat(r / 2f64.powi(k));
            if w != 0.0 {
                let c = if (-RB_K..=RB_K).contains(&k) { self.coef[(k + RB_K) as usize] } else { C64::new(1.0, 0.0) };
                acc += c * w;
            }
        }
        acc * g
    }
}

/// Window used by [`Symbol::Localized`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalMode {
    /// `Theta_hat(xi / 2^j)`.
    Theta,
    /// `Psi_hat(xi / 2^j)`.
    Psi,
}

/// A symbol evaluated on demand at any point of `(R^dim)^m`.
#[derive(Clone, Debug)]
pub enum Symbol {
    One,
    Mihlin(f64),
    RandomBand(Arc<RandomBand>),
    Separable(Vec<Factor>),
    Tensor(Arc<MultiplierTensor>),
    Localized { inner: Box<Symbol>, mode: LocalMode, j: i32 },
    Vanishing { inner: Box<Symbol>, delta: f64 },
    Sum(Box<Symbol>, Box<Symbol>),
}

impl Symbol {
    pub fn from_family(f: &Family) -> Self {
        match f {
            Family::One => Symbol::One,
            Family::Mihlin(t) => Symbol::Mihlin(*t),
            Family::RandomBand(s) => Symbol::RandomBand(Arc::new(RandomBand::new(*s))),
            Family::Separable(v) => Symbol::Separable(v.clone()),
        }
    }

    pub fn localized(self, mode: LocalMode, j: i32) -> Self {
        Symbol::Localized { inner: Box::new(self), mode, j }
    }

    /// Cuts the symbol off near `xi_1 + .. + xi_m = 0`; `delta >= 4/L`.
    pub fn vanishing(self, delta: f64, spec: &GridSpec) -> Result<Self> {
        check_delta(delta, spec)?;
        Ok(Symbol::Vanishing { inner: Box::new(self), delta })
    }

    /// Arity fixed by the symbol, if any.
    pub fn arity(&self) -> Option<usize> {
        match self {
            Symbol::Separable(v) => Some(v.len()),
            Symbol::Tensor(t) => Some(t.m),
            Symbol::Localized { inner, .. } | Symbol::Vanishing { inner, .. } => inner.arity(),
            Symbol::Sum(a, b) => a.arity().or(b.arity()),
            _ => None,
        }
    }

    /// `sigma(xi_1, .., xi_m)`; only the first `dim` components of each `xi_i` are read.
    pub fn eval(&self, xi: &[[f64; 2]], dim: usize) -> C64 {
        let norm = || xi.iter().map(|v| v[..dim].iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
        match self {
            Symbol::One => C64::new(1.0, 0.0),
            Symbol::Mihlin(tau) => {
                let r = norm();
                if r == 0.0 {
                    zero()
                } else {
                    C64::from_polar(1.0, tau * r.ln())
                }
            }
            Symbol::RandomBand(rb) => rb.eval(xi, dim),
            Symbol::Separable(fs) => {
                let v: f64 = fs
                    .iter()
                    .zip(xi)
                    .map(|(f, x)| f.eval(x[..dim].iter().map(|c| c * c).sum::<f64>().sqrt()))
                    .product();
                C64::new(v, 0.0)
            }
            Symbol::Tensor(t) => t.interpolate(xi),
            Symbol::Localized { inner, mode, j } => {
                let r = norm() / 2f64.powi(*j);
                let w = match mode {
                    LocalMode::Theta => big_theta_hat(r),
                    LocalMode::Psi => psi_hat(r),
                };
                if w == 0.0 {
                    zero()
                } else {
                    inner.eval(xi, dim) * w
                }
            }
            Symbol::Vanishing { inner, delta } => {
                let mut s2 = 0.0;
                for d in 0..dim {
                    let s: f64 = xi.iter().map(|v| v[d]).sum();
                    s2 += s * s;
                }
                let w = vanish_cutoff(s2.sqrt() / delta);
                if w == 0.0 {
                    zero()
                } else {
                    inner.eval(xi, dim) * w
                }
            }
            Symbol::Sum(a, b) => a.eval(xi, dim) + b.eval(xi, dim),
        }
    }

    /// `(delta, factors)` when the symbol is a product of per-slot radial
    /// profiles times an optional output cutoff; such symbols take the
    /// zero-padded product path.
    fn product_form(&self, m: usize) -> Option<(Option<f64>, Vec<Factor>)> {
        match self {
            Symbol::One => Some((None, vec![Factor::One; m])),
            Symbol::Separable(v) => Some((None, v.clone())),
            Symbol::Vanishing { inner, delta } => match inner.product_form(m)? {
                (None, v) => Some((Some(*delta), v)),
                _ => None,
            },
            _ => None,
        }
    }
}

fn check_delta(delta: f64, spec: &GridSpec) -> Result<()> {
    if !(delta >= 4.0 / spec.l()) {
        return Err(Error::InvalidArgument(format!(
            "cutoff radius {delta} below the lattice resolution 4/L = {}",
            4.0 / spec.l()
        )));
    }
    Ok(())
}

/// Sampled symbol on the full m-fold lattice, slot 1 most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierTensor {
    m: usize,
    spec: GridSpec,
    values: Vec<C64>,
    factors: Option<Vec<SpectralFunction>>,
}

impl MultiplierTensor {
    pub fn new(m: usize, spec: GridSpec, values: Vec<C64>) -> Result<Self> {
        check_arity(m)?;
        check_budget(m, &spec)?;
        let want = spec.len().pow(m as u32);
        if values.len() != want {
            return Err(Error::InvalidGrid(format!("expected {want} symbol values, got {}", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { m, spec, values, factors: None })
    }

    /// Product tensor of one spectral profile per slot.
    pub fn from_factors(factors: Vec<SpectralFunction>) -> Result<Self> {
        let m = factors.len();
        check_arity(m)?;
        let spec = *factors[0].spec();
        for f in &factors {
            spec.ensure_same(f.spec())?;
        }
        check_budget(m, &spec)?;
        let len = spec.len();
        let mut values = vec![zero(); len.pow(m as u32)];
        for (flat, v) in values.iter_mut().enumerate() {
            let mut acc = C64::new(1.0, 0.0);
            let mut rest = flat;
            for f in factors.iter().rev() {
                acc *= f.values()[rest % len];
                rest /= len;
            }
            *v = acc;
        }
        Ok(Self { m, spec, values, factors: Some(factors) })
    }

    /// Samples `symbol` on the lattice; separable symbols keep their factors.
    pub fn sample(symbol: &Symbol, spec: GridSpec, m: usize) -> Result<Self> {
        check_arity(m)?;
        if let Some(a) = symbol.arity() {
            if a != m {
                return Err(Error::InvalidArgument(format!("symbol has arity {a}, expected {m}")));
            }
        }
        check_budget(m, &spec)?;
        if let Symbol::Separable(fs) = symbol {
            return Self::from_factors(fs.iter().map(|f| f.sample(spec)).collect::<Result<_>>()?);
        }
        let len = spec.len();
        let dim = spec.dim();
        let values: Vec<C64> = (0..len.pow(m as u32))
            .into_par_iter()
            .map(|flat| {
                let mut xi = [[0.0; 2]; 3];
                let mut rest = flat;
                for s in (0..m).rev() {
                    xi[s] = spec.xi(rest % len);
                    rest /= len;
                }
                symbol.eval(&xi[..m], dim)
            })
            .collect();
        Self::new(m, spec, values)
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn factors(&self) -> Option<&[SpectralFunction]> {
        self.factors.as_deref()
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        let len = self.spec.len();
        self.values[idx.iter().fold(0, |a, &i| a * len + i)]
    }

    /// Multilinear interpolation in the lattice labels; zero outside the lattice.
    pub fn interpolate(&self, xi: &[[f64; 2]]) -> C64 {
        let spec = &self.spec;
        let n = spec.n() as i64;
        let dim = spec.dim();
        let mut lo = Vec::with_capacity(self.m * dim);
        let mut fr = Vec::with_capacity(self.m * dim);
        for v in xi.iter().take(self.m) {
            for &x in &v[..dim] {
                let u = x * spec.l() + (n / 2) as f64;
                let f = u.floor();
                lo.push(f as i64);
                fr.push(u - f);
            }
        }
        let axes = lo.len();
        let mut acc = zero();
        'corner: for mask in 0..(1usize << axes) {
            let mut w = 1.0;
            let mut flat = 0usize;
            for a in 0..axes {
                let up = (mask >> a) & 1 == 1;
                let wa = if up { fr[a] } else { 1.0 - fr[a] };
                if wa == 0.0 {
                    continue 'corner;
                }
                let c = lo[a] + up as i64;
                if c < 0 || c >= n {
                    continue 'corner;
                }
                w *= wa;
                flat = flat * n as usize + c as usize;
            }
            acc += self.values[flat] * w;
        }
        acc
    }

    /// `sigma * Theta_hat(xi/2^j)` or `sigma * Psi_hat(xi/2^j)` on the lattice.
    pub fn localize(&self, part: &AnnularPartition, j: i32, mode: LocalMode) -> Result<Self> {
        self.spec.ensure_same(part.spec())?;
        if part.m() != self.m {
            return Err(Error::InvalidArgument(format!("partition arity {} differs from {}", part.m(), self.m)));
        }
        part.check_j(j)?;
        let s = Symbol::One.localized(mode, j);
        Ok(self.times(&s))
    }

    fn times(&self, s: &Symbol) -> Self {
        let len = self.spec.len();
        let dim = self.spec.dim();
        let m = self.m;
        let spec = self.spec;
        let values = self
            .values
            .par_iter()
            .enumerate()
            .map(|(flat, v)| {
                let mut xi = [[0.0; 2]; 3];
                let mut rest = flat;
                for k in (0..m).rev() {
                    xi[k] = spec.xi(rest % len);
                    rest /= len;
                }
                v * s.eval(&xi[..m], dim)
            })
            .collect();
        Self { m, spec, values, factors: None }
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_binary(w, &self.spec, &self.values, Some(self.m as u64))
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let (spec, values, m) = read_binary(r, true)?;
        Self::new(m as usize, spec, values)
    }
}

/// `sigma` times a smooth cutoff vanishing for `|xi_1 + .. + xi_m| <= delta`
/// and equal to 1 beyond `2 delta`.
pub fn make_vanishing_multiplier(sigma: &MultiplierTensor, delta: f64) -> Result<MultiplierTensor> {
    check_delta(delta, &sigma.spec)?;
    Ok(sigma.times(&Symbol::Vanishing { inner: Box::new(Symbol::One), delta }))
}

/// Spectrum of an m-linear output on the unfolded sum lattice: labels
/// `-mN/2 ..< mN/2` per axis, same normalization as [`forward_transform`].
#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpectrum {
    spec: GridSpec,
    m: usize,
    values: Vec<C64>,
}

impl OutputSpectrum {
    fn zeros(spec: GridSpec, m: usize) -> Self {
        let ext = m * spec.n();
        Self { spec, m, values: vec![zero(); ext.pow(spec.dim() as u32)] }
    }
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn ext(&self) -> usize {
        self.m * self.spec.n()
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    fn slot(&self, lab: [i64; 2]) -> usize {
        let ext = self.ext() as i64;
        let h = ext / 2;
        if self.spec.dim() == 1 {
            (lab[0] + h) as usize
        } else {
            ((lab[0] + h) * ext + lab[1] + h) as usize
        }
    }

    /// Integer label of a flat slot.
    pub fn label(&self, idx: usize) -> [i64; 2] {
        let ext = self.ext();
        let h = (ext / 2) as i64;
        if self.spec.dim() == 1 {
            [idx as i64 - h, 0]
        } else {
            [(idx / ext) as i64 - h, (idx % ext) as i64 - h]
        }
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let [a, b] = self.label(idx);
        ((a * a + b * b) as f64).sqrt() / self.spec.l()
    }

    /// Largest magnitude at radii outside `[lo, hi]`.
    pub fn max_outside(&self, lo: f64, hi: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let r = self.radius(*i);
                r < lo || r > hi
            })
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Largest magnitude at radii `<= r`.
    pub fn max_within(&self, r: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.radius(*i) <= r)
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Aliases onto the N-lattice; the inverse transform of the result is the
    /// output sampled on the grid.
    pub fn fold(&self) -> SpectralFunction {
        let spec = self.spec;
        let n = spec.n() as i64;
        let mut out = vec![zero(); spec.len()];
        for (i, v) in self.values.iter().enumerate() {
            if *v == zero() {
                continue;
            }
            let lab = self.label(i);
            let a = (lab[0] + n / 2).rem_euclid(n) as usize;
            let b = (lab[1] + n / 2).rem_euclid(n) as usize;
            out[spec.join([a, b])] += v;
        }
        SpectralFunction::new(spec, out).expect("finite spectrum")
    }

    pub fn to_grid(&self) -> GridFunction {
        inverse_transform(&self.fold())
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

/// Nonzero entries of a spectrum.
struct Sparse {
    lab: Vec<[i64; 2]>,
    xi: Vec<[f64; 2]>,
    val: Vec<C64>,
}

impl Sparse {
    fn of(s: &SpectralFunction) -> Self {
        let spec = s.spec();
        let mut out = Sparse { lab: Vec::new(), xi: Vec::new(), val: Vec::new() };
        for (i, v) in s.values().iter().enumerate() {
            if *v != zero() {
                out.lab.push(spec.xi_int(i));
                out.xi.push(spec.xi(i));
                out.val.push(*v);
            }
        }
        out
    }
    fn len(&self) -> usize {
        self.val.len()
    }
}

/// Output spectrum by summing `sigma * prod F_i` over the nonzero entries of
/// the input spectra. Exact for any symbol; cost is the product of the
/// support sizes.
pub fn apply_sparse(sigma: &Symbol, spectra: &[SpectralFunction]) -> Result<OutputSpectrum> {
    let m = spectra.len();
    check_arity(m)?;
    if let Some(a) = sigma.arity() {
        if a != m {
            return Err(Error::InvalidArgument(format!("symbol has arity {a}, got {m} inputs")));
        }
    }
    let spec = *spectra[0].spec();
    for s in spectra {
        spec.ensure_same(s.spec())?;
    }
    let dim = spec.dim();
    let sp: Vec<Sparse> = spectra.iter().map(Sparse::of).collect();
    let scale = spec.l().powi(-(((m - 1) * dim) as i32));
    let first = sp[0].len();
    let chunk = first.div_ceil(CHUNKS).max(1);
    let parts: Vec<OutputSpectrum> = (0..first)
        .collect::<Vec<_>>()
        .par_chunks(chunk)
        .map(|rows| {
            let mut out = OutputSpectrum::zeros(spec, m);
            let mut xi = [[0.0; 2]; 3];
            for &a in rows {
                xi[0] = sp[0].xi[a];
                let la = sp[0].lab[a];
                let va = sp[0].val[a];
                if m == 1 {
                    let s = out.slot(la);
                    out.values[s] += sigma.eval(&xi[..1], dim) * va;
                    continue;
                }
                for b in 0..sp[1].len() {
                    xi[1] = sp[1].xi[b];
                    let lb = [la[0] + sp[1].lab[b][0], la[1] + sp[1].lab[b][1]];
                    let vb = va * sp[1].val[b];
                    if m == 2 {
                        let s = out.slot(lb);
                        out.values[s] += sigma.eval(&xi[..2], dim) * vb;
                        continue;
                    }
                    for c in 0..sp[2].len() {
                        xi[2] = sp[2].xi[c];
                        let sig = sigma.eval(&xi[..3], dim);
                        if sig == zero() {
                            continue;
                        }
                        let lc = [lb[0] + sp[2].lab[c][0], lb[1] + sp[2].lab[c][1]];
                        let s = out.slot(lc);
                        out.values[s] += sig * vb * sp[2].val[c];
                    }
                }
            }
            out
        })
        .collect();
    let mut total = OutputSpectrum::zeros(spec, m);
    for p in &parts {
        total.add_assign(p);
    }
    for v in total.values.iter_mut() {
        *v *= scale;
    }
    Ok(total)
}

/// Product path for `c(|xi_1 + .. + xi_m|) prod_i a_i(|xi_i|)`: filter each
/// input, multiply on a 4x finer grid where the product is alias free, then
/// apply the output cutoff.
fn apply_product(delta: Option<f64>, factors: &[Factor], spectra: &[SpectralFunction]) -> Result<OutputSpectrum> {
    let m = spectra.len();
    let spec = *spectra[0].spec();
    let n = spec.n();
    let fine = GridSpec::new(spec.dim(), 4 * n, spec.l())?;
    let embed = |s: &SpectralFunction, f: &Factor| -> Result<GridFunction> {
        let mut out = vec![zero(); fine.len()];
        for (i, v) in s.values().iter().enumerate() {
            let w = f.eval(spec.xi_norm(i));
            if w == 0.0 {
                continue;
            }
            let [a, b] = spec.xi_int(i);
            let fa = (a + 2 * n as i64) as usize;
            let fb = if spec.dim() == 1 { 0 } else { (b + 2 * n as i64) as usize };
            out[fine.join([fa, fb])] = v * w;
        }
        Ok(inverse_transform(&SpectralFunction::new(fine, out)?))
    };
    let mut prod = embed(&spectra[0], &factors[0])?;
    for (s, f) in spectra.iter().zip(factors).skip(1) {
        prod = prod.mul(&embed(s, f)?)?;
    }
    let wide = forward_transform(&prod);
    let mut out = OutputSpectrum::zeros(spec, m);
    let half = (out.ext() / 2) as i64;
    for (i, v) in wide.values().iter().enumerate() {
        let lab = fine.xi_int(i);
        if lab[0].abs() > half || lab[1].abs() > half || lab[0] == half || lab[1] == half {
            continue;
        }
        let w = match delta {
            Some(d) => vanish_cutoff(fine.xi_norm(i) / d),
            None => 1.0,
        };
        let s = out.slot(lab);
        out.values[s] = v * w;
    }
    Ok(out)
}

/// Output spectrum of `T_sigma`, choosing the product path when the symbol
/// allows it.
pub fn output_spectrum(sigma: &Symbol, inputs: &[&GridFunction]) -> Result<OutputSpectrum> {
    let m = inputs.len();
    check_arity(m)?;
    common_spec(inputs)?;
    let spectra: Vec<SpectralFunction> = inputs.iter().map(|f| forward_transform(f)).collect();
    output_spectrum_of(sigma, &spectra)
}

/// Same as [`output_spectrum`] from input spectra; exact zeros are skipped.
pub fn output_spectrum_of(sigma: &Symbol, spectra: &[SpectralFunction]) -> Result<OutputSpectrum> {
    let m = spectra.len();
    match sigma.product_form(m) {
        Some((delta, factors)) if factors.len() == m => apply_product(delta, &factors, spectra),
        _ => apply_sparse(sigma, spectra),
    }
}

/// `T_sigma(f_1, .., f_m)` sampled on the grid.
pub fn apply(sigma: &Symbol, inputs: &[&GridFunction]) -> Result<GridFunction> {
    Ok(output_spectrum(sigma, inputs)?.to_grid())
}

/// Oracle: the full lattice sum at every grid point.
pub fn apply_direct(sigma: &MultiplierTensor, inputs: &[&GridFunction]) -> Result<GridFunction> {
    let m = sigma.m;
    if inputs.len() != m {
        return Err(Error::InvalidArgument(format!("{m}-linear symbol given {} inputs", inputs.len())));
    }
    let spec = common_spec(inputs)?;
    spec.ensure_same(&sigma.spec)?;
    check_budget(m, &spec)?;
    let n = spec.n();
    let len = spec.len();
    let dim = spec.dim();
    let spectra: Vec<SpectralFunction> = inputs.iter().map(|f| forward_transform(f)).collect();
    // e^{2 pi i x_a k / L} per axis
    let table: Vec<C64> = (0..n * n)
        .map(|t| {
            let (a, c) = (t / n, t % n);
            C64::from_polar(1.0, 2.0 * PI * spec.coord(a) * spec.freq(c))
        })
        .collect();
    let phase = |x: [usize; 2], c: usize| -> C64 {
        let [c0, c1] = spec.split(c);
        let mut p = table[x[0] * n + c0];
        if dim == 2 {
            p *= table[x[1] * n + c1];
        }
        p
    };
    let weight = spec.l().powi(-((m * dim) as i32));
    let sig = &sigma.values;
    let values: Vec<C64> = (0..len)
        .into_par_iter()
        .map(|i| {
            let x = spec.split(i);
            let terms: Vec<Vec<C64>> =
                spectra.iter().map(|s| (0..len).map(|c| s.values()[c] * phase(x, c)).collect()).collect();
            let mut acc = zero();
            match m {
                1 => {
                    for c in 0..len {
                        acc += sig[c] * terms[0][c];
                    }
                }
                2 => {
                    for a in 0..len {
                        let row = &sig[a * len..(a + 1) * len];
                        let mut r = zero();
                        for b in 0..len {
                            r += row[b] * terms[1][b];
                        }
                        acc += r * terms[0][a];
                    }
                }
                _ => {
                    for a in 0..len {
                        for b in 0..len {
                            let row = &sig[(a * len + b) * len..(a * len + b + 1) * len];
                            let mut r = zero();
                            for c in 0..len {
                                r += row[c] * terms[2][c];
                            }
                            acc += r * terms[0][a] * terms[1][b];
                        }
                    }
                }
            }
            acc * weight
        })
        .collect();
    GridFunction::new(spec, values)
}

/// Fast path for product symbols: `prod_i T_{sigma_i} f_i` pointwise.
pub fn apply_separable(sigma: &MultiplierTensor, inputs: &[&GridFunction]) -> Result<GridFunction> {
    let factors = sigma.factors.as_ref().ok_or(Error::MissingFactorization)?;
    if inputs.len() != sigma.m {
        return Err(Error::InvalidArgument(format!("{}-linear symbol given {} inputs", sigma.m, inputs.len())));
    }
    let spec = common_spec(inputs)?;
    spec.ensure_same(&sigma.spec)?;
    let mut out: Option<GridFunction> = None;
    for (f, a) in inputs.iter().zip(factors) {
        let mut s = forward_transform(f);
        for (v, w) in s.values_mut().iter_mut().zip(a.values()) {
            *v *= w;
        }
        let g = inverse_transform(&s);
        out = Some(match out {
            None => g,
            Some(o) => o.mul(&g)?,
        });
    }
    Ok(out.expect("at least one factor"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub alpha: [u32; 2],
    pub re: f64,
    pub im: f64,
    /// `|moment| / ||g||_1`.
    pub relative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: f64,
    pub entries: Vec<MomentEntry>,
    pub max_relative: f64,
    /// Largest margin sample relative to the reference sup.
    pub margin: f64,
    pub pass: bool,
}

impl MomentReport {
    /// Largest relative residual per total order.
    pub fn by_order(&self) -> Vec<(u32, f64)> {
        let top = self.entries.iter().map(|e| e.alpha[0] + e.alpha[1]).max().unwrap_or(0);
        (0..=top)
            .map(|o| {
                let r = self
                    .entries
                    .iter()
                    .filter(|e| e.alpha[0] + e.alpha[1] == o)
                    .map(|e| e.relative)
                    .fold(0.0, f64::max);
                (o, r)
            })
            .collect()
    }
}

/// Moments `int x^alpha g` for `|alpha| <= floor(n/p - n)`.
pub fn moment_check(g: &GridFunction, p: f64) -> Result<MomentReport> {
    check_margin(g, MOMENT_MARGIN_TOL)?;
    moment_report(g, p, g)
}

/// Moments of `g` measured against `reference`: residuals relative to
/// `||reference||_1`, margin relative to `sup |reference|`. Used for pieces
/// of a decomposition, with the assembled output as reference. No margin
/// guard; the margin is reported and enters `pass`.
pub fn moment_report(g: &GridFunction, p: f64, reference: &GridFunction) -> Result<MomentReport> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("moment check needs 0 < p <= 1, got {p}")));
    }
    g.spec().ensure_same(reference.spec())?;
    let dim = g.spec().dim();
    let top = crate::atoms::min_order(dim, p);
    let l1 = lp_norm(reference, 1.0)?;
    let sup = reference.max_abs();
    let margin = if sup > 0.0 { margin_ratio(g) * g.max_abs() / sup } else { 0.0 };
    let mut entries = Vec::new();
    for a in crate::atoms::multi_indices(dim, top) {
        let mo = moment(g, &a[..dim]);
        let relative = if l1 > 0.0 { mo.norm() / l1 } else { 0.0 };
        entries.push(MomentEntry { alpha: a, re: mo.re, im: mo.im, relative });
    }
    let max_relative = entries.iter().map(|e| e.relative).fold(0.0, f64::max);
    let pass = max_relative <= MOMENT_TOL && margin <= MOMENT_MARGIN_TOL;
    Ok(MomentReport { p, entries, max_relative, margin, pass })
}
