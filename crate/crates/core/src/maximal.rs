//! Hardy-Littlewood maximal functions over grid-aligned cubes and the
//! shifted dyadic maximal operator.

use std::collections::VecDeque;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_norm_abs, GridFunction, GridSpec};

/// Cube `2^-j (m + [0,1)^dim)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub dim: usize,
    pub j: i32,
    pub m: [i64; 2],
}

impl DyadicCube {
    pub fn new(dim: usize, j: i32, m: [i64; 2]) -> Self {
        let mut m = m;
        if dim == 1 {
            m[1] = 0;
        }
        Self { dim, j, m }
    }

    pub fn side(&self) -> f64 {
        2f64.powi(-self.j)
    }
    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }
    /// Lower-left corner `x_Q`.
    pub fn corner(&self) -> [f64; 2] {
        let s = self.side();
        [self.m[0] as f64 * s, self.m[1] as f64 * s]
    }
    pub fn centre(&self) -> [f64; 2] {
        let s = self.side();
        let c = self.corner();
        [c[0] + s / 2.0, if self.dim == 1 { 0.0 } else { c[1] + s / 2.0 }]
    }
    /// `Q(m') = Q + l(Q) m'`.
    pub fn shifted(&self, by: [i64; 2]) -> Self {
        Self::new(self.dim, self.j, [self.m[0] + by[0], self.m[1] + by[1]])
    }
    /// Half-open membership.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        let s = self.side();
        let c = self.corner();
        (0..self.dim).all(|d| x[d] >= c[d] && x[d] < c[d] + s)
    }
    /// Membership in the concentric dilate with side `factor * l(Q)`.
    pub fn dilate_contains(&self, factor: f64, x: [f64; 2]) -> bool {
        let half = factor * self.side() / 2.0;
        let c = self.centre();
        (0..self.dim).all(|d| (x[d] - c[d]).abs() < half)
    }

    /// Side in samples; errors unless the side is a whole number of cells.
    pub fn samples(&self, spec: &GridSpec) -> Result<usize> {
        let e = -self.j - spec.log2_h();
        if e < 0 {
            return Err(Error::TooCoarse(format!("cube side 2^{} is below the spacing", -self.j)));
        }
        Ok(1usize << e)
    }

    /// Per-axis index ranges covered by the cube.
    pub fn index_ranges(&self, spec: &GridSpec) -> Result<[Range<usize>; 2]> {
        if spec.dim() != self.dim {
            return Err(Error::SpecMismatch("cube dimension differs from grid".into()));
        }
        let s = self.samples(spec)? as i64;
        let half = (spec.n() / 2) as i64;
        let mut out = [0..1, 0..1];
        for d in 0..self.dim {
            let a = self.m[d] * s + half;
            if a < 0 || a + s > spec.n() as i64 {
                return Err(Error::InvalidArgument(format!("cube {self:?} leaves the box")));
            }
            out[d] = a as usize..(a + s) as usize;
        }
        Ok(out)
    }

    /// Flat indices of the cube's samples.
    pub fn indices(&self, spec: &GridSpec) -> Result<Vec<usize>> {
        let [r0, r1] = self.index_ranges(spec)?;
        let mut out = Vec::with_capacity(r0.len() * r1.len());
        for a in r0 {
            for b in r1.clone() {
                out.push(spec.join([a, b]));
            }
        }
        Ok(out)
    }
}

/// `out[x] = max { w[a] : a in [x-s+1, x], 0 <= a < w.len() }` for `x < n`.
fn window_max(w: &[f64], s: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let mut dq: VecDeque<usize> = VecDeque::new();
    for (x, o) in out.iter_mut().enumerate() {
        if x < w.len() {
            while dq.back().is_some_and(|&b| w[b] <= w[x]) {
                dq.pop_back();
            }
            dq.push_back(x);
        }
        while dq.front().is_some_and(|&f| f + s <= x) {
            dq.pop_front();
        }
        *o = dq.front().map_or(0.0, |&f| w[f]);
    }
    out
}

/// Means of `g` over every `s`-wide window inside the box, then for each
/// sample the largest mean over windows containing it.
fn best_window_mean(spec: &GridSpec, g: &[f64], s: usize) -> Vec<f64> {
    let n = spec.n();
    let k = n - s + 1;
    if spec.dim() == 1 {
        let mut pre = vec![0.0; n + 1];
        for i in 0..n {
            pre[i + 1] = pre[i] + g[i];
        }
        let w: Vec<f64> = (0..k).map(|a| (pre[a + s] - pre[a]) / s as f64).collect();
        return window_max(&w, s, n);
    }
    let mut pre = vec![0.0; (n + 1) * (n + 1)];
    for i in 0..n {
        for j in 0..n {
            pre[(i + 1) * (n + 1) + j + 1] =
                g[i * n + j] + pre[i * (n + 1) + j + 1] + pre[(i + 1) * (n + 1) + j] - pre[i * (n + 1) + j];
        }
    }
    let area = (s * s) as f64;
    let at = |i: usize, j: usize| pre[i * (n + 1) + j];
    // max along axis 1 for each window row, then along axis 0
    let mut rows = vec![0.0; k * n];
    for a in 0..k {
        let w: Vec<f64> = (0..k).map(|b| (at(a + s, b + s) - at(a, b + s) - at(a + s, b) + at(a, b)) / area).collect();
        rows[a * n..(a + 1) * n].copy_from_slice(&window_max(&w, s, n));
    }
    let mut out = vec![0.0; n * n];
    for x1 in 0..n {
        let col: Vec<f64> = (0..k).map(|a| rows[a * n + x1]).collect();
        for (x0, v) in window_max(&col, s, n).into_iter().enumerate() {
            out[x0 * n + x1] = v;
        }
    }
    out
}

/// `M_r f = (M |f|^r)^{1/r}`, the sup running over grid-aligned cubes of side
/// `2^k h <= L/2` at every grid position.
pub fn hl_max(f: &GridFunction, r: f64) -> Result<Vec<f64>> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("r must be positive, got {r}")));
    }
    let spec = *f.spec();
    let g: Vec<f64> = f.abs().iter().map(|v| v.powf(r)).collect();
    let mut best = g.clone();
    let mut s = 2;
    while s <= spec.n() / 2 {
        for (b, v) in best.iter_mut().zip(best_window_mean(&spec, &g, s)) {
            *b = b.max(v);
        }
        s *= 2;
    }
    Ok(best.into_iter().map(|v| v.powf(1.0 / r)).collect())
}

/// Sample side lengths of the levels at which shift `m` is admissible:
/// `l(Q) |m_i| < L` on every axis.
pub fn admissible_sides(spec: &GridSpec, m: [i64; 2]) -> Vec<usize> {
    let n = spec.n() as i64;
    let mut out = Vec::new();
    let mut s = 1usize;
    while s <= spec.n() / 2 {
        if (0..spec.dim()).all(|d| s as i64 * m[d].abs() < n) {
            out.push(s);
        }
        s *= 2;
    }
    out
}

/// `sup_{Q dyadic, x in Q} |Q|^-1 int_{Q(m)} |f|`, with `f = 0` off the box.
pub fn shifted_dyadic_max(f: &GridFunction, m: [i64; 2]) -> Result<Vec<f64>> {
    let spec = *f.spec();
    let n = spec.n();
    let m = if spec.dim() == 1 { [m[0], 0] } else { m };
    let sides = admissible_sides(&spec, m);
    if sides.is_empty() {
        return Err(Error::InvalidArgument(format!("shift {m:?} is admissible at no level")));
    }
    let g = f.abs();
    let mut best = vec![0.0f64; spec.len()];
    for s in sides {
        let cells = n / s;
        let cdim = if spec.dim() == 1 { [cells, 1] } else { [cells, cells] };
        let sdim = if spec.dim() == 1 { [s, 1] } else { [s, s] };
        let mut sums = vec![0.0; cdim[0] * cdim[1]];
        for (i, v) in g.iter().enumerate() {
            let [a, b] = spec.split(i);
            sums[(a / sdim[0]) * cdim[1] + b / sdim[1]] += v;
        }
        let vol = (sdim[0] * sdim[1]) as f64;
        for (i, b) in best.iter_mut().enumerate() {
            let [a0, a1] = spec.split(i);
            let c0 = (a0 / sdim[0]) as i64 + m[0];
            let c1 = (a1 / sdim[1]) as i64 + m[1];
            if c0 < 0 || c1 < 0 || c0 >= cdim[0] as i64 || c1 >= cdim[1] as i64 {
                continue;
            }
            *b = b.max(sums[c0 as usize * cdim[1] + c1 as usize] / vol);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub shift_norm: f64,
    pub p: f64,
    pub ratio: f64,
    pub fitted_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub rows: Vec<GrowthRow>,
    /// Smallest `C` with `ratio <= C log(10 + |m|)^{n/p}` on every row.
    pub constant: f64,
}

impl GrowthTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `||M_dyad^m f||_p / ||f||_p`, maximized over the corpus for each shift,
/// against `(log(10 + |m|))^{n/p}`.
pub fn log_growth_check(p: f64, shifts: &[[i64; 2]], corpus: &[GridFunction]) -> Result<GrowthTable> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
    }
    let mut rows = Vec::with_capacity(shifts.len());
    let mut constant = 0.0f64;
    for &m in shifts {
        let mut ratio = 0.0f64;
        let mut dim = 1;
        for f in corpus {
            let spec = f.spec();
            dim = spec.dim();
            let den = lp_norm_abs(spec, &f.abs(), p)?;
            if den == 0.0 {
                continue;
            }
            let num = lp_norm_abs(spec, &shifted_dyadic_max(f, m)?, p)?;
            ratio = ratio.max(num / den);
        }
        let norm = ((m[0] * m[0] + if dim == 2 { m[1] * m[1] } else { 0 }) as f64).sqrt();
        let weight = (10.0 + norm).ln().powf(dim as f64 / p);
        constant = constant.max(ratio / weight);
        rows.push(GrowthRow { shift_norm: norm, p, ratio, fitted_bound: weight });
    }
    for r in rows.iter_mut() {
        r.fitted_bound *= constant;
    }
    Ok(GrowthTable { rows, constant })
}

/// `||f(x - .) <2^j .>^{-t}||_{L^r} / (2^{-j n / r} M_r f(x))` at sample `x`,
/// with `f = 0` off the box.
pub fn peetre_ratio(f: &GridFunction, mr: &[f64], x: usize, j: i32, r: f64, t: f64) -> f64 {
    let spec = f.spec();
    let n = spec.dim() as f64;
    let px = spec.point(x);
    let scale = 2f64.powi(j);
    let mut acc = 0.0;
    for (z, v) in f.values().iter().enumerate() {
        let pz = spec.point(z);
        let d2: f64 = (0..spec.dim()).map(|d| (scale * (px[d] - pz[d])).powi(2)).sum();
        acc += v.norm().powf(r) * (1.0 + d2).powf(-t * r / 2.0);
    }
    let lhs = (acc * spec.cell()).powf(1.0 / r);
    let rhs = 2f64.powf(-(j as f64) * n / r) * mr[x];
    if rhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}
