//! Hardy quasi-norm estimators: the smooth maximal function, the
//! Littlewood-Paley square function and the `Gamma_j` sup.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, lp_norm_abs, mixed_pointwise, GridFunction, GridSpec, SpectralFunction};
use crate::lp_frame::{Kind, LpFamily};

/// `exp(-1/(1-|x|^2))` on the unit ball.
pub fn phi_bump(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Dilates `phi_l = 2^{l n} phi(2^l .)` of a compactly supported bump, each
/// normalized to unit Riemann sum.
#[derive(Clone, Debug)]
pub struct HardyProfile {
    spec: GridSpec,
    l_min: i32,
    l_max: i32,
    kernels: Vec<GridFunction>,
    spectra: Vec<SpectralFunction>,
}

impl HardyProfile {
    /// `l` ranges over dilates whose support radius `2^-l` lies in `[2h, L/4]`.
    pub fn build(spec: GridSpec) -> Result<Self> {
        let l_min = -(spec.log2_l() - 2);
        let l_max = -(spec.log2_h() + 1);
        if l_min > l_max {
            return Err(Error::TooCoarse(format!("no resolvable dilate of phi on {spec:?}")));
        }
        let mut kernels = Vec::new();
        for l in l_min..=l_max {
            let s = 2f64.powi(l);
            let mut k = GridFunction::from_real(spec, |x| {
                let r2: f64 = x[..spec.dim()].iter().map(|c| (s * c).powi(2)).sum();
                phi_bump(r2)
            })?;
            let total: f64 = k.values().iter().map(|v| v.re).sum::<f64>() * spec.cell();
            k = k.scale((1.0 / total).into());
            kernels.push(k);
        }
        let spectra = kernels.iter().map(forward_transform).collect();
        Ok(Self { spec, l_min, l_max, kernels, spectra })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn l_range(&self) -> std::ops::RangeInclusive<i32> {
        self.l_min..=self.l_max
    }
    /// Sampled `phi_l`, centred at the origin.
    pub fn kernel(&self, l: i32) -> Result<&GridFunction> {
        if !self.l_range().contains(&l) {
            return Err(Error::InvalidArgument(format!("dilate {l} outside [{}, {}]", self.l_min, self.l_max)));
        }
        Ok(&self.kernels[(l - self.l_min) as usize])
    }

    /// `phi_l * f` for every `l`.
    pub fn convolve_all(&self, f: &GridFunction) -> Result<Vec<GridFunction>> {
        self.spec.ensure_same(f.spec())?;
        let s = forward_transform(f);
        Ok(self
            .spectra
            .iter()
            .map(|k| {
                let mut t = s.clone();
                for (a, b) in t.values_mut().iter_mut().zip(k.values()) {
                    *a *= b;
                }
                inverse_transform(&t)
            })
            .collect())
    }

    /// `sup_l |phi_l * f|`.
    pub fn maximal(&self, f: &GridFunction) -> Result<Vec<f64>> {
        let mut out = vec![0.0f64; self.spec.len()];
        for g in self.convolve_all(f)? {
            for (o, v) in out.iter_mut().zip(g.values()) {
                *o = o.max(v.norm());
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Maximal,
    Square,
    GammaSup,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Maximal, Method::Square, Method::GammaSup];

    pub fn name(self) -> &'static str {
        match self {
            Method::Maximal => "maximal",
            Method::Square => "square",
            Method::GammaSup => "gamma_sup",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// Everything a Hardy norm needs on one grid.
#[derive(Clone, Debug)]
pub struct HardyContext {
    pub fam: LpFamily,
    pub profile: HardyProfile,
}

impl HardyContext {
    pub fn build(spec: GridSpec) -> Result<Self> {
        Ok(Self { fam: LpFamily::build(spec)?, profile: HardyProfile::build(spec)? })
    }
}

/// `||f||_{H^p}` by one of the three characterizations, truncated to the
/// resolvable shells or dilates. The input is assumed to decay inside the
/// box margin.
/// Pointwise values at most this fraction of the maximum count as zero. The
/// FFT leaves an absolute error near `eps * max`, so below `sqrt(eps) * max`
/// fewer than half the digits are significant, and for `p < 1` those points
/// would dominate the sensitivity of the norm.
pub const NOISE_FLOOR: f64 = 1.4901161193847656e-8;

pub fn hardy_norm(f: &GridFunction, p: f64, method: Method, ctx: &HardyContext) -> Result<f64> {
    if !(p > 0.0) || (method == Method::Square && p.is_infinite()) {
        return Err(Error::InvalidArgument(format!("p = {p} not allowed for {}", method.name())));
    }
    let spec = ctx.fam.spec();
    spec.ensure_same(f.spec())?;
    let mut v = match method {
        Method::Maximal => ctx.profile.maximal(f)?,
        Method::Square => {
            let rows: Vec<Vec<f64>> = ctx.fam.apply_all(Kind::Psi, f)?.into_iter().map(|(_, g)| g.abs()).collect();
            mixed_pointwise(spec, &rows, 2.0)?
        }
        Method::GammaSup => {
            let rows: Vec<Vec<f64>> = ctx.fam.apply_all(Kind::Theta, f)?.into_iter().map(|(_, g)| g.abs()).collect();
            mixed_pointwise(spec, &rows, f64::INFINITY)?
        }
    };
    let floor = NOISE_FLOOR * v.iter().copied().fold(0.0, f64::max);
    for a in v.iter_mut() {
        if *a <= floor {
            *a = 0.0;
        }
    }
    lp_norm_abs(spec, &v, p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyRow {
    pub function_id: usize,
    pub p: f64,
    pub method: Method,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardyReport {
    pub rows: Vec<HardyRow>,
    /// `(p, spread)`: over method pairs, the largest max/min of the
    /// per-function ratio.
    pub spread: Vec<(f64, f64)>,
}

impl HardyReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn value(&self, function_id: usize, p: f64, method: Method) -> Option<f64> {
        self.rows.iter().find(|r| r.function_id == function_id && r.p == p && r.method == method).map(|r| r.value)
    }
}

/// All three characterizations on every corpus element for each `p`.
pub fn hardy_equivalence_report(corpus: &[GridFunction], ps: &[f64], ctx: &HardyContext) -> Result<HardyReport> {
    let mut rows = Vec::new();
    let mut spread = Vec::new();
    for &p in ps {
        let mut vals: Vec<[f64; 3]> = Vec::new();
        for (id, f) in corpus.iter().enumerate() {
            let mut v = [0.0; 3];
            for (k, m) in Method::ALL.into_iter().enumerate() {
                v[k] = hardy_norm(f, p, m, ctx)?;
                rows.push(HardyRow { function_id: id, p, method: m, value: v[k] });
            }
            vals.push(v);
        }
        let mut worst = 1.0f64;
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let ratios: Vec<f64> = vals.iter().filter(|v| v[a] > 0.0 && v[b] > 0.0).map(|v| v[a] / v[b]).collect();
            if ratios.is_empty() {
                continue;
            }
            let hi = ratios.iter().cloned().fold(0.0, f64::max);
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            worst = worst.max(hi / lo);
        }
        spread.push((p, worst));
    }
    Ok(HardyReport { rows, spread })
}
