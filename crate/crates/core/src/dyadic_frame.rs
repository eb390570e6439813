//! phi-transform: coefficients `b_Q = <f, psi~^Q>` over dyadic cubes, the
//! synthesis sums `sum_Q b_Q psi^Q`, and the sequence norms of `f^{p,q}`.
//!
//! Shell `j` is sampled on cubes of side `max(h, 2^{-j-3})`. At that spacing
//! the spectral copies produced by sampling `psi~_j * f` miss the support of
//! `psi_j`, so synthesis after analysis is exact on the lattice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{mixed_norm, GridFunction, GridSpec, C64};
use crate::lp_frame::{Kind, LpFamily};
use crate::maximal::DyadicCube;

/// Which frame: `(psi, psi~)` or `(theta, theta~)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameKind {
    Psi,
    Theta,
}

impl FrameKind {
    pub fn synthesis(self) -> Kind {
        match self {
            FrameKind::Psi => Kind::Psi,
            FrameKind::Theta => Kind::Theta,
        }
    }
    pub fn analysis(self) -> Kind {
        match self {
            FrameKind::Psi => Kind::PsiTilde,
            FrameKind::Theta => Kind::ThetaTilde,
        }
    }
}

/// Level of the cubes carrying shell `j`.
pub fn cube_level(spec: &GridSpec, j: i32) -> Result<i32> {
    let level = (j + 3).min(-spec.log2_h());
    if 2f64.powi(-level) > spec.l() / 4.0 {
        return Err(Error::TooCoarse(format!("cubes for shell {j} exceed a quarter of the box")));
    }
    Ok(level)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coeff {
    /// Shell index.
    pub j: i32,
    pub cube: DyadicCube,
    pub b: C64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoeffSeq {
    pub spec: GridSpec,
    pub kind: FrameKind,
    pub entries: Vec<Coeff>,
}

#[derive(Serialize, Deserialize)]
struct CoeffJson {
    j: i32,
    m: Vec<i64>,
    re: f64,
    im: f64,
}

impl CoeffSeq {
    pub fn empty(spec: GridSpec, kind: FrameKind) -> Self {
        Self { spec, kind, entries: Vec::new() }
    }

    /// Concatenates shells from another sequence on the same grid.
    pub fn extend(&mut self, other: CoeffSeq) -> Result<()> {
        self.spec.ensure_same(&other.spec)?;
        if self.kind != other.kind {
            return Err(Error::InvalidArgument("frames of different kinds".into()));
        }
        self.entries.extend(other.entries);
        Ok(())
    }

    pub fn shells(&self) -> Vec<i32> {
        let mut js: Vec<i32> = self.entries.iter().map(|c| c.j).collect();
        js.sort_unstable();
        js.dedup();
        js
    }

    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<CoeffJson> = self
            .entries
            .iter()
            .map(|c| CoeffJson { j: c.j, m: c.cube.m[..self.spec.dim()].to_vec(), re: c.b.re, im: c.b.im })
            .collect();
        Ok(serde_json::to_string(&rows)?)
    }
}

fn cube_of_sample(spec: &GridSpec, level: i32, s: usize, ix: [usize; 2]) -> DyadicCube {
    let half = (spec.n() / 2) as i64;
    let m0 = (ix[0] as i64 - half).div_euclid(s as i64);
    let m1 = (ix[1] as i64 - half).div_euclid(s as i64);
    DyadicCube::new(spec.dim(), level, [m0, m1])
}

/// `b_Q = <f, psi~^Q> = |Q|^{1/2} (psi~_j * f)(x_Q)` for every level-`j` cube.
pub fn analyze(fam: &LpFamily, f: &GridFunction, j: i32, kind: FrameKind) -> Result<CoeffSeq> {
    fam.check_j(j)?;
    let spec = *fam.spec();
    spec.ensure_same(f.spec())?;
    let level = cube_level(&spec, j)?;
    let g = fam.apply(kind.analysis(), f, j)?;
    let cube0 = DyadicCube::new(spec.dim(), level, [0, 0]);
    let s = cube0.samples(&spec)?;
    let w = cube0.volume().sqrt();
    let n = spec.n();
    let axis1 = if spec.dim() == 1 { 1 } else { n };
    let mut entries = Vec::new();
    for a in (0..n).step_by(s) {
        for b in (0..axis1).step_by(s) {
            let cube = cube_of_sample(&spec, level, s, [a, b]);
            entries.push(Coeff { j, cube, b: g.values()[spec.join([a, b])] * w });
        }
    }
    Ok(CoeffSeq { spec, kind, entries })
}

/// Coefficients of every resolvable shell.
pub fn analyze_all(fam: &LpFamily, f: &GridFunction, kind: FrameKind) -> Result<CoeffSeq> {
    let mut out = CoeffSeq::empty(*fam.spec(), kind);
    for j in fam.shells() {
        out.extend(analyze(fam, f, j, kind)?)?;
    }
    Ok(out)
}

/// `sum_{Q in D_j} b_Q psi^Q` with `psi^Q = |Q|^{1/2} psi_j(. - x_Q)`.
pub fn synthesize(fam: &LpFamily, c: &CoeffSeq, j: i32, kind: FrameKind) -> Result<GridFunction> {
    fam.check_j(j)?;
    let spec = *fam.spec();
    spec.ensure_same(&c.spec)?;
    if c.kind != kind {
        return Err(Error::InvalidArgument("coefficient kind differs from the requested frame".into()));
    }
    let level = cube_level(&spec, j)?;
    // comb of |Q|^{1/2} b_Q / h^dim at the corners, then filter by psi_j
    let mut comb = vec![C64::new(0.0, 0.0); spec.len()];
    for e in c.entries.iter().filter(|e| e.j == j) {
        if e.cube.j != level {
            return Err(Error::InvalidArgument(format!("cube level {} does not carry shell {j}", e.cube.j)));
        }
        let [r0, r1] = e.cube.index_ranges(&spec)?;
        let w = e.cube.volume().sqrt() / spec.cell();
        comb[spec.join([r0.start, r1.start])] += e.b * w;
    }
    let comb = GridFunction::new(spec, comb)?;
    fam.apply(kind.synthesis(), &comb, j)
}

/// `|| g^q(b) ||_{L^p}` with `g^q(b)(x) = || { |b_Q| |Q|^{-1/2} chi_Q(x) } ||_{l^q}`.
pub fn fpq_norm(c: &CoeffSeq, p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    let spec = c.spec;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for j in c.shells() {
        let mut row = vec![0.0; spec.len()];
        for e in c.entries.iter().filter(|e| e.j == j) {
            let v = e.b.norm() / e.cube.volume().sqrt();
            for i in e.cube.indices(&spec)? {
                row[i] += v;
            }
        }
        rows.push(row);
    }
    mixed_norm(&spec, &rows, p, q)
}

/// `|| {A_j f} ||_{L^p(l^q)}` for a filter family `A_j` over every shell.
pub fn filtered_norm(fam: &LpFamily, f: &GridFunction, kind: Kind, p: f64, q: f64) -> Result<f64> {
    let rows: Vec<Vec<f64>> = fam.apply_all(kind, f)?.into_iter().map(|(_, g)| g.abs()).collect();
    mixed_norm(fam.spec(), &rows, p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::inner;
    use crate::surrogates::{Surrogate, SurrogateParams};

    fn setup() -> (LpFamily, GridFunction) {
        let spec = GridSpec::new(1, 512, 64.0).unwrap();
        let fam = LpFamily::build(spec).unwrap();
        let f = Surrogate::generate(&SurrogateParams::for_grid(&spec), 5).unwrap().sample(spec, 1.0).unwrap();
        (fam, f)
    }

    #[test]
    fn reproduces_filters() {
        let (fam, f) = setup();
        for j in fam.shells() {
            for kind in [FrameKind::Psi, FrameKind::Theta] {
                let c = analyze(&fam, &f, j, kind).unwrap();
                let g = synthesize(&fam, &c, j, kind).unwrap();
                let want = fam.apply(kind.synthesis(), &f, j).unwrap();
                let err = g.sub(&want).unwrap().max_abs() / f.max_abs();
                assert!(err < 1e-12, "j = {j}, {kind:?}: {err:e}");
            }
        }
    }

    #[test]
    fn two_dimensional_reproduction() {
        let spec = GridSpec::new(2, 64, 16.0).unwrap();
        let fam = LpFamily::build(spec).unwrap();
        let f = GridFunction::from_real(spec, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp() * x[0]).unwrap();
        for j in fam.shells() {
            let c = analyze(&fam, &f, j, FrameKind::Psi).unwrap();
            let g = synthesize(&fam, &c, j, FrameKind::Psi).unwrap();
            let want = fam.lambda(&f, j).unwrap();
            assert!(g.sub(&want).unwrap().max_abs() < 1e-12 * f.max_abs());
        }
    }

    #[test]
    fn coefficient_is_a_direct_inner_product() {
        let (fam, f) = setup();
        let spec = *fam.spec();
        let j = 0;
        let c = analyze(&fam, &f, j, FrameKind::Psi).unwrap();
        let kernel = fam.kernel(Kind::PsiTilde, j).unwrap();
        for e in c.entries.iter().step_by(7) {
            let [r0, _] = e.cube.index_ranges(&spec).unwrap();
            // psi~^Q: kernel centred at x_Q, scaled by |Q|^{1/2}
            let shift = r0.start as i64 - (spec.n() / 2) as i64;
            let pq = kernel.roll([shift, 0]).scale(C64::new(e.cube.volume().sqrt(), 0.0));
            let want = inner(&f, &pq).unwrap();
            assert!((e.b - want).norm() < 1e-12 * f.max_abs());
        }
    }

    #[test]
    fn translation_permutes_coefficients() {
        let (fam, f) = setup();
        let spec = *fam.spec();
        let j = -1;
        let level = cube_level(&spec, j).unwrap();
        let s = DyadicCube::new(1, level, [0, 0]).samples(&spec).unwrap() as i64;
        let a = analyze(&fam, &f, j, FrameKind::Psi).unwrap();
        let b = analyze(&fam, &f.roll([s, 0]), j, FrameKind::Psi).unwrap();
        let k = a.entries.len();
        for i in 0..k {
            assert!((a.entries[i].b - b.entries[(i + 1) % k].b).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let (fam, _) = setup();
        let z = GridFunction::zeros(*fam.spec());
        let c = analyze(&fam, &z, 0, FrameKind::Theta).unwrap();
        assert!(c.entries.iter().all(|e| e.b == C64::new(0.0, 0.0)));
        assert_eq!(synthesize(&fam, &c, 0, FrameKind::Theta).unwrap().max_abs(), 0.0);
        assert_eq!(fpq_norm(&CoeffSeq::empty(*fam.spec(), FrameKind::Psi), 1.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn single_cube_norm() {
        let spec = GridSpec::new(1, 256, 32.0).unwrap();
        let cube = DyadicCube::new(1, 1, [3, 0]);
        let c = CoeffSeq { spec, kind: FrameKind::Psi, entries: vec![Coeff { j: -2, cube, b: C64::new(1.0, 0.0) }] };
        for p in [0.5, 1.0, 2.0, 4.0] {
            for q in [1.0, 2.0, f64::INFINITY] {
                let want = cube.volume().powf(-0.5) * cube.volume().powf(1.0 / p);
                assert!((fpq_norm(&c, p, q).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn norm_decreases_in_q() {
        let (fam, f) = setup();
        let c = analyze_all(&fam, &f, FrameKind::Psi).unwrap();
        let mut last = f64::INFINITY;
        for q in [0.5, 1.0, 2.0, 4.0, f64::INFINITY] {
            let v = fpq_norm(&c, 1.0, q).unwrap();
            assert!(v <= last * (1.0 + 1e-12));
            last = v;
        }
    }

    #[test]
    fn json_lists_shell_and_position() {
        let (fam, f) = setup();
        let c = analyze(&fam, &f, 0, FrameKind::Psi).unwrap();
        let v: serde_json::Value = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), c.entries.len());
        assert_eq!(v[0]["j"], 0);
        assert!(v[0]["m"].is_array());
    }
}
