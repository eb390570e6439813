//! Littlewood-Paley family: the low-pass cutoff `theta`, the annular pieces
//! `psi_j`, their tilde companions, and the m-fold annular partition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_transform, inverse_transform, GridFunction, GridSpec, SpectralFunction, C64};

/// Fewest shells a grid must resolve.
pub const MIN_SHELLS: i32 = 4;

/// `exp(-1/t)` for `t > 0`, else 0.
pub fn bump_s(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Radial low-pass profile: 1 on `r <= 1`, 0 on `r >= 2`, smooth between.
pub fn theta_hat(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        // S(2-r) / (S(2-r) + S(r-1)) written to avoid underflow
        1.0 / (1.0 + (1.0 / (2.0 - r) - 1.0 / (r - 1.0)).exp())
    }
}

/// `theta_hat(r) - theta_hat(2r)`, supported in `[1/2, 2]`.
pub fn psi_hat(r: f64) -> f64 {
    theta_hat(r) - theta_hat(2.0 * r)
}

/// Closed form of `sum_{k=-2}^{2} psi_hat(2^k r)`.
pub fn big_theta_hat(r: f64) -> f64 {
    theta_hat(r / 4.0) - theta_hat(8.0 * r)
}

/// Which member of the family a filter uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Theta,
    Psi,
    ThetaTilde,
    PsiTilde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LpFamily {
    spec: GridSpec,
    j_min: i32,
    j_max: i32,
}

/// Resolvable shell range `[j_min, j_max]` for a grid.
pub fn shell_range(spec: &GridSpec) -> (i32, i32) {
    // L = 2^a and N/(2L) = 2^(K-1-a) are exact powers of two
    let j_min = -spec.log2_l() + 1;
    let j_max = spec.log2_n() as i32 - 1 - spec.log2_l() - 1;
    (j_min, j_max)
}

impl LpFamily {
    pub fn build(spec: GridSpec) -> Result<Self> {
        let (j_min, j_max) = shell_range(&spec);
        if j_max - j_min + 1 < MIN_SHELLS {
            return Err(Error::TooCoarse(format!(
                "shells [{j_min}, {j_max}] resolve fewer than {MIN_SHELLS}"
            )));
        }
        Ok(Self { spec, j_min, j_max })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn j_min(&self) -> i32 {
        self.j_min
    }
    pub fn j_max(&self) -> i32 {
        self.j_max
    }
    pub fn shells(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    pub fn check_j(&self, j: i32) -> Result<()> {
        if j < self.j_min || j > self.j_max {
            return Err(Error::ShellOutOfRange { j, min: self.j_min, max: self.j_max });
        }
        Ok(())
    }

    /// Radial profile of `kind` at shell `j`, evaluated at `|xi| = r`.
    pub fn profile_at(kind: Kind, j: i32, r: f64) -> f64 {
        let s = |i: i32| r / 2f64.powi(i);
        match kind {
            Kind::Theta => theta_hat(s(j)),
            Kind::Psi => psi_hat(s(j)),
            Kind::ThetaTilde => theta_hat(s(j + 1)),
            Kind::PsiTilde => psi_hat(s(j - 1)) + psi_hat(s(j)) + psi_hat(s(j + 1)),
        }
    }

    /// Profile sampled on the lattice.
    pub fn profile(&self, kind: Kind, j: i32) -> Result<SpectralFunction> {
        self.check_j(j)?;
        let spec = self.spec;
        let values = (0..spec.len()).map(|i| C64::new(Self::profile_at(kind, j, spec.xi_norm(i)), 0.0)).collect();
        SpectralFunction::new(spec, values)
    }

    /// Physical kernel of the filter, centred at the origin.
    pub fn kernel(&self, kind: Kind, j: i32) -> Result<GridFunction> {
        Ok(inverse_transform(&self.profile(kind, j)?))
    }

    pub fn apply(&self, kind: Kind, f: &GridFunction, j: i32) -> Result<GridFunction> {
        self.check_j(j)?;
        self.spec.ensure_same(f.spec())?;
        Ok(f.multiply_radial(|r| Self::profile_at(kind, j, r)))
    }

    /// `Gamma_j f = theta_j * f`.
    pub fn gamma(&self, f: &GridFunction, j: i32) -> Result<GridFunction> {
        self.apply(Kind::Theta, f, j)
    }
    /// `Lambda_j f = psi_j * f`.
    pub fn lambda(&self, f: &GridFunction, j: i32) -> Result<GridFunction> {
        self.apply(Kind::Psi, f, j)
    }
    pub fn tilde_gamma(&self, f: &GridFunction, j: i32) -> Result<GridFunction> {
        self.apply(Kind::ThetaTilde, f, j)
    }
    pub fn tilde_lambda(&self, f: &GridFunction, j: i32) -> Result<GridFunction> {
        self.apply(Kind::PsiTilde, f, j)
    }

    /// `(j, filtered)` for every shell, sharing one forward transform.
    pub fn apply_all(&self, kind: Kind, f: &GridFunction) -> Result<Vec<(i32, GridFunction)>> {
        self.spec.ensure_same(f.spec())?;
        let s = forward_transform(f);
        Ok(self
            .shells()
            .map(|j| {
                let mut t = s.clone();
                for (i, v) in t.values_mut().iter_mut().enumerate() {
                    *v *= Self::profile_at(kind, j, self.spec.xi_norm(i));
                }
                (j, inverse_transform(&t))
            })
            .collect())
    }

    /// Lower and upper radius of the annulus where the shells sum to one.
    pub fn band(&self) -> (f64, f64) {
        (2f64.powi(self.j_min), 2f64.powi(self.j_max))
    }

    /// Rejects inputs with spectral mass outside the resolvable annulus.
    pub fn check_band(&self, f: &GridFunction, rel_tol: f64) -> Result<()> {
        self.spec.ensure_same(f.spec())?;
        let s = forward_transform(f);
        let peak = s.max_abs();
        let (lo, hi) = self.band();
        for (i, v) in s.values().iter().enumerate() {
            let r = self.spec.xi_norm(i);
            if (r < lo || r > hi) && v.norm() > rel_tol * peak {
                return Err(Error::BandViolation(format!(
                    "spectral magnitude {:e} at |xi| = {r} outside [{lo}, {hi}]",
                    v.norm() / peak.max(f64::MIN_POSITIVE)
                )));
            }
        }
        Ok(())
    }
}

/// Radial partition of the m-fold frequency space `(R^dim)^m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnnularPartition {
    spec: GridSpec,
    m: usize,
    j_min: i32,
    j_max: i32,
}

impl AnnularPartition {
    pub fn build(spec: GridSpec, m: usize) -> Result<Self> {
        if !(1..=3).contains(&m) {
            return Err(Error::InvalidArgument(format!("m must be 1, 2 or 3, got {m}")));
        }
        let (j_min, j_max) = shell_range(&spec);
        Ok(Self { spec, m, j_min, j_max })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn shells(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min..=self.j_max
    }
    pub fn check_j(&self, j: i32) -> Result<()> {
        if j < self.j_min || j > self.j_max {
            return Err(Error::ShellOutOfRange { j, min: self.j_min, max: self.j_max });
        }
        Ok(())
    }

    /// `Psi_hat` as a function of `|xi_vec|`.
    pub fn psi(&self, r: f64) -> f64 {
        psi_hat(r)
    }
    /// `Theta_hat` as a function of `|xi_vec|`.
    pub fn theta(&self, r: f64) -> f64 {
        big_theta_hat(r)
    }
}
