//! Reciprocal-exponent regions `R0..R7`, their regularity thresholds and the
//! interpolation plans that reduce `R0` and `R4..R7` to the base regions
//! `R1..R3`. All arithmetic is exact.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub type Q = BigRational;

/// `a / b` as an exact rational.
pub fn q(a: i64, b: i64) -> Q {
    Q::new(BigInt::from(a), BigInt::from(b))
}

fn half() -> Q {
    q(1, 2)
}

/// Parses `a/b`, an integer, or a terminating decimal such as `0.75`.
pub fn parse_rational(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("malformed rational `{s}`"));
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let whole = if int.is_empty() || int == "-" { BigInt::zero() } else { BigInt::from_str(int).map_err(|_| bad())? };
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let f = Q::new(BigInt::from_str(frac).map_err(|_| bad())?, den);
        let w = Q::from_integer(whole);
        return Ok(if neg { w - f } else { w + f });
    }
    let r = Q::from_str(s).map_err(|_| bad())?;
    Ok(r)
}

/// Renders `p/q`, or the integer when the denominator is 1.
pub fn fmt_rational(r: &Q) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    R0,
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
}

impl Region {
    pub const ALL: [Region; 8] =
        [Region::R0, Region::R1, Region::R2, Region::R3, Region::R4, Region::R5, Region::R6, Region::R7];

    /// Base region `R_{i+1}` for the 0-based slot `i`.
    pub fn base(i: usize) -> Region {
        [Region::R1, Region::R2, Region::R3][i]
    }

    pub fn is_base(self) -> bool {
        matches!(self, Region::R1 | Region::R2 | Region::R3)
    }

    /// For `R4..R6`: the two large slots and the small one.
    fn pair(self) -> Option<(usize, usize, usize)> {
        match self {
            Region::R4 => Some((0, 1, 2)),
            Region::R5 => Some((1, 2, 0)),
            Region::R6 => Some((2, 0, 1)),
            _ => None,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R{}", *self as u8)
    }
}

impl FromStr for Region {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Region::ALL
            .into_iter()
            .find(|r| r.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown region `{s}`")))
    }
}

/// `t = (1/p1, 1/p2, 1/p3)` in dimension `n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExponentPoint {
    pub t: [Q; 3],
    pub n: u32,
}

impl ExponentPoint {
    pub fn new(t: [Q; 3], n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if t.iter().any(|x| x.is_negative()) {
            return Err(Error::InvalidArgument("reciprocal exponents must be nonnegative".into()));
        }
        Ok(Self { t, n })
    }

    /// Parses `a,b,c` where each entry is a rational.
    pub fn parse(s: &str, n: u32) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!("expected three comma-separated entries in `{s}`")));
        }
        let t = [parse_rational(parts[0])?, parse_rational(parts[1])?, parse_rational(parts[2])?];
        Self::new(t, n)
    }

    /// `1/p = t1 + t2 + t3`.
    pub fn inv_p(&self) -> Q {
        &self.t[0] + &self.t[1] + &self.t[2]
    }

    pub fn to_json(&self) -> Value {
        json!(self.t.iter().map(fmt_rational).collect::<Vec<_>>())
    }
}

impl fmt::Display for ExponentPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", fmt_rational(&self.t[0]), fmt_rational(&self.t[1]), fmt_rational(&self.t[2]))
    }
}

/// Membership in one region, read off the set definitions.
pub fn in_region(region: Region, t: &[Q; 3]) -> bool {
    let z = Q::zero();
    let one = Q::one();
    let h = half();
    let all_pos = t.iter().all(|x| x > &z);
    let sum = &t[0] + &t[1] + &t[2];
    match region {
        Region::R0 => {
            all_pos
                && t.iter().all(|x| x < &one)
                && (0..3).all(|i| &t[i] + &t[(i + 1) % 3] < q(3, 2))
                && sum >= one
                && sum < q(2, 1)
        }
        Region::R1 | Region::R2 | Region::R3 => {
            let i = region as usize - 1;
            let others: Vec<&Q> = (0..3).filter(|&j| j != i).map(|j| &t[j]).collect();
            if t[i] < one {
                return false;
            }
            if others.iter().all(|x| x.is_zero()) {
                // the (p, inf, inf) pattern
                return true;
            }
            others.iter().all(|x| *x > &z && *x < &h)
        }
        Region::R4 | Region::R5 | Region::R6 => {
            let (a, b, c) = region.pair().unwrap();
            t[c] > z && t[c] < h && t[a] >= h && t[b] >= h && &t[a] + &t[b] >= q(3, 2)
        }
        Region::R7 => t.iter().all(|x| x >= &h) && sum >= q(2, 1),
    }
}

/// The region containing `t`, if any.
pub fn classify(p: &ExponentPoint) -> Option<Region> {
    Region::ALL.into_iter().find(|&r| in_region(r, &p.t))
}

/// Lower bound on `s/n` from the per-region table.
pub fn region_threshold(region: Region, t: &[Q; 3]) -> Q {
    let h = half();
    match region {
        Region::R0 => q(3, 2),
        Region::R1 | Region::R2 | Region::R3 => &t[region as usize - 1] + h,
        Region::R4 | Region::R5 | Region::R6 => {
            let (a, b, _) = region.pair().unwrap();
            &t[a] + &t[b]
        }
        Region::R7 => &t[0] + &t[1] + &t[2] - h,
    }
}

/// Lower bound on `s/n` from the general condition: `3/2` and
/// `1/p - 1/2 - sum_{j in J}(t_j - 1/2)` over every subset `J`.
pub fn subset_threshold(t: &[Q; 3]) -> Q {
    let h = half();
    let base = &t[0] + &t[1] + &t[2] - &h;
    let mut best = q(3, 2);
    for mask in 0u8..8 {
        let mut v = base.clone();
        for (j, tj) in t.iter().enumerate() {
            if mask & (1 << j) != 0 {
                v -= tj - &h;
            }
        }
        if v > best {
            best = v;
        }
    }
    best
}

/// Strict lower bound on `s` for `t`, cross-checked against the subset form.
pub fn required_regularity(p: &ExponentPoint) -> Result<Q> {
    let region = classify(p).ok_or_else(|| Error::Unclassifiable(p.to_string()))?;
    let a = region_threshold(region, &p.t);
    let b = subset_threshold(&p.t);
    if a != b {
        return Err(Error::Degenerate(format!(
            "{region} threshold {} disagrees with the subset form {} at {p}",
            fmt_rational(&a),
            fmt_rational(&b)
        )));
    }
    Ok(a * Q::from_integer(BigInt::from(p.n)))
}

/// Largest `m / 2^k` in `(lo, hi)` (or `(lo, hi]`) at the coarsest `k` that has one.
pub fn coarsest_dyadic(lo: &Q, hi: &Q, hi_inclusive: bool) -> Q {
    assert!(lo < hi);
    let mut scale = BigInt::one();
    loop {
        let s = Q::from_integer(scale.clone());
        let x = hi * &s;
        let mut m = x.floor().to_integer();
        if !hi_inclusive && x.is_integer() {
            m -= 1;
        }
        let cand = Q::new(m, scale.clone());
        if &cand > lo {
            return cand;
        }
        scale *= 2;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Endpoint {
    pub t: [Q; 3],
    pub region: Region,
    pub weight: Q,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpPlan {
    pub target: ExponentPoint,
    pub region: Region,
    pub s: Q,
    pub endpoints: Vec<Endpoint>,
    /// Named auxiliary parameters of the construction.
    pub aux: Vec<(String, Q)>,
}

impl InterpPlan {
    pub fn to_json(&self) -> Value {
        let endpoints: Vec<Value> = self
            .endpoints
            .iter()
            .map(|e| {
                json!({
                    "t": e.t.iter().map(fmt_rational).collect::<Vec<_>>(),
                    "region": e.region.to_string(),
                    "weight": fmt_rational(&e.weight),
                })
            })
            .collect();
        let aux: serde_json::Map<String, Value> =
            self.aux.iter().map(|(k, v)| (k.clone(), Value::String(fmt_rational(v)))).collect();
        json!({
            "target": self.target.to_json(),
            "n": self.target.n,
            "region": self.region.to_string(),
            "s": fmt_rational(&self.s),
            "endpoints": endpoints,
            "aux": aux,
        })
    }

    /// Plain-text table of endpoints and weights.
    pub fn table(&self) -> String {
        let mut out = format!(
            "target {} in {}, s = {}, n = {}\n",
            self.target,
            self.region,
            fmt_rational(&self.s),
            self.target.n
        );
        out.push_str(&format!("{:<4} {:<36} {:<7} {}\n", "#", "endpoint", "region", "weight"));
        for (i, e) in self.endpoints.iter().enumerate() {
            let pt = format!("({}, {}, {})", fmt_rational(&e.t[0]), fmt_rational(&e.t[1]), fmt_rational(&e.t[2]));
            out.push_str(&format!("{:<4} {:<36} {:<7} {}\n", i + 1, pt, e.region.to_string(), fmt_rational(&e.weight)));
        }
        for (k, v) in &self.aux {
            out.push_str(&format!("{k} = {}\n", fmt_rational(v)));
        }
        out
    }
}

fn endpoint(t: [Q; 3], region: Region, weight: Q) -> Endpoint {
    Endpoint { t, region, weight }
}

/// Builds the convex reduction of `t` to base-region endpoints at regularity `s`.
pub fn plan_interpolation(p: &ExponentPoint, s: &Q) -> Result<InterpPlan> {
    let region = classify(p).ok_or_else(|| Error::Unclassifiable(p.to_string()))?;
    if region.is_base() {
        return Err(Error::BaseRegion(region.to_string()));
    }
    let need = required_regularity(p)?;
    if s <= &need {
        return Err(Error::Threshold(format!(
            "s = {} does not exceed {} required by {region} at {p}",
            fmt_rational(s),
            fmt_rational(&need)
        )));
    }
    let n = Q::from_integer(BigInt::from(p.n));
    let sn = s / &n;
    let thr = region_threshold(region, &p.t);
    // endpoint thresholds may use at most half of the available slack
    let budget = (&sn + &thr) / q(2, 1);
    let (endpoints, aux) = match region {
        Region::R0 => plan_r0(&p.t),
        Region::R4 | Region::R5 | Region::R6 => plan_pair(region, &p.t, &budget),
        Region::R7 => plan_r7(&p.t, &budget),
        _ => unreachable!(),
    };
    let plan = InterpPlan { target: p.clone(), region, s: s.clone(), endpoints, aux };
    let v = verify_plan(&plan);
    if !v.ok {
        return Err(Error::Degenerate(format!("plan failed verification: {}", v.violations.join("; "))));
    }
    Ok(plan)
}

/// Largest `A = 1/(p_tilde - eps)` allowed: threshold `A + 1/2` within `budget`
/// and `A < cap` so the companion exponents stay finite.
fn pick_eps(inv_p_tilde: &Q, budget: &Q, cap: &Q) -> (Q, Q) {
    let p_tilde = inv_p_tilde.recip();
    let a_max = budget - half();
    let eps_thr = &p_tilde - a_max.recip();
    let eps_cap = &p_tilde - cap.recip();
    let eps = if eps_thr < eps_cap {
        coarsest_dyadic(&Q::zero(), &eps_thr, true)
    } else {
        coarsest_dyadic(&Q::zero(), &eps_cap, false)
    };
    let a = (&p_tilde - &eps).recip();
    (eps, a)
}

fn plan_pair(region: Region, t: &[Q; 3], budget: &Q) -> (Vec<Endpoint>, Vec<(String, Q)>) {
    let (a, b, _) = region.pair().unwrap();
    let total = &t[a] + &t[b];
    // 1/p_tilde_1 = 1/p_tilde_2 = t_a + t_b - 1/2
    let inv_pt = &total - half();
    let (eps, big) = pick_eps(&inv_pt, budget, &total);
    let small = &total - &big;
    let mut c1 = t.clone();
    c1[a] = big.clone();
    c1[b] = small.clone();
    let mut c2 = t.clone();
    c2[a] = small.clone();
    c2[b] = big.clone();
    let theta = (&big - &t[a]) / (&big - &small);
    let endpoints = vec![
        endpoint(c1, Region::base(a), Q::one() - &theta),
        endpoint(c2, Region::base(b), theta.clone()),
    ];
    let aux = vec![
        ("1/p_tilde_1".into(), inv_pt.clone()),
        ("1/p_tilde_2".into(), inv_pt),
        ("eps_1".into(), eps.clone()),
        ("eps_2".into(), eps),
        ("1/q_1".into(), small.clone()),
        ("1/q_2".into(), small),
        ("theta".into(), theta),
    ];
    (endpoints, aux)
}

fn plan_r7(t: &[Q; 3], budget: &Q) -> (Vec<Endpoint>, Vec<(String, Q)>) {
    let sum = &t[0] + &t[1] + &t[2];
    let inv_p0 = &sum - Q::one();
    let (eps, big) = pick_eps(&inv_p0, budget, &sum);
    let u = (&sum - &big) / q(2, 1);
    let endpoints = (0..3)
        .map(|i| {
            let mut e = [u.clone(), u.clone(), u.clone()];
            e[i] = big.clone();
            let w = (&t[i] - &u) / (&big - &u);
            endpoint(e, Region::base(i), w)
        })
        .collect();
    let aux = vec![("1/p_0".into(), inv_p0), ("eps".into(), eps), ("1/q".into(), u)];
    (endpoints, aux)
}

fn plan_r0(t: &[Q; 3]) -> (Vec<Endpoint>, Vec<(String, Q)>) {
    let one = Q::one();
    let sum = &t[0] + &t[1] + &t[2];
    if sum == one {
        // p = 1: interpolate the (1, inf, inf) estimates with weights t_i
        let endpoints = (0..3)
            .map(|i| {
                let mut e = [Q::zero(), Q::zero(), Q::zero()];
                e[i] = one.clone();
                endpoint(e, Region::base(i), t[i].clone())
            })
            .collect();
        return (endpoints, vec![]);
    }
    // Vertices are the permutations of (1, x, S - 1 - x). Their hull is
    // {max <= 1, min >= min(x, S - 1 - x)}, so t is interior once
    // S - 1 - x < min t; x = 1/(2 + eps) with eps as large as allowed.
    let rest = &sum - &one;
    let min_t = t.iter().min().unwrap().clone();
    let mid = &rest / q(2, 1);
    let lo_x = std::cmp::max(mid, &rest - &min_t);
    let hi_x = std::cmp::min(half(), rest.clone());
    // eps = 1/x - 2 ranges over (1/hi_x - 2, 1/lo_x - 2)
    let eps_lo = std::cmp::max(hi_x.recip() - q(2, 1), Q::zero());
    let eps_hi = lo_x.recip() - q(2, 1);
    let eps = coarsest_dyadic(&eps_lo, &eps_hi, false);
    let x = (q(2, 1) + &eps).recip();
    let y = &rest - &x;
    let inv_p0 = &sum - q(3, 2);
    let verts: [[Q; 3]; 6] = [
        [one.clone(), y.clone(), x.clone()],
        [one.clone(), x.clone(), y.clone()],
        [x.clone(), one.clone(), y.clone()],
        [y.clone(), one.clone(), x.clone()],
        [y.clone(), x.clone(), one.clone()],
        [x.clone(), y.clone(), one.clone()],
    ];
    let weights = fan_weights(&verts, t);
    let labels = [Region::R1, Region::R1, Region::R2, Region::R2, Region::R3, Region::R3];
    let endpoints = verts.into_iter().zip(weights).zip(labels).map(|((v, w), r)| endpoint(v, r, w)).collect();
    let mut aux = vec![("eps".into(), eps), ("1/p_tilde_0".into(), y)];
    if inv_p0.is_positive() {
        aux.insert(0, ("1/p_0".into(), inv_p0));
    }
    (endpoints, aux)
}

/// Positive weights on a cyclic hexagon reproducing an interior `t`: the
/// barycentric coordinates in the fan triangle (centroid, V_k, V_k+1) that
/// contains `t`, with the centroid share spread evenly.
fn fan_weights(verts: &[[Q; 3]; 6], t: &[Q; 3]) -> Vec<Q> {
    let six = q(6, 1);
    let mut c = [Q::zero(), Q::zero()];
    for v in verts {
        c[0] += &v[0] / &six;
        c[1] += &v[1] / &six;
    }
    let d = [&t[0] - &c[0], &t[1] - &c[1]];
    for k in 0..6 {
        let a = &verts[k];
        let b = &verts[(k + 1) % 6];
        let u = [&a[0] - &c[0], &a[1] - &c[1]];
        let w = [&b[0] - &c[0], &b[1] - &c[1]];
        let det = &u[0] * &w[1] - &u[1] * &w[0];
        if det.is_zero() {
            continue;
        }
        let beta = (&d[0] * &w[1] - &d[1] * &w[0]) / &det;
        let gamma = (&u[0] * &d[1] - &u[1] * &d[0]) / &det;
        if beta.is_negative() || gamma.is_negative() {
            continue;
        }
        let alpha = Q::one() - &beta - &gamma;
        if alpha.is_negative() {
            continue;
        }
        let mut out = vec![&alpha / &six; 6];
        out[k] += beta;
        out[(k + 1) % 6] += gamma;
        return out;
    }
    vec![q(1, 6); 6]
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verification {
    pub ok: bool,
    pub violations: Vec<String>,
}

/// Re-checks every plan invariant from scratch.
pub fn verify_plan(plan: &InterpPlan) -> Verification {
    let mut v = Vec::new();
    let zero = Q::zero();
    let one = Q::one();
    let n = Q::from_integer(BigInt::from(plan.target.n));
    if classify(&plan.target) != Some(plan.region) {
        v.push("target region mismatch".to_string());
    }
    let total: Q = plan.endpoints.iter().map(|e| e.weight.clone()).sum();
    if total != one {
        v.push("weights do not sum to 1".to_string());
    }
    if plan.endpoints.iter().any(|e| e.weight <= zero || e.weight >= one) {
        v.push("weight outside (0, 1)".to_string());
    }
    let mut comb = [Q::zero(), Q::zero(), Q::zero()];
    for e in &plan.endpoints {
        for (c, x) in comb.iter_mut().zip(&e.t) {
            *c += &e.weight * x;
        }
    }
    if comb != plan.target.t {
        v.push("convexity identity violated".to_string());
    }
    let inv_p = plan.target.inv_p();
    for (i, e) in plan.endpoints.iter().enumerate() {
        let pt = ExponentPoint { t: e.t.clone(), n: plan.target.n };
        if !e.region.is_base() || classify(&pt) != Some(e.region) {
            v.push(format!("endpoint region mismatch at endpoint {}", i + 1));
            continue;
        }
        if pt.inv_p() != inv_p {
            v.push(format!("endpoint {} changes 1/p", i + 1));
        }
        let need = region_threshold(e.region, &e.t) * &n;
        if plan.s <= need {
            v.push(format!(
                "endpoint {} threshold violated: s = {} but {} needs s > {}",
                i + 1,
                fmt_rational(&plan.s),
                e.region,
                fmt_rational(&need)
            ));
        }
    }
    Verification { ok: v.is_empty(), violations: v }
}

/// Lossy conversion for reporting.
pub fn to_f64(r: &Q) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
