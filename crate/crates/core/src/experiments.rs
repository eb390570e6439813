//! Batch experiments: boundedness ratios over random surrogate triples and
//! vanishing-moment residuals of the output and of its localized pieces.
//!
//! Items are independent; they run on a rayon pool of configurable width and
//! are collected in input order, so reports do not depend on the width.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_spaces::{hardy_norm, HardyContext, Method};
use crate::grid::{inverse_transform, GridSpec, SpectralFunction};
use crate::lp_frame::{AnnularPartition, LpFamily};
use crate::multiplier::sobolev::ls2_norm;
use crate::multiplier::{moment_report, output_spectrum_of, Family, LocalMode, Symbol, MOMENT_MARGIN_TOL, MOMENT_TOL};
use crate::regions::{fmt_rational, parse_rational, required_regularity, to_f64, ExponentPoint, Q};
use crate::surrogates::{Surrogate, SurrogateParams};

/// First line of every CSV the experiments write.
pub const SCHEMA_LINE: &str = "# schema=1";

/// Environment variable capping the pool width.
pub const THREADS_ENV: &str = "TRIHARM_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub l: f64,
}

/// Surrogate inputs. Triple `k` uses seeds `3 (seed + k) + i` for slot `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub lo: f64,
    pub hi: f64,
    pub packets: usize,
    pub seed: u64,
    pub count: usize,
    /// Smallest dilation the spatial decay must survive.
    pub t_min: f64,
    /// Slots replaced by the zero function.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_slots: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `p_1, p_2, p_3` as exact rationals, e.g. `"2/3"`.
    pub exponents: [String; 3],
    /// Sobolev index of the symbol norm.
    pub s: f64,
    /// Symbol family, e.g. `"one"`, `"mihlin(2)"`, `"random_band(7)"`.
    pub symbol: String,
    /// Radius of the spectral cutoff applied to the output.
    pub delta: f64,
    /// Input dilations `x -> f(t x)` of the ratio experiment.
    pub dilations: Vec<f64>,
    /// Pool width; 0 means all cores. Capped by `TRIHARM_THREADS`.
    pub threads: usize,
    pub grid: GridConfig,
    pub inputs: InputConfig,
    #[serde(default, skip_serializing_if = "OutputConfig::is_empty")]
    pub output: OutputConfig,
}

impl OutputConfig {
    fn is_empty(&self) -> bool {
        self.csv.is_none()
    }
}

impl ExperimentConfig {
    pub fn ratio_default() -> Self {
        Self {
            exponents: ["1".into(), "4".into(), "4".into()],
            s: 2.5,
            symbol: "one".into(),
            delta: 0.5,
            dilations: vec![0.5, 1.0, 2.0],
            threads: 0,
            grid: GridConfig { dim: 1, n: 4096, l: 256.0 },
            inputs: InputConfig { lo: 0.25, hi: 1.0, packets: 4, seed: 0, count: 16, t_min: 0.5, zero_slots: vec![] },
            output: OutputConfig::default(),
        }
    }

    pub fn moment_default() -> Self {
        Self {
            exponents: ["2/3".into(), "4".into(), "4".into()],
            dilations: vec![1.0],
            grid: GridConfig { dim: 1, n: 1024, l: 256.0 },
            inputs: InputConfig { t_min: 1.0, ..Self::ratio_default().inputs },
            ..Self::ratio_default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dim, self.grid.n, self.grid.l)
    }

    pub fn exponents_exact(&self) -> Result<[Q; 3]> {
        let mut out: [Q; 3] = Default::default();
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            let q = parse_rational(e)?;
            if q <= Q::default() {
                return Err(Error::InvalidArgument(format!("exponent {e} must be positive")));
            }
            *o = q;
        }
        Ok(out)
    }

    /// `p_i` and `p` with `1/p = sum 1/p_i`.
    pub fn exponents_f64(&self) -> Result<([f64; 3], f64)> {
        let q = self.exponents_exact()?;
        let inv: Q = q.iter().map(|x| x.recip()).sum();
        Ok((q.clone().map(|x| to_f64(&x)), to_f64(&inv.recip())))
    }

    /// `s` must exceed the sharp threshold of the exponent point.
    pub fn check_threshold(&self) -> Result<()> {
        let t = self.exponents_exact()?.map(|x| x.recip());
        let pt = ExponentPoint::new(t, self.grid.dim as u32)?;
        let need = required_regularity(&pt)?;
        if self.s <= to_f64(&need) {
            return Err(Error::Threshold(format!("s = {} does not exceed {} at {pt}", self.s, fmt_rational(&need))));
        }
        Ok(())
    }

    pub fn family(&self) -> Result<Family> {
        self.symbol.parse()
    }

    /// The unmodified symbol.
    pub fn base_symbol(&self) -> Result<Symbol> {
        let sym = Symbol::from_family(&self.family()?);
        if let Some(a) = sym.arity() {
            if a != 3 {
                return Err(Error::InvalidArgument(format!("symbol arity {a}, expected 3")));
            }
        }
        Ok(sym)
    }

    pub fn surrogate_params(&self) -> Result<SurrogateParams> {
        let spec = self.spec()?;
        let mut p = SurrogateParams::for_grid(&spec);
        p.lo = self.inputs.lo;
        p.hi = self.inputs.hi;
        p.packets = self.inputs.packets;
        p.t_min = self.inputs.t_min;
        Ok(p)
    }

    /// Pool width: the configured width (0 = all cores), capped by `TRIHARM_THREADS`.
    pub fn thread_count(&self) -> usize {
        let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let mut k = if self.threads == 0 { cores } else { self.threads };
        if let Some(cap) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            if cap > 0 {
                k = k.min(cap);
            }
        }
        k.max(1)
    }

    /// Checks every module precondition that does not need a full run.
    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        self.exponents_exact()?;
        if !(self.s >= 0.0) {
            return Err(Error::InvalidArgument(format!("Sobolev index {} must be nonnegative", self.s)));
        }
        self.base_symbol()?.vanishing(self.delta, &spec)?;
        LpFamily::build(spec)?;
        if self.inputs.count == 0 {
            return Err(Error::InvalidArgument("input count must be positive".into()));
        }
        if let Some(s) = self.inputs.zero_slots.iter().find(|&&s| s >= 3) {
            return Err(Error::InvalidArgument(format!("zero slot {s} out of range")));
        }
        if self.dilations.is_empty() {
            return Err(Error::InvalidArgument("no dilations".into()));
        }
        if let Some(t) = self.dilations.iter().find(|&&t| !(t >= self.inputs.t_min)) {
            return Err(Error::InvalidArgument(format!("dilation {t} below t_min = {}", self.inputs.t_min)));
        }
        let nyq = spec.nyquist();
        let top = self.inputs.hi * self.dilations.iter().cloned().fold(0.0, f64::max);
        if 3.0 * top >= 2.0 * nyq {
            return Err(Error::TooCoarse(format!("output band up to {} exceeds the lattice period {}", 3.0 * top, 2.0 * nyq)));
        }
        Surrogate::generate(&self.surrogate_params()?, 0)?;
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.thread_count())
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
    }

    fn triple(&self, params: &SurrogateParams, spec: GridSpec, k: usize, t: f64) -> Result<[SpectralFunction; 3]> {
        let seed = self.inputs.seed + k as u64;
        let mut out = Vec::with_capacity(3);
        for i in 0..3 {
            if self.inputs.zero_slots.contains(&i) {
                out.push(SpectralFunction::zeros(spec));
            } else {
                out.push(Surrogate::generate(params, 3 * seed + i as u64)?.spectrum(spec, t)?);
            }
        }
        Ok(out.try_into().expect("three slots"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub seed: u64,
    pub dilation: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when the row is skipped.
    pub ratio: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub rows: usize,
    pub skipped: usize,
    pub max: f64,
    pub median: f64,
    pub max_over_median: f64,
    /// Largest over smallest per-dilation maximum.
    pub dilation_variation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub p: f64,
    pub ls2: f64,
    pub rows: Vec<RatioRow>,
    pub summary: RatioSummary,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn summarize(rows: &[RatioRow], dilations: &[f64]) -> RatioSummary {
    let mut r: Vec<f64> = rows.iter().filter_map(|x| x.ratio).collect();
    r.sort_by(f64::total_cmp);
    let max = r.last().copied().unwrap_or(f64::NAN);
    let med = median(&r);
    let per: Vec<f64> = dilations
        .iter()
        .filter_map(|t| rows.iter().filter(|x| x.dilation == *t).filter_map(|x| x.ratio).reduce(f64::max))
        .collect();
    let hi = per.iter().cloned().fold(f64::NAN, f64::max);
    let lo = per.iter().cloned().fold(f64::NAN, f64::min);
    RatioSummary {
        rows: rows.len(),
        skipped: rows.len() - r.len(),
        max,
        median: med,
        max_over_median: max / med,
        dilation_variation: hi / lo,
    }
}

/// Boundedness ratio
/// `||T(f_1, f_2, f_3)||_{H^p} / (L_s^2[sigma] prod ||f_i||_{H^{p_i}})`, with the
/// maximal characterization for `p_i <= 1` and the square function otherwise.
pub fn ratio_experiment(cfg: &ExperimentConfig) -> Result<RatioReport> {
    cfg.validate()?;
    cfg.check_threshold()?;
    let spec = cfg.spec()?;
    // Hardy norms convolve the samples, so the output must be resolved, not just unaliased at zero
    let top = 3.0 * cfg.inputs.hi * cfg.dilations.iter().cloned().fold(0.0, f64::max);
    if top > spec.nyquist() {
        return Err(Error::TooCoarse(format!("output band up to {top} exceeds the Nyquist frequency {}", spec.nyquist())));
    }
    let (ps, p) = cfg.exponents_f64()?;
    let sigma = cfg.base_symbol()?.vanishing(cfg.delta, &spec)?;
    let ctx = HardyContext::build(spec)?;
    let params = cfg.surrogate_params()?;
    let pool = cfg.pool()?;
    let ls2 = pool.install(|| ls2_norm(&sigma, &AnnularPartition::build(spec, 3)?, cfg.s))?;
    let tasks: Vec<(f64, usize)> =
        cfg.dilations.iter().flat_map(|&t| (0..cfg.inputs.count).map(move |k| (t, k))).collect();
    let rows = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(t, k)| {
                let spectra = cfg.triple(&params, spec, k, t)?;
                let out = output_spectrum_of(&sigma, &spectra)?.to_grid();
                let numerator = hardy_norm(&out, p, Method::Maximal, &ctx)?;
                let mut denominator = ls2;
                for (s, &pi) in spectra.iter().zip(&ps) {
                    let method = if pi <= 1.0 { Method::Maximal } else { Method::Square };
                    denominator *= hardy_norm(&inverse_transform(s), pi, method, &ctx)?;
                }
                let (ratio, note) = if denominator > 0.0 {
                    (Some(numerator / denominator), String::new())
                } else {
                    (None, "zero denominator".to_string())
                };
                Ok(RatioRow { seed: cfg.inputs.seed + k as u64, dilation: t, numerator, denominator, ratio, note })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = summarize(&rows, &cfg.dilations);
    Ok(RatioReport { p, ls2, rows, summary })
}

/// Shortest round-trip scientific form.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn csv_err(e: csv::IntoInnerError<csv::Writer<Vec<u8>>>) -> Error {
    Error::Io(e.into_error())
}

impl RatioReport {
    /// Schema line, one row per item, summary as trailing comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SCHEMA_LINE}")?;
        let mut c = csv::Writer::from_writer(Vec::new());
        c.write_record(["seed", "dilation", "numerator", "denominator", "ratio", "note"])?;
        for r in &self.rows {
            c.write_record([
                r.seed.to_string(),
                num(r.dilation),
                num(r.numerator),
                num(r.denominator),
                r.ratio.map(num).unwrap_or_default(),
                r.note.clone(),
            ])?;
        }
        w.write_all(&c.into_inner().map_err(csv_err)?)?;
        let s = &self.summary;
        writeln!(w, "# p={} ls2={}", num(self.p), num(self.ls2))?;
        writeln!(w, "# rows={} skipped={}", s.rows, s.skipped)?;
        writeln!(w, "# max={} median={} max_over_median={}", num(s.max), num(s.median), num(s.max_over_median))?;
        writeln!(w, "# dilation_variation={}", num(s.dilation_variation))?;
        Ok(())
    }
}

/// One aggregated line: the largest residual of one order over all triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    /// `vanishing` or `unmodified`.
    pub symbol: String,
    /// `None` for the full output, `Some(j)` for the piece of `sigma_j`.
    pub piece: Option<i32>,
    pub order: u32,
    pub max_residual: f64,
    pub max_margin: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentExperiment {
    pub p: f64,
    pub rows: Vec<MomentRow>,
    /// Order-0 residual of the unmodified symbol, per triple.
    pub unmodified_order0: Vec<f64>,
}

impl MomentExperiment {
    /// Every row of the vanishing-modified symbol passes.
    pub fn vanishing_pass(&self) -> bool {
        self.rows.iter().filter(|r| r.symbol == "vanishing").all(|r| r.pass)
    }

    /// Some triple gives the unmodified symbol an order-0 residual above tolerance.
    pub fn unmodified_fails(&self) -> bool {
        self.unmodified_order0.iter().any(|r| *r > MOMENT_TOL)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SCHEMA_LINE}")?;
        let mut c = csv::Writer::from_writer(Vec::new());
        c.write_record(["symbol", "piece", "order", "max_residual", "max_margin", "pass"])?;
        for r in &self.rows {
            c.write_record([
                r.symbol.clone(),
                r.piece.map(|j| j.to_string()).unwrap_or_else(|| "all".into()),
                r.order.to_string(),
                num(r.max_residual),
                num(r.max_margin),
                r.pass.to_string(),
            ])?;
        }
        w.write_all(&c.into_inner().map_err(csv_err)?)?;
        writeln!(w, "# p={} tol={} margin_tol={}", num(self.p), num(MOMENT_TOL), num(MOMENT_MARGIN_TOL))?;
        writeln!(w, "# vanishing_pass={} unmodified_fails={}", self.vanishing_pass(), self.unmodified_fails())?;
        Ok(())
    }
}

struct TripleMoments {
    /// `(symbol, piece, [(order, residual)], margin)`.
    items: Vec<(&'static str, Option<i32>, Vec<(u32, f64)>, f64)>,
    order0: f64,
}

/// Moment residuals of `T_sigma` and of every `T_{sigma_j}` for the
/// vanishing-modified symbol, and of the unmodified symbol's output. Pieces
/// are measured against the assembled output they sum to.
pub fn moment_experiment(cfg: &ExperimentConfig) -> Result<MomentExperiment> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let (_, p) = cfg.exponents_f64()?;
    let base = cfg.base_symbol()?;
    let sigma = base.clone().vanishing(cfg.delta, &spec)?;
    let fam = LpFamily::build(spec)?;
    let params = cfg.surrogate_params()?;
    let per = cfg.pool()?.install(|| {
        (0..cfg.inputs.count)
            .into_par_iter()
            .map(|k| {
                let spectra = cfg.triple(&params, spec, k, 1.0)?;
                let full = output_spectrum_of(&sigma, &spectra)?.to_grid();
                let mut items = Vec::new();
                let r = moment_report(&full, p, &full)?;
                items.push(("vanishing", None, r.by_order(), r.margin));
                for j in fam.shells() {
                    let piece = output_spectrum_of(&sigma.clone().localized(LocalMode::Theta, j), &spectra)?.to_grid();
                    let r = moment_report(&piece, p, &full)?;
                    items.push(("vanishing", Some(j), r.by_order(), r.margin));
                }
                let raw = output_spectrum_of(&base, &spectra)?.to_grid();
                let r = moment_report(&raw, p, &raw)?;
                let order0 = r.by_order()[0].1;
                items.push(("unmodified", None, r.by_order(), r.margin));
                Ok(TripleMoments { items, order0 })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows: Vec<MomentRow> = Vec::new();
    for t in &per {
        for (i, (symbol, piece, orders, margin)) in t.items.iter().enumerate() {
            for (o, (order, res)) in orders.iter().enumerate() {
                let idx = i * orders.len() + o;
                if rows.len() <= idx {
                    rows.push(MomentRow {
                        symbol: symbol.to_string(),
                        piece: *piece,
                        order: *order,
                        max_residual: 0.0,
                        max_margin: 0.0,
                        pass: true,
                    });
                }
                let row = &mut rows[idx];
                row.max_residual = row.max_residual.max(*res);
                row.max_margin = row.max_margin.max(*margin);
            }
        }
    }
    for r in rows.iter_mut() {
        r.pass = r.max_residual <= MOMENT_TOL && r.max_margin <= MOMENT_MARGIN_TOL;
    }
    Ok(MomentExperiment { p, rows, unmodified_order0: per.iter().map(|t| t.order0).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        for mut c in [ExperimentConfig::ratio_default(), ExperimentConfig::moment_default()] {
            let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(back, c);
            c.inputs.zero_slots = vec![1];
            c.output.csv = Some("out.csv".into());
            c.s = 0.1 + 0.2;
            let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(back, c);
        }
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn defaults_validate() {
        ExperimentConfig::ratio_default().validate().unwrap();
        ExperimentConfig::moment_default().validate().unwrap();
        ExperimentConfig::ratio_default().check_threshold().unwrap();
        let mut c = ExperimentConfig::ratio_default();
        c.s = 0.5;
        assert!(matches!(c.check_threshold(), Err(Error::Threshold(_))));
        c.exponents[0] = "-1".into();
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::ratio_default();
        c.dilations = vec![0.25];
        assert!(c.validate().is_err());
        c.dilations = vec![8.0];
        assert!(matches!(c.validate(), Err(Error::TooCoarse(_))));
    }

    #[test]
    fn exponent_arithmetic_is_exact() {
        let c = ExperimentConfig::moment_default();
        let (ps, p) = c.exponents_f64().unwrap();
        assert_eq!(ps, [2.0 / 3.0, 4.0, 4.0]);
        assert_eq!(p, 0.5);
    }

    #[test]
    fn median_and_summary() {
        assert_eq!(median(&[1.0, 2.0, 4.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 4.0, 8.0]), 3.0);
        let row = |t: f64, r: Option<f64>| RatioRow {
            seed: 0,
            dilation: t,
            numerator: 0.0,
            denominator: 0.0,
            ratio: r,
            note: String::new(),
        };
        let s = summarize(&[row(1.0, Some(1.0)), row(1.0, None), row(2.0, Some(4.0)), row(2.0, Some(2.0))], &[1.0, 2.0]);
        assert_eq!((s.rows, s.skipped, s.max, s.median), (4, 1, 4.0, 2.0));
        assert_eq!(s.dilation_variation, 4.0);
    }
}
