//! One PASS/FAIL line per acceptance criterion. Runs as a plain binary
//! (`harness = false`) and exits non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triharm::atoms::{cancellation_check, decay_profile_check, default_order, make_atom};
use triharm::dyadic_frame::{analyze, analyze_all, filtered_norm, fpq_norm, synthesize, FrameKind};
use triharm::experiments::{moment_experiment, ratio_experiment, ExperimentConfig};
use triharm::function_spaces::{hardy_equivalence_report, hardy_norm, HardyContext, HardyProfile, Method};
use triharm::grid::{forward_transform, inverse_transform, lp_norm};
use triharm::maximal::{log_growth_check, DyadicCube};
use triharm::multiplier::paraproduct::{high_low_low, paraproduct_decompose, ParaConfig};
use triharm::multiplier::{apply, apply_direct, apply_separable, MultiplierTensor, RandomBand, Symbol};
use triharm::regions::{
    classify, plan_interpolation, q, region_threshold, required_regularity, subset_threshold, verify_plan,
    ExponentPoint, Q,
};
use triharm::surrogates::{band_noise, Surrogate, SurrogateParams};
use triharm::{AnnularPartition, GridFunction, GridSpec, Kind, LpFamily, SpectralFunction, C64};

type Outcome = triharm::Result<(bool, String)>;

fn random_grid(spec: GridSpec, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..spec.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    GridFunction::new(spec, v).unwrap()
}

fn random_spectrum(spec: GridSpec, seed: u64) -> SpectralFunction {
    forward_transform(&random_grid(spec, seed))
}

fn corpus(spec: GridSpec, count: u64, lo: f64, hi: f64) -> triharm::Result<Vec<GridFunction>> {
    let mut p = SurrogateParams::for_grid(&spec);
    p.lo = lo;
    p.hi = hi;
    (0..count).map(|s| Surrogate::generate(&p, 100 + s)?.sample(spec, 1.0)).collect()
}

fn c1_identities() -> Outcome {
    let mut round = 0.0f64;
    for (spec, seed) in [(GridSpec::new(1, 256, 32.0)?, 1), (GridSpec::new(2, 64, 16.0)?, 2)] {
        let f = random_grid(spec, seed);
        round = round.max(inverse_transform(&forward_transform(&f)).rel_diff(&f));
    }
    let spec = GridSpec::new(1, 1024, 64.0)?;
    let fam = LpFamily::build(spec)?;
    let (lo, hi) = (2f64.powi(fam.j_min()), 2f64.powi(fam.j_max()));
    let mut partition = 0.0f64;
    let mut reproduce = 0.0f64;
    for i in 0..spec.len() {
        let r = spec.xi_norm(i);
        if r >= lo && r <= hi {
            let s: f64 = fam.shells().map(|j| LpFamily::profile_at(Kind::Psi, j, r)).sum();
            partition = partition.max((s - 1.0).abs());
        }
        for j in fam.shells() {
            let a = LpFamily::profile_at(Kind::Psi, j, r);
            let b = LpFamily::profile_at(Kind::PsiTilde, j, r);
            reproduce = reproduce.max((a * b - a).abs());
        }
    }
    let ok = round <= 1e-12 && partition <= 1e-12 && reproduce <= 2.0 * f64::EPSILON;
    Ok((ok, format!("round trip {round:.1e}, partition {partition:.1e}, psi = psi * psi~ off by {reproduce:.1e}")))
}

fn c2_oracles() -> Outcome {
    let spec = GridSpec::new(1, 32, 8.0)?;
    let mut sep = 0.0f64;
    for k in 0..20u64 {
        let t = MultiplierTensor::from_factors((0..3).map(|i| random_spectrum(spec, 1000 + 3 * k + i)).collect())?;
        let f: Vec<GridFunction> = (0..3).map(|i| random_grid(spec, 2000 + 3 * k + i)).collect();
        let refs: Vec<&GridFunction> = f.iter().collect();
        sep = sep.max(apply_direct(&t, &refs)?.rel_diff(&apply_separable(&t, &refs)?));
    }
    // the paraproduct needs four shells, which N = 32 does not resolve
    let spec = GridSpec::new(1, 64, 8.0)?;
    let fam = LpFamily::build(spec)?;
    let part = AnnularPartition::build(spec, 3)?;
    let (lo, hi) = fam.band();
    let mut para = 0.0f64;
    for k in 0..20u64 {
        let sym = Symbol::RandomBand(Arc::new(RandomBand::new(k)));
        let f: Vec<GridFunction> =
            (0..3).map(|i| band_noise(spec, lo, hi, 3000 + 3 * k + i)).collect::<triharm::Result<_>>()?;
        let d = paraproduct_decompose(&sym, &part, &fam, [&f[0], &f[1], &f[2]], &ParaConfig::default())?;
        let brute = apply_direct(&MultiplierTensor::sample(&sym, spec, 3)?, &[&f[0], &f[1], &f[2]])?;
        para = para.max(d.total()?.rel_diff(&brute));
    }
    Ok((
        sep <= 1e-8 && para <= 1e-8,
        format!("direct vs separable {sep:.1e} (20 at N=32), paraproduct vs direct {para:.1e} (20 at N=64)"),
    ))
}

fn c3_reconstruction() -> Outcome {
    let spec = GridSpec::new(1, 64, 8.0)?;
    let fam = LpFamily::build(spec)?;
    let part = AnnularPartition::build(spec, 3)?;
    let (lo, hi) = fam.band();
    let mut worst = 0.0f64;
    let mut used = std::collections::BTreeSet::new();
    let symbols = [Symbol::One, Symbol::Mihlin(2.0), Symbol::RandomBand(Arc::new(RandomBand::new(9)))];
    for (n, sym) in symbols.iter().enumerate() {
        let f: Vec<GridFunction> =
            (0..3).map(|i| band_noise(spec, lo, hi, 40 + 3 * n as u64 + i)).collect::<triharm::Result<_>>()?;
        let want = apply(sym, &[&f[0], &f[1], &f[2]])?;
        let d = paraproduct_decompose(sym, &part, &fam, [&f[0], &f[1], &f[2]], &ParaConfig::default())?;
        worst = worst.max(d.total()?.rel_diff(&want));
        for p in std::iter::once(&d.main).chain(&d.residual) {
            for (k, t) in p.t2k.iter().enumerate() {
                if t.max_abs() > 0.0 {
                    used.insert(k);
                }
            }
        }
    }
    Ok((worst <= 1e-8, format!("six-ordering sum vs T {worst:.1e}; nonzero T(2),k for k in {used:?}")))
}

fn c4_localization() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (n, l, gap) in [(256usize, 8.0, 4), (8192, 8.0, 10)] {
        let spec = GridSpec::new(1, n, l)?;
        let fam = LpFamily::build(spec)?;
        // full band, including the origin, so the low-pass inputs are not empty
        let f: Vec<GridFunction> =
            (0..3).map(|i| band_noise(spec, 0.0, spec.nyquist(), 50 + i)).collect::<triharm::Result<_>>()?;
        let symbols = [Symbol::One, Symbol::Mihlin(1.0), Symbol::RandomBand(Arc::new(RandomBand::new(4)))];
        for sym in &symbols {
            for k in fam.shells() {
                let out = high_low_low(sym, &fam, [&f[0], &f[1], &f[2]], k, gap)?;
                if out.values().iter().all(|v| v.norm() == 0.0) {
                    continue;
                }
                worst = worst.max(out.max_outside(2f64.powi(k - 2), 2f64.powi(k + 2)));
                checked += 1;
            }
        }
    }
    Ok((worst == 0.0 && checked > 0, format!("largest coefficient outside the annulus {worst:e} over {checked} pieces")))
}

fn c5_phi_transform() -> Outcome {
    let spec = GridSpec::new(1, 512, 64.0)?;
    let fam = LpFamily::build(spec)?;
    let fs = corpus(spec, 16, 1.0 / 16.0, 2.0)?;
    let mut rec = 0.0f64;
    for f in &fs {
        for j in fam.shells() {
            for kind in [FrameKind::Psi, FrameKind::Theta] {
                let c = analyze(&fam, f, j, kind)?;
                let g = synthesize(&fam, &c, j, kind)?;
                let want = fam.apply(kind.synthesis(), f, j)?;
                rec = rec.max(g.sub(&want)?.max_abs() / f.max_abs());
            }
        }
    }
    let mut spreads = Vec::new();
    for p in [0.8, 1.0, 2.0, 4.0] {
        let mut r = Vec::new();
        for f in &fs {
            let c = analyze_all(&fam, f, FrameKind::Psi)?;
            r.push(fpq_norm(&c, p, 2.0)? / filtered_norm(&fam, f, Kind::Psi, p, 2.0)?);
        }
        let hi = r.iter().cloned().fold(0.0, f64::max);
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        spreads.push((p, hi / lo));
    }
    let worst = spreads.iter().map(|s| s.1).fold(0.0, f64::max);
    let text: Vec<String> = spreads.iter().map(|(p, s)| format!("p={p}: {s:.2}")).collect();
    Ok((rec <= 1e-9 && worst <= 8.0, format!("reproduction {rec:.1e}; f-vs-L(l2) spread {}", text.join(", "))))
}

fn c6_atoms() -> Outcome {
    let mut made = 0;
    let mut certified = 0;
    for (dim, n, l) in [(1usize, 512usize, 32.0), (2, 128, 8.0)] {
        let spec = GridSpec::new(dim, n, l)?;
        for p in [1.0, 0.8, 2.0 / 3.0, 0.5] {
            for (j, m) in [(0, [0, 0]), (-1, [0, -1]), (-2, [-1, 0])] {
                for seed in 0..4 {
                    let a = make_atom(spec, DyadicCube::new(dim, j, m), p, default_order(dim, p), seed)?;
                    made += 1;
                    certified += a.validate()?.passed() as usize;
                }
            }
        }
    }
    let spec = GridSpec::new(1, 512, 32.0)?;
    let fam = LpFamily::build(spec)?;
    let mut spread = 0.0f64;
    for (j, m) in [(0, 0), (-1, 0), (-2, -1)] {
        for seed in 0..3 {
            let a = make_atom(spec, DyadicCube::new(1, j, [m, 0]), 1.0, default_order(1, 1.0), seed)?;
            let r = decay_profile_check(&fam, &a, 2.0)?;
            if !r.max.is_finite() {
                return Ok((false, "non-finite decay ratio".into()));
            }
            spread = spread.max(r.spread);
        }
    }
    let profile = HardyProfile::build(spec)?;
    let a = make_atom(spec, DyadicCube::new(1, -1, [0, 0]), 0.5, default_order(1, 0.5), 7)?;
    let mut consts = Vec::new();
    for eps in [0.0, 0.5, 1.0] {
        consts.push(cancellation_check(&profile, &a, eps)?.constant);
    }
    let finite = consts.iter().all(|c| c.is_finite() && *c > 0.0);
    Ok((
        certified == made && spread <= 1e2 && finite,
        format!("{certified}/{made} certified; decay spread {spread:.1}; C_eps {consts:.3?}"),
    ))
}

fn c7_hardy() -> Outcome {
    let spec = GridSpec::new(1, 512, 64.0)?;
    let ctx = HardyContext::build(spec)?;
    let fs = corpus(spec, 16, 1.0 / 16.0, 2.0)?;
    let mut h2 = (f64::INFINITY, 0.0f64);
    for f in &fs {
        let l2 = lp_norm(f, 2.0)?;
        for m in Method::ALL {
            let r = hardy_norm(f, 2.0, m, &ctx)? / l2;
            h2 = (h2.0.min(r), h2.1.max(r));
        }
    }
    let ps = [0.5, 0.8, 1.0, 2.0, 4.0];
    let rep = hardy_equivalence_report(&fs, &ps, &ctx)?;
    let spread = rep.spread.iter().map(|s| s.1).fold(0.0, f64::max);
    let mut homog = 0.0f64;
    for f in fs.iter().take(4) {
        for m in Method::ALL {
            for p in [0.5, 1.0, 2.0] {
                let a = hardy_norm(f, p, m, &ctx)?;
                let b = hardy_norm(&f.scale(C64::new(3.5, 0.0)), p, m, &ctx)?;
                homog = homog.max((b / (3.5 * a) - 1.0).abs());
            }
        }
    }
    let ok = h2.0 >= 0.25 && h2.1 <= 4.0 && spread <= 16.0 && homog <= 1e-12;
    Ok((ok, format!("H2/L2 in [{:.3}, {:.3}]; method spread {spread:.2}; homogeneity {homog:.1e}", h2.0, h2.1)))
}

fn random_t(rng: &mut ChaCha8Rng) -> [Q; 3] {
    std::array::from_fn(|_| {
        let d = rng.gen_range(1..=24);
        q(rng.gen_range(0..=2 * d), d)
    })
}

fn c8_regions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut samples, mut mismatches) = (0, 0);
    while samples < 10_000 {
        let t = random_t(&mut rng);
        if let Some(r) = classify(&ExponentPoint::new(t.clone(), 1)?) {
            samples += 1;
            mismatches += (region_threshold(r, &t) != subset_threshold(&t)) as usize;
        }
    }
    let (mut plans, mut bad, mut inv_p) = (0, 0, 0);
    while plans < 200 {
        let pt = ExponentPoint::new(random_t(&mut rng), rng.gen_range(1..=3))?;
        match classify(&pt) {
            Some(r) if !r.is_base() => {
                let s = required_regularity(&pt)? + q(rng.gen_range(1..=30), rng.gen_range(1..=30));
                let plan = plan_interpolation(&pt, &s)?;
                plans += 1;
                bad += (!verify_plan(&plan).ok) as usize;
                inv_p += plan.endpoints.iter().filter(|e| &e.t[0] + &e.t[1] + &e.t[2] != pt.inv_p()).count();
            }
            _ => {}
        }
    }
    Ok((
        mismatches == 0 && bad == 0 && inv_p == 0,
        format!("{mismatches} threshold mismatches in {samples}; {bad}/{plans} plans rejected; {inv_p} endpoints move 1/p"),
    ))
}

fn c9_ratio() -> Outcome {
    let mut ok = true;
    let mut text = Vec::new();
    for e in [["1", "4", "4"], ["2/3", "4", "4"]] {
        let mut c = ExperimentConfig::ratio_default();
        c.exponents = e.map(String::from);
        let r = ratio_experiment(&c)?;
        let s = &r.summary;
        let finite = s.skipped == 0 && r.rows.iter().all(|x| x.ratio.is_some_and(f64::is_finite));
        ok &= finite && s.max_over_median <= 1e2 && s.dilation_variation <= 8.0;
        text.push(format!(
            "p=({}): max/median {:.2}, dilation variation {:.2}",
            e.join(","),
            s.max_over_median,
            s.dilation_variation
        ));
    }
    Ok((ok, text.join("; ")))
}

fn c10_moments() -> Outcome {
    let m = moment_experiment(&ExperimentConfig::moment_default())?;
    let worst = m.rows.iter().filter(|r| r.symbol == "vanishing").map(|r| r.max_residual).fold(0.0, f64::max);
    let pinned = 0.40541437666628105;
    let regress = (m.unmodified_order0[2] / pinned - 1.0).abs() < 1e-6;
    Ok((
        m.vanishing_pass() && m.unmodified_fails() && regress,
        format!(
            "vanishing worst residual {worst:.1e} over {} rows; unmodified order 0 = {:.4} (pinned {pinned:.4})",
            m.rows.len(),
            m.unmodified_order0[2]
        ),
    ))
}

fn c11_shifted_max() -> Outcome {
    let spec = GridSpec::new(1, 1024, 128.0)?;
    let mut fs = corpus(spec, 6, 1.0 / 16.0, 2.0)?;
    fs.push(GridFunction::from_real(spec, |x| (-x[0] * x[0]).exp())?);
    fs.push(GridFunction::from_real(spec, |x| if x[0].abs() < 1.0 { 1.0 } else { 0.0 })?);
    let shifts: Vec<[i64; 2]> = [0, 1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64].iter().map(|&k| [k, 0]).collect();
    let mut worst = 0.0f64;
    let mut text = Vec::new();
    for p in [1.5, 2.0, 4.0] {
        let t = log_growth_check(p, &shifts, &fs)?;
        worst = worst.max(t.constant);
        text.push(format!("p={p}: C={:.3}", t.constant));
    }
    Ok((worst <= 10.0, text.join(", ")))
}

fn c12_determinism() -> Outcome {
    let mut out = Vec::new();
    for threads in [1, 8, 8] {
        let mut c = ExperimentConfig::ratio_default();
        c.threads = threads;
        let mut buf = Vec::new();
        ratio_experiment(&c)?.write_csv(&mut buf)?;
        out.push(buf);
    }
    let same = out[0] == out[1] && out[1] == out[2];
    Ok((same, format!("{} bytes; widths 1, 8, 8 identical: {same}", out[0].len())))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("transform and partition identities", c1_identities),
        ("oracle equivalence", c2_oracles),
        ("paraproduct reconstruction", c3_reconstruction),
        ("spectral localization", c4_localization),
        ("phi-transform", c5_phi_transform),
        ("atoms", c6_atoms),
        ("Hardy norms", c7_hardy),
        ("regions and plans", c8_regions),
        ("boundedness probe", c9_ratio),
        ("moment experiment", c10_moments),
        ("shifted maximal growth", c11_shifted_max),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".into()),
        };
        failed += (!ok) as usize;
        println!(
            "criterion {:>2} {} | {name} | {detail} | {:.1}s",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/12 criteria pass", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
