use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use triharm::atoms::{default_order, make_atom, Atom};
use triharm::experiments::{moment_experiment, ratio_experiment, ExperimentConfig};
use triharm::grid::{lp_norm, margin_ratio};
use triharm::maximal::DyadicCube;
use triharm::multiplier::sobolev::{ls2_profile, Weight};
use triharm::multiplier::{apply, apply_direct, apply_separable, Family, MultiplierTensor, Symbol};
use triharm::regions::{
    classify, fmt_rational, parse_rational, plan_interpolation, region_threshold, to_f64, verify_plan, ExponentPoint,
};
use triharm::surrogates::{Surrogate, SurrogateParams};
use triharm::{AnnularPartition, Error, GridFunction, GridSpec, Kind, LpFamily};

const EXIT_DOMAIN: u8 = 2;
const EXIT_THRESHOLD: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "triharm", version, about = "Trilinear Fourier multipliers on Hardy spaces: experiments and tools")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Region and regularity threshold of an exponent point.
    Classify(ClassifyArgs),
    /// Interpolation plan reducing a point to base-region endpoints.
    Plan(PlanArgs),
    /// Littlewood-Paley pieces of a sampled function.
    LpDecompose(LpArgs),
    /// Generate and certify an atom.
    AtomMake(AtomMakeArgs),
    /// Re-certify a stored atom.
    AtomCheck(AtomCheckArgs),
    /// Apply a multiplier to sampled inputs.
    MultiplierApply(ApplyArgs),
    /// Scale-invariant Sobolev norm of a symbol.
    Ls2Norm(Ls2Args),
    /// Boundedness ratios over random surrogate triples.
    RatioExperiment(ExperimentArgs),
    /// Vanishing-moment residuals of the output and its localized pieces.
    MomentExperiment(ExperimentArgs),
}

fn point_arg(s: &str) -> Result<String, String> {
    ExponentPoint::parse(s, 1).map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn rational_arg(s: &str) -> Result<String, String> {
    parse_rational(s).map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn triple_arg(s: &str) -> Result<[String; 3], String> {
    let parts: Vec<String> = s.split(',').map(|x| x.trim().to_string()).collect();
    let arr: [String; 3] = parts.try_into().map_err(|_| format!("expected three comma-separated rationals in `{s}`"))?;
    for p in &arr {
        rational_arg(p)?;
    }
    Ok(arr)
}

fn family_arg(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn kind_arg(s: &str) -> Result<Kind, String> {
    match s {
        "psi" => Ok(Kind::Psi),
        "theta" => Ok(Kind::Theta),
        "psi_tilde" => Ok(Kind::PsiTilde),
        "theta_tilde" => Ok(Kind::ThetaTilde),
        _ => Err(format!("unknown filter `{s}`; expected psi, theta, psi_tilde or theta_tilde")),
    }
}

#[derive(Args)]
struct ClassifyArgs {
    /// Reciprocal exponents `1/p1,1/p2,1/p3` as rationals.
    #[arg(long, value_parser = point_arg)]
    t: String,
    /// Dimension.
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Check this regularity against the threshold.
    #[arg(long, value_parser = rational_arg)]
    s: Option<String>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, value_parser = point_arg)]
    t: String,
    #[arg(long, value_parser = rational_arg)]
    s: String,
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Write the plan as JSON to this path (`-` for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long = "grid-n", default_value_t = 512)]
    grid_n: usize,
    #[arg(long = "grid-l", default_value_t = 64.0)]
    grid_l: f64,
}

impl GridArgs {
    fn spec(&self) -> triharm::Result<GridSpec> {
        GridSpec::new(self.dim, self.grid_n, self.grid_l)
    }
}

#[derive(Args)]
struct LpArgs {
    /// Samples in the binary grid format; otherwise a surrogate is drawn.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Surrogate seed when no input is given.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, value_parser = kind_arg, default_value = "psi")]
    kind: Kind,
    /// Directory for one binary file per shell.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AtomMakeArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Cube level `j` (side `2^-j`).
    #[arg(long, allow_hyphen_values = true)]
    cube_j: i32,
    /// Cube position, one integer per axis.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
    cube_m: Vec<i64>,
    #[arg(long, value_parser = rational_arg)]
    p: String,
    /// Moment order; defaults to the smallest admissible order plus two.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples go here, the JSON sidecar next to it with `.json` appended.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AtomCheckArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the input path with `.json` appended.
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Args)]
struct ApplyArgs {
    /// Named symbol family.
    #[arg(long, value_parser = family_arg, conflicts_with = "tensor")]
    symbol: Option<Family>,
    /// Sampled symbol in the binary tensor format.
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Tensor evaluation: direct lattice sum or separable factors.
    #[arg(long, default_value = "direct", requires = "tensor")]
    method: String,
    /// Vanishing cutoff radius for a named symbol.
    #[arg(long)]
    delta: Option<f64>,
    /// Input samples, comma separated.
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<PathBuf>,
    /// Number of surrogate inputs when no files are given.
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Ls2Args {
    #[arg(long, value_parser = family_arg)]
    symbol: Family,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    /// Print the value at every scale.
    #[arg(long)]
    profile: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = triple_arg)]
    exponents: Option<[String; 3]>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, value_parser = family_arg)]
    symbol: Option<Family>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    #[arg(long = "grid-l")]
    grid_l: Option<f64>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    dilations: Option<Vec<f64>>,
    #[arg(long)]
    threads: Option<usize>,
    /// CSV destination; stdout when neither this nor the config names one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

enum Failure {
    Lib(Error),
    Threshold(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type Outcome = Result<(), Failure>;

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Lib(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Lib(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn cmd_classify(a: &ClassifyArgs) -> Outcome {
    let pt = ExponentPoint::parse(&a.t, a.n)?;
    let region = classify(&pt).ok_or_else(|| Error::Unclassifiable(pt.to_string()))?;
    let thr = region_threshold(region, &pt.t);
    if a.json {
        let v = serde_json::json!({
            "t": pt.to_json(),
            "n": a.n,
            "region": region.to_string(),
            "threshold_per_n": fmt_rational(&thr),
        });
        println!("{v:#}");
    } else {
        println!("{region}, threshold s > {}·n", fmt_rational(&thr));
    }
    if let Some(s) = &a.s {
        let s = parse_rational(s)?;
        let need = thr * triharm::regions::Q::from_integer(a.n.into());
        if s <= need {
            return Err(Failure::Threshold(format!(
                "s = {} does not exceed {} for n = {}",
                fmt_rational(&s),
                fmt_rational(&need),
                a.n
            )));
        }
    }
    Ok(())
}

fn cmd_plan(a: &PlanArgs) -> Outcome {
    let pt = ExponentPoint::parse(&a.t, a.n)?;
    let s = parse_rational(&a.s)?;
    let plan = plan_interpolation(&pt, &s)?;
    let v = verify_plan(&plan);
    print!("{}", plan.table());
    println!("verify_plan: {}", v.ok);
    for msg in &v.violations {
        println!("  {msg}");
    }
    match a.json.as_deref() {
        Some(p) if p == Path::new("-") => println!("{:#}", plan.to_json()),
        Some(p) => writeln!(create(p)?, "{:#}", plan.to_json())?,
        None => {}
    }
    if !v.ok {
        return Err(Failure::Lib(Error::Degenerate("plan failed verification".into())));
    }
    Ok(())
}

fn surrogate(spec: GridSpec, seed: u64) -> triharm::Result<GridFunction> {
    Surrogate::generate(&SurrogateParams::for_grid(&spec), seed)?.sample(spec, 1.0)
}

fn cmd_lp(a: &LpArgs) -> Outcome {
    let f = match &a.input {
        Some(p) => GridFunction::read_binary(open(p)?)?,
        None => surrogate(a.grid.spec()?, a.seed)?,
    };
    let fam = LpFamily::build(*f.spec())?;
    if let Some(d) = &a.out_dir {
        std::fs::create_dir_all(d)?;
    }
    println!("{:>4} {:>14}", "j", "l2");
    for (j, g) in fam.apply_all(a.kind, &f)? {
        println!("{j:>4} {:>14.6e}", lp_norm(&g, 2.0)?);
        if let Some(d) = &a.out_dir {
            g.write_binary(create(&d.join(format!("shell_{j}.bin")))?)?;
        }
    }
    Ok(())
}

fn sidecar_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn report_certificate(a: &Atom) -> Outcome {
    let c = a.validate()?;
    println!("support {} size {} (ratio {:.4}) moments {} (max {:.3e}) order {} admissible {}",
        c.support, c.size, c.size_ratio, c.moments, c.max_moment, a.order, c.order_admissible);
    if !c.passed() {
        return Err(Failure::Threshold("atom certification failed".into()));
    }
    Ok(())
}

fn cmd_atom_make(a: &AtomMakeArgs) -> Outcome {
    let spec = a.grid.spec()?;
    let p = to_f64(&parse_rational(&a.p)?);
    let mut m = [0i64; 2];
    for (d, v) in a.cube_m.iter().take(2).enumerate() {
        m[d] = *v;
    }
    if a.cube_m.len() != spec.dim() {
        return Err(Failure::Lib(Error::InvalidArgument(format!(
            "cube position needs {} entries, got {}",
            spec.dim(),
            a.cube_m.len()
        ))));
    }
    let cube = DyadicCube::new(spec.dim(), a.cube_j, m);
    let order = a.order.unwrap_or_else(|| default_order(spec.dim(), p));
    let atom = make_atom(spec, cube, p, order, a.seed)?;
    atom.f.write_binary(create(&a.out)?)?;
    writeln!(create(&sidecar_path(&a.out))?, "{}", atom.sidecar_json()?)?;
    report_certificate(&atom)
}

fn cmd_atom_check(a: &AtomCheckArgs) -> Outcome {
    let f = GridFunction::read_binary(open(&a.input)?)?;
    let side = a.sidecar.clone().unwrap_or_else(|| sidecar_path(&a.input));
    let text = std::fs::read_to_string(&side)?;
    report_certificate(&Atom::from_sidecar(f, &text)?)
}

fn cmd_apply(a: &ApplyArgs) -> Outcome {
    let inputs: Vec<GridFunction> = if a.inputs.is_empty() {
        let spec = a.grid.spec()?;
        (0..a.m as u64).map(|k| surrogate(spec, 3 * a.seed + k)).collect::<triharm::Result<_>>()?
    } else {
        a.inputs.iter().map(|p| Ok(GridFunction::read_binary(open(p)?)?)).collect::<Result<_, Failure>>()?
    };
    let refs: Vec<&GridFunction> = inputs.iter().collect();
    let out = match (&a.symbol, &a.tensor) {
        (_, Some(t)) => {
            let tensor = MultiplierTensor::read_binary(open(t)?)?;
            match a.method.as_str() {
                "direct" => apply_direct(&tensor, &refs)?,
                "separable" => apply_separable(&tensor, &refs)?,
                other => {
                    return Err(Failure::Lib(Error::InvalidArgument(format!(
                        "unknown method `{other}`; expected direct or separable"
                    ))))
                }
            }
        }
        (fam, None) => {
            let mut sym = Symbol::from_family(fam.as_ref().unwrap_or(&Family::One));
            if let Some(d) = a.delta {
                sym = sym.vanishing(d, inputs[0].spec())?;
            }
            apply(&sym, &refs)?
        }
    };
    println!("sup {:.6e} l2 {:.6e} margin {:.3e}", out.max_abs(), lp_norm(&out, 2.0)?, margin_ratio(&out));
    if let Some(p) = &a.out {
        out.write_binary(create(p)?)?;
    }
    Ok(())
}

fn cmd_ls2(a: &Ls2Args) -> Outcome {
    let spec = a.grid.spec()?;
    let part = AnnularPartition::build(spec, a.m)?;
    let mut sym = Symbol::from_family(&a.symbol);
    if let Some(d) = a.delta {
        sym = sym.vanishing(d, &spec)?;
    }
    if !(a.s >= 0.0) {
        return Err(Failure::Lib(Error::InvalidArgument(format!("Sobolev index {} must be nonnegative", a.s))));
    }
    let prof = ls2_profile(&sym, &part, &Weight::Isotropic(a.s))?;
    if a.profile {
        for (k, v) in &prof {
            println!("{k:>4} {v:.10e}");
        }
    }
    println!("{:.10e}", prof.iter().map(|r| r.1).fold(0.0, f64::max));
    Ok(())
}

fn experiment_config(a: &ExperimentArgs, default: ExperimentConfig) -> Result<ExperimentConfig, Failure> {
    let mut c = match &a.config {
        Some(p) => ExperimentConfig::from_toml(&std::fs::read_to_string(p)?)?,
        None => default,
    };
    if let Some(e) = &a.exponents {
        c.exponents = e.clone();
    }
    if let Some(v) = a.s {
        c.s = v;
    }
    if let Some(v) = &a.symbol {
        c.symbol = v.to_string();
    }
    if let Some(v) = a.delta {
        c.delta = v;
    }
    if let Some(v) = a.dim {
        c.grid.dim = v;
    }
    if let Some(v) = a.grid_n {
        c.grid.n = v;
    }
    if let Some(v) = a.grid_l {
        c.grid.l = v;
    }
    if let Some(v) = a.count {
        c.inputs.count = v;
    }
    if let Some(v) = a.seed {
        c.inputs.seed = v;
    }
    if let Some(v) = &a.dilations {
        c.dilations = v.clone();
    }
    if let Some(v) = a.threads {
        c.threads = v;
    }
    if let Some(v) = &a.out {
        c.output.csv = Some(v.display().to_string());
    }
    Ok(c)
}

fn csv_sink(c: &ExperimentConfig) -> Result<Box<dyn Write>, Failure> {
    Ok(match &c.output.csv {
        Some(p) if p != "-" => Box::new(create(Path::new(p))?),
        _ => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_ratio(a: &ExperimentArgs) -> Outcome {
    let c = experiment_config(a, ExperimentConfig::ratio_default())?;
    if a.dump_config {
        print!("{}", c.to_toml()?);
        return Ok(());
    }
    let r = ratio_experiment(&c)?;
    let mut w = csv_sink(&c)?;
    r.write_csv(&mut w)?;
    w.flush()?;
    let s = &r.summary;
    eprintln!(
        "rows {} skipped {} max {:.4e} median {:.4e} max/median {:.3} dilation variation {:.3}",
        s.rows, s.skipped, s.max, s.median, s.max_over_median, s.dilation_variation
    );
    Ok(())
}

fn cmd_moment(a: &ExperimentArgs) -> Outcome {
    let c = experiment_config(a, ExperimentConfig::moment_default())?;
    if a.dump_config {
        print!("{}", c.to_toml()?);
        return Ok(());
    }
    let m = moment_experiment(&c)?;
    let mut w = csv_sink(&c)?;
    m.write_csv(&mut w)?;
    w.flush()?;
    eprintln!("vanishing-modified pass {} unmodified fails order 0 {}", m.vanishing_pass(), m.unmodified_fails());
    if !m.vanishing_pass() {
        return Err(Failure::Threshold("vanishing-modified residuals above tolerance".into()));
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    match &cli.cmd {
        Cmd::Classify(a) => cmd_classify(a),
        Cmd::Plan(a) => cmd_plan(a),
        Cmd::LpDecompose(a) => cmd_lp(a),
        Cmd::AtomMake(a) => cmd_atom_make(a),
        Cmd::AtomCheck(a) => cmd_atom_check(a),
        Cmd::MultiplierApply(a) => cmd_apply(a),
        Cmd::Ls2Norm(a) => cmd_ls2(a),
        Cmd::RatioExperiment(a) => cmd_ratio(a),
        Cmd::MomentExperiment(a) => cmd_moment(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            eprintln!("{}", Cli::command().render_usage());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Threshold(msg)) | Err(Failure::Lib(Error::Threshold(msg))) => {
            eprintln!("threshold violated: {msg}");
            ExitCode::from(EXIT_THRESHOLD)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DOMAIN)
        }
    }
}
