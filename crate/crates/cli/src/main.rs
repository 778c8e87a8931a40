//! `ovfree`: command-line front end for the ovfree engine.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use ovfree::alg::{self, Inclusion, LinearMap, C64};
use ovfree::convolve::{self, ArraySpec};
use ovfree::io::{self, Document};
use ovfree::random::{self, ThetaKind};
use ovfree::scalar::{self, PowerSeries, ScalarDist, ScalarPair};
use ovfree::subordination::{self, FixedPointConfig, SuiteSpec};
use ovfree::transforms::{b_series, cr_series, m_series, r_series};
use ovfree::verify::{self, Suite, VerifyOptions};
use ovfree::{guard, DistPair, Error, Family, Kind, OVDistribution, OperatorModel};

#[derive(Parser, Debug)]
#[command(name = "ovfree", version, about = "Operator-valued free, Boolean and c-free convolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convolve two distributions (or pairs), or take an n-fold power of one.
    Convolve {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n_fold: Option<usize>,
        inputs: Vec<PathBuf>,
    },
    /// Transform series of a distribution or pair.
    Transform {
        /// m, b, r or cr
        #[arg(long)]
        kind: String,
        input: PathBuf,
    },
    /// Bercovici-Pata image of a distribution, pair or scalar distribution.
    Bp { input: PathBuf },
    /// Triangular-array limit harness.
    Limits {
        /// clt, cfree-clt or point-mass
        #[arg(long, default_value = "clt")]
        array: String,
        #[arg(long, default_value_t = 6)]
        order: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 256)]
        n_max: usize,
    },
    /// Subordination fixed points and the identity suite on a grid `b = iy·1`.
    Subordinate {
        /// Model files; the second is the free partner (defaults to the first).
        models: Vec<PathBuf>,
        /// Built-in model used when no file is given: rademacher or semicircle-d2.
        #[arg(long, default_value = "rademacher")]
        builtin: String,
        #[arg(long, default_value_t = 2)]
        n_fold: usize,
        #[arg(long, default_value_t = 6)]
        order: usize,
        /// Comma-separated list of y values; chosen automatically when omitted.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Scalar multiplicative layer.
    Scalar {
        /// t, ct, mult-free, mult-cfree, bp or homomorphism
        #[arg(long)]
        op: String,
        inputs: Vec<PathBuf>,
    },
    /// Run invariant suites (CSV of residuals) or the acceptance criteria.
    Verify {
        /// all, oracle, linearization, bp, subordination, half-plane, nc, positivity, scalar,
        /// limits or acceptance
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
    /// Emit a built-in distribution or operator model as JSON.
    Standard {
        /// rademacher, semicircle, arcsine, free-poisson, point-mass, or for --model:
        /// rademacher, semicircle-d2, random
        #[arg(long)]
        family: String,
        #[arg(long, default_value_t = 6)]
        order: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Rate for free-poisson, location for point-mass.
        #[arg(long, default_value_t = 1.0)]
        param: f64,
        /// Emit an operator model instead of moment data.
        #[arg(long)]
        model: bool,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
    },
}

enum Output {
    Json(Value),
    Csv(String),
    /// Text plus whether every check passed.
    Report(String, bool),
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                Error::Parse(_) | Error::Usage(_) | Error::Dimension(_) | Error::Type(_) => 2,
                Error::Resource(_) => 4,
                _ => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::Usage(msg.into()))
}

fn read_doc(path: &Path) -> CliResult<Document> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(io::parse_document(&text, &path.display().to_string())?)
}

fn read_scalar(path: &Path) -> CliResult<ScalarDist> {
    match read_doc(path)? {
        Document::Scalar(d) => Ok(d),
        _ => Err(usage(format!("{} is not a scalar distribution", path.display()))),
    }
}

fn read_model(path: &Path) -> CliResult<OperatorModel> {
    match read_doc(path)? {
        Document::Model(m) => Ok(m),
        _ => Err(usage(format!("{} is not an operator model", path.display()))),
    }
}

/// Distribution inputs promoted to diagonal pairs when mixed with pairs.
enum Operand {
    Single(OVDistribution),
    Pair(DistPair),
}

fn read_operand(path: &Path) -> CliResult<Operand> {
    match read_doc(path)? {
        Document::Distribution(d) => Ok(Operand::Single(d)),
        Document::Pair(p) => Ok(Operand::Pair(p)),
        _ => Err(usage(format!("{} is neither a distribution nor a pair", path.display()))),
    }
}

fn as_pair(o: Operand) -> CliResult<DistPair> {
    match o {
        Operand::Single(d) => Ok(DistPair::diagonal(&d)?),
        Operand::Pair(p) => Ok(p),
    }
}

fn convolve_cmd(kind: &str, n_fold: Option<usize>, inputs: &[PathBuf]) -> CliResult<Output> {
    let kind: Kind = kind.parse()?;
    match (inputs, n_fold) {
        ([a], Some(n)) => {
            if n == 0 {
                return Err(usage("--n-fold must be positive"));
            }
            let t = n as f64;
            Ok(Output::Json(match (read_operand(a)?, kind) {
                (Operand::Single(d), Kind::Free | Kind::Boolean) => {
                    io::dist_to_json(&convolve::power(kind, &d, t)?)
                }
                (o, _) => io::pair_to_json(&convolve::pair_power(kind, &as_pair(o)?, t)?),
            }))
        }
        ([a, b], None) => {
            let (x, y) = (read_operand(a)?, read_operand(b)?);
            Ok(Output::Json(match (x, y, kind) {
                (Operand::Single(x), Operand::Single(y), Kind::Free | Kind::Boolean) => {
                    io::dist_to_json(&convolve::convolve(kind, &x, &y)?)
                }
                (x, y, _) => io::pair_to_json(&convolve::convolve_pairs(kind, &as_pair(x)?, &as_pair(y)?)?),
            }))
        }
        _ => Err(usage("convolve takes two inputs, or one input with --n-fold")),
    }
}

fn transform_cmd(kind: &str, input: &Path) -> CliResult<Output> {
    let doc = read_doc(input)?;
    let name = kind.to_ascii_lowercase();
    let series = match (name.as_str(), &doc) {
        ("m", Document::Distribution(d)) => m_series(d),
        ("b", Document::Distribution(d)) => b_series(d)?,
        ("r", Document::Distribution(d)) => r_series(d)?,
        ("cr", Document::Pair(p)) => cr_series(p)?,
        ("m" | "b" | "r", Document::Pair(_)) => {
            return Err(usage("pass a single distribution for m, b and r transforms"))
        }
        ("cr", _) => return Err(usage("the cr transform needs a pair file")),
        _ => return Err(usage(format!("unknown transform '{kind}'; expected m, b, r or cr"))),
    };
    Ok(Output::Json(io::series_to_json(&series, Some(&name))))
}

fn bp_cmd(input: &Path) -> CliResult<Output> {
    Ok(Output::Json(match read_doc(input)? {
        Document::Distribution(d) => io::dist_to_json(&convolve::bp_map(&d)?),
        Document::Pair(p) => io::pair_to_json(&convolve::bp_map_pair(&p)?),
        Document::Scalar(s) => io::scalar_to_json(&scalar::bp(&s)?),
        _ => return Err(usage("bp needs a distribution, pair or scalar distribution")),
    }))
}

fn limits_cmd(array: &str, order: usize, dim: usize, n_max: usize, format: Format) -> CliResult<Output> {
    let spec = match array {
        "clt" => ArraySpec::clt(dim, order, n_max)?,
        "cfree-clt" => ArraySpec::cfree_clt(dim, order, n_max)?,
        "point-mass" => {
            let beta = alg::from_real(dim, &(0..dim * dim).map(|i| if i % (dim + 1) == 0 { 0.5 } else { 0.0 }).collect::<Vec<_>>());
            ArraySpec::point_mass(&beta, order, n_max)?
        }
        _ => return Err(usage(format!("unknown array '{array}'; expected clt, cfree-clt or point-mass"))),
    };
    let rep = convolve::limit_harness(&spec)?;
    Ok(match format {
        Format::Csv => Output::Csv(rep.to_csv()),
        Format::Json => Output::Json(json!({
            "name": rep.name,
            "boolean_limit": io::pair_to_json(&rep.boolean_limit),
            "free_limit": io::pair_to_json(&rep.free_limit),
            "bp_limit_residual": io::round_sig(rep.bp_limit_residual),
            "extrapolation_drift": io::round_sig(rep.extrapolation_drift),
            "condition4_residual": io::round_sig(rep.condition4_residual),
            "limit_cp_min_eigenvalue": io::round_sig(rep.limit_cp.min_eigenvalue),
            "scoreboard": {
                "boolean_converges": rep.scoreboard.boolean_converges,
                "free_converges": rep.scoreboard.free_converges,
                "free_limit_is_bp_of_boolean": rep.scoreboard.free_limit_is_bp_of_boolean,
                "scaled_moments_converge": rep.scoreboard.scaled_moments_converge,
            },
        })),
    })
}

fn builtin_model(name: &str, dim: usize, seed: u64) -> CliResult<OperatorModel> {
    Ok(match name {
        "rademacher" => OperatorModel::rademacher(dim)?,
        "semicircle-d2" => OperatorModel::semicircle_d2()?,
        "random" => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            random::random_model(&mut rng, dim, ThetaKind::Amplified)?
        }
        _ => {
            return Err(usage(format!(
                "unknown model '{name}'; expected rademacher, semicircle-d2 or random"
            )))
        }
    })
}

fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|y| *y > 0.0 && y.is_finite())
                .ok_or_else(|| CliError::Core(Error::Parse(format!("--grid: '{t}' is not a positive number"))))
        })
        .collect()
}

struct SubordinateArgs<'a> {
    models: &'a [PathBuf],
    builtin: &'a str,
    n_fold: usize,
    order: usize,
    grid: Option<&'a str>,
    tol: f64,
}

fn subordinate_cmd(a: SubordinateArgs, format: Format) -> CliResult<Output> {
    let (x, y) = match a.models {
        [] => {
            let m = builtin_model(a.builtin, 1, verify::DEFAULT_SEED)?;
            (m.clone(), m)
        }
        [p] => {
            let m = read_model(p)?;
            (m.clone(), m)
        }
        [p, q] => (read_model(p)?, read_model(q)?),
        _ => return Err(usage("subordinate takes at most two model files")),
    };
    let ys = match a.grid {
        Some(g) => parse_grid(g)?,
        None => {
            let bound = (a.n_fold as f64 * x.x_norm()).max(x.x_norm() + y.x_norm());
            let y0 = subordination::auto_grid(bound, x.d_b(), a.order, 1.0);
            vec![y0, 1.5 * y0, 2.0 * y0]
        }
    };
    let cfg = FixedPointConfig {
        tol: a.tol,
        ..FixedPointConfig::default()
    };
    let report = subordination::verify_subordination_suite(&SuiteSpec {
        x: &x,
        y: &y,
        grid: subordination::imaginary_grid(&ys, x.d_b()),
        order: a.order,
        n_fold: a.n_fold,
        cfg,
    })?;
    Ok(match format {
        Format::Csv => Output::Csv(report.to_csv()),
        Format::Json => Output::Json(json!({
            "order": report.order,
            "pass": report.pass(),
            "rows": report.rows.iter().map(|r| {
                let mut obj = serde_json::Map::new();
                obj.insert("b".into(), io::mat_to_json(&r.b));
                obj.insert("omega_residual".into(), json!(io::round_sig(r.residual)));
                obj.insert("iterations".into(), json!(r.iterations));
                obj.insert("min_eig_im_gap".into(), json!(io::round_sig(r.min_im_gap)));
                for (name, c) in r.checks() {
                    obj.insert(name.into(), json!({
                        "residual": io::round_sig(c.residual),
                        "bound": io::round_sig(c.bound),
                    }));
                }
                Value::Object(obj)
            }).collect::<Vec<_>>(),
        })),
    })
}

fn power_series_json(kind: &str, s: &PowerSeries) -> Value {
    let coeffs: Vec<Value> = s
        .coeffs()
        .iter()
        .map(|z| json!([io::round_sig(z.re), io::round_sig(z.im)]))
        .collect();
    json!({ "kind": kind, "coeffs": coeffs })
}

fn scalar_pair_json(p: &ScalarPair) -> Value {
    json!({ "mu": io::scalar_to_json(&p.mu), "nu": io::scalar_to_json(&p.nu) })
}

fn scalar_cmd(op: &str, inputs: &[PathBuf]) -> CliResult<Output> {
    let ds = inputs.iter().map(|p| read_scalar(p)).collect::<CliResult<Vec<_>>>()?;
    let pair = |i: usize| -> CliResult<ScalarPair> { Ok(ScalarPair::new(ds[i].clone(), ds[i + 1].clone())?) };
    let need = |n: usize| -> CliResult<()> {
        if ds.len() == n {
            Ok(())
        } else {
            Err(usage(format!("scalar --op {op} takes {n} input file(s), got {}", ds.len())))
        }
    };
    Ok(Output::Json(match op {
        "t" => {
            need(1)?;
            power_series_json("T", &scalar::t_transform(&ds[0])?)
        }
        "ct" => {
            need(2)?;
            power_series_json("cT", &scalar::ct_transform(&pair(0)?)?)
        }
        "mult-free" => {
            need(2)?;
            io::scalar_to_json(&scalar::mult_free(&ds[0], &ds[1])?)
        }
        "mult-cfree" => {
            need(4)?;
            scalar_pair_json(&scalar::mult_cfree(&pair(0)?, &pair(2)?)?)
        }
        "bp" => match ds.len() {
            1 => io::scalar_to_json(&scalar::bp(&ds[0])?),
            2 => scalar_pair_json(&scalar::bp_pair(&pair(0)?)?),
            n => return Err(usage(format!("scalar --op bp takes 1 or 2 inputs, got {n}"))),
        },
        "homomorphism" => {
            need(4)?;
            let r = scalar::verify_bp_homomorphism(&pair(0)?, &pair(2)?)?;
            json!({
                "shift_residual": io::round_sig(r.shift_residual),
                "t_shift_residual": io::round_sig(r.t_shift_residual),
                "homomorphism_residual": io::round_sig(r.homomorphism_residual),
            })
        }
        _ => {
            return Err(usage(format!(
                "unknown scalar op '{op}'; expected t, ct, mult-free, mult-cfree, bp or homomorphism"
            )))
        }
    }))
}

fn verify_cmd(suite: &str, opts: VerifyOptions) -> CliResult<Output> {
    if suite == "acceptance" {
        let mut text = format!("seed {}\n", opts.seed);
        let mut ok = true;
        for id in verify::CRITERIA {
            let c = verify::criterion(id, opts.seed)?;
            ok &= c.pass;
            text.push_str(&format!("{c}\n"));
        }
        return Ok(Output::Report(text, ok));
    }
    let suite: Suite = suite.parse()?;
    let rows = verify::run_suite(suite, &opts)?;
    let ok = rows.iter().all(|r| r.pass());
    eprintln!("seed {}", opts.seed);
    Ok(Output::Report(verify::rows_to_csv(&rows), ok))
}

fn standard_cmd(family: &str, order: usize, dim: usize, param: f64, model: bool, seed: u64) -> CliResult<Output> {
    if model {
        return Ok(Output::Json(io::model_to_json(&builtin_model(family, dim, seed)?)));
    }
    let fam = match family {
        "rademacher" => Family::Rademacher,
        "semicircle" => Family::OvSemicircle(LinearMap::identity(dim)),
        "arcsine" => Family::ScalarArcsine,
        "free-poisson" => Family::ScalarFreePoisson(param),
        "point-mass" => Family::PointMass(alg::scalar(dim, C64::new(param, 0.0))),
        _ => {
            return Err(usage(format!(
                "unknown family '{family}'; expected rademacher, semicircle, arcsine, free-poisson or point-mass"
            )))
        }
    };
    let d = ovfree::distribution::make_standard(&fam, &Inclusion::identity(dim), order)?;
    Ok(Output::Json(io::dist_to_json(&d)))
}

fn run(cli: &Cli) -> CliResult<Output> {
    let fmt = |default: Format, allowed: &[Format]| -> CliResult<Format> {
        let f = cli.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(usage(format!("this command does not support --format {f:?}").to_lowercase()))
        }
    };
    match &cli.command {
        Command::Convolve { kind, n_fold, inputs } => {
            fmt(Format::Json, &[Format::Json])?;
            convolve_cmd(kind, *n_fold, inputs)
        }
        Command::Transform { kind, input } => {
            fmt(Format::Json, &[Format::Json])?;
            transform_cmd(kind, input)
        }
        Command::Bp { input } => {
            fmt(Format::Json, &[Format::Json])?;
            bp_cmd(input)
        }
        Command::Limits { array, order, dim, n_max } => {
            let f = fmt(Format::Csv, &[Format::Csv, Format::Json])?;
            limits_cmd(array, *order, *dim, *n_max, f)
        }
        Command::Subordinate { models, builtin, n_fold, order, grid, tol } => {
            let f = fmt(Format::Csv, &[Format::Csv, Format::Json])?;
            subordinate_cmd(
                SubordinateArgs {
                    models,
                    builtin,
                    n_fold: *n_fold,
                    order: *order,
                    grid: grid.as_deref(),
                    tol: *tol,
                },
                f,
            )
        }
        Command::Scalar { op, inputs } => {
            fmt(Format::Json, &[Format::Json])?;
            scalar_cmd(op, inputs)
        }
        Command::Verify { suite, order, dim, seed, trials } => {
            fmt(Format::Csv, &[Format::Csv])?;
            verify_cmd(
                suite,
                VerifyOptions {
                    order: *order,
                    dim: *dim,
                    seed: *seed,
                    trials: *trials,
                },
            )
        }
        Command::Standard { family, order, dim, param, model, seed } => {
            fmt(Format::Json, &[Format::Json])?;
            standard_cmd(family, *order, *dim, *param, *model, *seed)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn apply_env() -> CliResult<()> {
    if let Ok(v) = std::env::var("OVFREE_MAX_ORDER") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Core(Error::Parse(format!("OVFREE_MAX_ORDER: '{v}' is not an integer"))))?;
        guard::set_max_order(n);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = apply_env().and_then(|_| run(&cli)).and_then(|out| {
        let (text, ok) = match out {
            Output::Json(v) => (io::to_pretty(&v), true),
            Output::Csv(s) => (s, true),
            Output::Report(s, ok) => (s, ok),
        };
        emit(cli.out.as_deref(), &text)?;
        Ok(ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed: at least one residual is above its threshold");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
