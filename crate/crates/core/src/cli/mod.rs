//! The `splitseg` command line.
//!
//! Exit codes: 0 success, 2 invalid arguments or configuration, 3 I/O
//! failure, 4 solver non-convergence, failed equivalence, or an order slope
//! outside `[0.9, 1.1]`.

pub mod config;
pub mod metrics;
pub mod synth;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::Error;
use crate::field::{write_pgm, GaussianConvention, ScalarField};
use crate::netequiv::{check_equivalence, compare_model, export, model_from_json, model_to_json};
use crate::potts::{
    approx_perimeter, segment, PerimeterPrefactor, RegionForce, DEFAULT_UPDATE_EVERY,
};
use crate::splitting::{builtin_problem, BUILTIN_PROBLEMS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

/// Environment variable capping the worker thread count (0 = one thread).
pub const THREADS_ENV: &str = "SPLITSEG_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_IO,
            message: msg.into(),
        }
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_SOLVER,
            message: msg.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Convergence { .. } | Error::DegenerateFit(_) => EXIT_SOLVER,
            Error::Format { .. } => EXIT_IO,
            _ => EXIT_CONFIG,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "splitseg",
    version,
    about = "Operator splitting, network export, and Potts segmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment a PGM image with Model I or Model II.
    Segment(Box<SegmentArgs>),
    /// Measure the time order of a built-in splitting problem.
    VerifyOrder(VerifyOrderArgs),
    /// Export a splitting scheme as a feedforward network.
    ExportNet(ExportNetArgs),
    /// Run a network file against its scheme and compare bitwise.
    EvalNet(EvalNetArgs),
    /// Write a synthetic test image and its ground-truth mask.
    GenSynthetic(GenSyntheticArgs),
    /// Accuracy and Dice score of a predicted mask.
    Metrics(MetricsArgs),
    /// Threshold-dynamics perimeter estimate of a mask.
    ApproxPerimeter(ApproxPerimeterArgs),
}

#[derive(Args, Debug)]
struct SegmentArgs {
    /// Input image (PGM).
    #[arg(long)]
    input: PathBuf,
    /// Output mask (PGM, values 0/255).
    #[arg(long)]
    mask_out: PathBuf,
    /// Optional output of the final u field (PGM, clamped to [0,1]).
    #[arg(long)]
    u_out: Option<PathBuf>,
    /// Optional energy trace (CSV).
    #[arg(long)]
    energy_trace: Option<PathBuf>,
    /// JSON configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model: 1 (double well) or 2 (threshold dynamics).
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Model I: λε.
    #[arg(long)]
    lambda_eps: Option<f64>,
    /// Model I: λ/ε.
    #[arg(long)]
    lambda_over_eps: Option<f64>,
    /// Model II: ε.
    #[arg(long)]
    eps: Option<f64>,
    /// Model II: λ.
    #[arg(long)]
    lambda: Option<f64>,
    /// Model II: Gaussian width δ.
    #[arg(long)]
    delta: Option<f64>,
    /// Model II: substeps per step.
    #[arg(long = "K", alias = "k")]
    k: Option<usize>,
    /// Model II: paper-std or heat-time.
    #[arg(long)]
    convention: Option<String>,
    /// Model II: paper or calibrated.
    #[arg(long)]
    prefactor: Option<String>,
    #[arg(long)]
    fp_tol: Option<f64>,
    #[arg(long)]
    fp_max_iters: Option<usize>,
    /// normalized-input, constant:<v>, or file:<path>.
    #[arg(long)]
    init: Option<String>,
    /// Chan–Vese starting mean of the foreground.
    #[arg(long)]
    c0: Option<f64>,
    /// Chan–Vese starting mean of the background.
    #[arg(long)]
    c1: Option<f64>,
    /// Steps between mean updates (0 = never).
    #[arg(long)]
    update_every: Option<usize>,
    /// Chan–Vese force weight (default depends on the model).
    #[arg(long)]
    weight: Option<f64>,
}

#[derive(Args, Debug)]
struct VerifyOrderArgs {
    /// Built-in problem name.
    #[arg(long, default_value = "lie-linear")]
    problem: String,
}

#[derive(Args, Debug)]
struct ExportNetArgs {
    /// Scheme configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output network file (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Also run the scheme and the network and require bitwise agreement.
    #[arg(long)]
    check: bool,
}

#[derive(Args, Debug)]
struct EvalNetArgs {
    /// Network file (JSON).
    #[arg(long)]
    net: PathBuf,
    /// Scheme configuration the network should reproduce (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Optional output of the network's final field (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenSyntheticArgs {
    /// disk, two-disks, square, or half-plane.
    #[arg(long, default_value = "disk")]
    shape: String,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 192)]
    height: usize,
    #[arg(long, default_value_t = 30.0)]
    radius: f64,
    /// Background level in [0,1].
    #[arg(long, default_value_t = 0.2)]
    background: f64,
    /// Foreground level in [0,1].
    #[arg(long, default_value_t = 0.9)]
    foreground: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output image (PGM).
    #[arg(long)]
    image_out: PathBuf,
    /// Output ground-truth mask (PGM).
    #[arg(long)]
    truth_out: PathBuf,
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args, Debug)]
struct ApproxPerimeterArgs {
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    delta: f64,
    #[arg(long, default_value = "heat-time")]
    convention: String,
    #[arg(long, default_value = "paper")]
    prefactor: String,
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.message);
        return e.code;
    }
    let mut stdout = std::io::stdout().lock();
    match dispatch(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::config(format!(
            "{THREADS_ENV} must be a nonnegative integer, got '{raw}'"
        ))
    })?;
    // a pool may already exist when embedded; the first setting wins
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global();
    Ok(())
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult<i32> {
    match cmd {
        Command::Segment(a) => cmd_segment(*a, out),
        Command::VerifyOrder(a) => cmd_verify_order(a, out),
        Command::ExportNet(a) => cmd_export_net(a, out),
        Command::EvalNet(a) => cmd_eval_net(a, out),
        Command::GenSynthetic(a) => cmd_gen_synthetic(a, out),
        Command::Metrics(a) => cmd_metrics(a, out),
        Command::ApproxPerimeter(a) => cmd_approx_perimeter(a, out),
    }
}

fn say(out: &mut dyn Write, text: &str) -> CliResult<()> {
    writeln!(out, "{text}").map_err(|e| CliError::io(format!("cannot write to stdout: {e}")))
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| CliError::io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// `x` with `digits` significant digits.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i64;
    let decimals = digits as i64 - 1 - exp;
    if (0..=20).contains(&decimals) {
        format!("{x:.*}", decimals as usize)
    } else {
        format!("{x:.*e}", digits - 1)
    }
}

fn parse_model(s: &str) -> CliResult<&'static str> {
    match s {
        "1" | "I" | "i" => Ok("I"),
        "2" | "II" | "ii" => Ok("II"),
        other => Err(CliError::config(format!(
            "unknown model '{other}', expected 1 or 2"
        ))),
    }
}

fn parse_init(s: &str) -> CliResult<Value> {
    if s == "normalized-input" {
        return Ok(json!({ "kind": "normalized-input" }));
    }
    if let Some(v) = s.strip_prefix("constant:") {
        let value: f64 = v
            .parse()
            .map_err(|_| CliError::config(format!("bad constant init '{v}'")))?;
        return Ok(json!({ "kind": "constant", "value": value }));
    }
    if let Some(p) = s.strip_prefix("file:") {
        return Ok(json!({ "kind": "file", "path": p }));
    }
    Err(CliError::config(format!(
        "unknown init '{s}', expected normalized-input, constant:<v>, or file:<path>"
    )))
}

fn cmd_segment(a: SegmentArgs, out: &mut dyn Write) -> CliResult<i32> {
    let (mut doc, doc_dir) = match &a.config {
        Some(p) => (config::read_json(p)?, base_dir(p)),
        None => (json!({}), PathBuf::new()),
    };
    let obj = config::as_object(&mut doc)?;
    match (&a.model, obj.get("model").and_then(Value::as_str)) {
        (Some(flag), Some(file)) if parse_model(flag)? != file => {
            return Err(CliError::config(format!(
                "--model {flag} conflicts with model \"{file}\" in the config file"
            )));
        }
        (Some(flag), _) => {
            obj.insert("model".into(), json!(parse_model(flag)?));
        }
        (None, Some(_)) => {}
        (None, None) => {
            return Err(CliError::config(
                "no model given; use --model 1 or --model 2",
            ))
        }
    }
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            obj.insert(key.into(), v);
        }
    };
    set("steps", a.steps.map(|v| json!(v)));
    set("dt", a.dt.map(|v| json!(v)));
    set("lambda_eps", a.lambda_eps.map(|v| json!(v)));
    set("lambda_over_eps", a.lambda_over_eps.map(|v| json!(v)));
    set("eps", a.eps.map(|v| json!(v)));
    set("lambda", a.lambda.map(|v| json!(v)));
    set("delta", a.delta.map(|v| json!(v)));
    set("K", a.k.map(|v| json!(v)));
    set("convention", a.convention.as_ref().map(|v| json!(v)));
    set("prefactor", a.prefactor.as_ref().map(|v| json!(v)));
    set("fp_tol", a.fp_tol.map(|v| json!(v)));
    set("fp_max_iters", a.fp_max_iters.map(|v| json!(v)));
    // a file init given on the command line is relative to the working directory
    let init_dir = if a.init.is_some() {
        PathBuf::new()
    } else {
        doc_dir
    };
    if let Some(init) = &a.init {
        obj.insert("init".into(), parse_init(init)?);
    }
    let (model, force) = config::parse_segment_config(doc, &init_dir)?;

    let f = config::read_field(&a.input)?;
    let mut force =
        force.unwrap_or_else(|| RegionForce::chan_vese_from_image(&f, DEFAULT_UPDATE_EVERY));
    if let RegionForce::ChanVese {
        c0,
        c1,
        update_every,
        weight,
    } = &mut force
    {
        *c0 = a.c0.unwrap_or(*c0);
        *c1 = a.c1.unwrap_or(*c1);
        *update_every = a.update_every.unwrap_or(*update_every);
        *weight = a.weight.or(*weight);
    } else if a.c0.is_some() || a.c1.is_some() || a.update_every.is_some() || a.weight.is_some() {
        return Err(CliError::config(
            "chan-vese flags given with a fixed-field force",
        ));
    }

    let result = segment(&f, &model, &force)?;
    let mask_bytes = write_pgm(&result.mask)?;
    let u_bytes = match &a.u_out {
        Some(_) => Some(write_pgm(&result.u_final.map(|v| v.clamp(0.0, 1.0)))?),
        None => None,
    };
    write_atomic(&a.mask_out, &mask_bytes)?;
    if let (Some(p), Some(b)) = (&a.u_out, &u_bytes) {
        write_atomic(p, b)?;
    }
    if let Some(p) = &a.energy_trace {
        write_atomic(p, result.trace.to_csv().as_bytes())?;
    }
    let fg = result.mask.values().iter().filter(|&&v| v > 0.5).count();
    say(
        out,
        &format!(
            "steps {}  c0 {}  c1 {}  foreground {} of {} pixels",
            model.steps(),
            format_significant(result.c0, 12),
            format_significant(result.c1, 12),
            fg,
            result.mask.len()
        ),
    )?;
    Ok(EXIT_OK)
}

fn cmd_verify_order(a: VerifyOrderArgs, out: &mut dyn Write) -> CliResult<i32> {
    let problem = builtin_problem(&a.problem).ok_or_else(|| {
        CliError::config(format!(
            "unknown problem '{}', expected one of: {}",
            a.problem,
            BUILTIN_PROBLEMS.join(", ")
        ))
    })?;
    let report = problem.run()?;
    say(
        out,
        &format!("problem {}: {}", problem.name, problem.description),
    )?;
    say(out, "dt,steps,max_error")?;
    for r in &report.rows {
        say(out, &format!("{:.16e},{},{:.16e}", r.dt, r.steps, r.error))?;
    }
    let ok = (0.9..=1.1).contains(&report.slope);
    say(
        out,
        &format!(
            "slope {} ({})",
            format_significant(report.slope, 12),
            if ok {
                "within [0.9, 1.1]"
            } else {
                "OUT OF BAND [0.9, 1.1]"
            }
        ),
    )?;
    Ok(if ok { EXIT_OK } else { EXIT_SOLVER })
}

fn cmd_export_net(a: ExportNetArgs, out: &mut dyn Write) -> CliResult<i32> {
    let cfg = config::parse_scheme_config(config::read_json(&a.config)?)?;
    let model = export(&cfg.scheme)?;
    write_atomic(&a.out, model_to_json(&model)?.as_bytes())?;
    say(
        out,
        &format!(
            "wrote {} layer(s) to {}",
            model.layers().len(),
            a.out.display()
        ),
    )?;
    if !a.check {
        return Ok(EXIT_OK);
    }
    let u0 = cfg.initial_field()?;
    let report = check_equivalence(&cfg.scheme, &u0, cfg.scheme.steps())?;
    say(
        out,
        &format!(
            "steps {}  max_abs_diff {:e}  {}",
            report.steps,
            report.max_abs_diff,
            verdict(report.pass)
        ),
    )?;
    Ok(if report.pass { EXIT_OK } else { EXIT_SOLVER })
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "bitwise equal"
    } else {
        "MISMATCH"
    }
}

fn cmd_eval_net(a: EvalNetArgs, out: &mut dyn Write) -> CliResult<i32> {
    let cfg = config::parse_scheme_config(config::read_json(&a.config)?)?;
    let bytes = config::read_file(&a.net)?;
    let text =
        String::from_utf8(bytes).map_err(|_| CliError::config("network file is not UTF-8"))?;
    let model = model_from_json(&text, &base_dir(&a.net))?;
    let u0 = cfg.initial_field()?;
    let report = compare_model(&model, &cfg.scheme, &u0, cfg.scheme.steps())?;
    if let Some(p) = &a.out {
        let fin = crate::netequiv::forward(&model, &u0, cfg.scheme.steps())?;
        let text = serde_json::to_string(&fin).map_err(|e| CliError::config(e.to_string()))?;
        write_atomic(p, text.as_bytes())?;
    }
    say(
        out,
        &format!(
            "steps {}  max_abs_diff {:e}  {}",
            report.steps,
            report.max_abs_diff,
            verdict(report.pass)
        ),
    )?;
    Ok(if report.pass { EXIT_OK } else { EXIT_SOLVER })
}

fn cmd_gen_synthetic(a: GenSyntheticArgs, out: &mut dyn Write) -> CliResult<i32> {
    let spec = synth::SyntheticSpec {
        shape: a.shape.parse()?,
        width: a.width,
        height: a.height,
        radius: a.radius,
        background: a.background,
        foreground: a.foreground,
        noise_sd: a.noise_sd,
        seed: a.seed,
    };
    let truth = spec.truth()?;
    let image = spec.image()?;
    let image_bytes = write_pgm(&image)?;
    let truth_bytes = write_pgm(&truth)?;
    write_atomic(&a.image_out, &image_bytes)?;
    write_atomic(&a.truth_out, &truth_bytes)?;
    let count = truth.values().iter().filter(|&&v| v > 0.5).count();
    say(
        out,
        &format!(
            "{}x{} image, {} foreground pixels",
            a.width, a.height, count
        ),
    )?;
    Ok(EXIT_OK)
}

/// Masks are binarized at byte value > 127.
fn read_mask(path: &Path) -> CliResult<ScalarField> {
    Ok(config::read_field(path)?.map(|v| if v * 255.0 > 127.0 { 1.0 } else { 0.0 }))
}

fn cmd_metrics(a: MetricsArgs, out: &mut dyn Write) -> CliResult<i32> {
    let pred = read_mask(&a.pred)?;
    let truth = read_mask(&a.truth)?;
    let m = metrics::compare_masks(&pred, &truth, 0.5)?;
    say(
        out,
        &format!("accuracy {}", format_significant(m.accuracy, 12)),
    )?;
    say(out, &format!("dice {}", format_significant(m.dice, 12)))?;
    Ok(EXIT_OK)
}

fn cmd_approx_perimeter(a: ApproxPerimeterArgs, out: &mut dyn Write) -> CliResult<i32> {
    let convention: GaussianConvention = a.convention.parse()?;
    let prefactor: PerimeterPrefactor = a.prefactor.parse()?;
    let v = config::read_field(&a.mask)?;
    let p = approx_perimeter(&v, a.delta, convention, prefactor)?;
    say(out, &format_significant(p, 12))?;
    Ok(EXIT_OK)
}
