//! Command-line driver for the correlation-length pipeline: dressed-function
//! tables, correlation lengths, low-temperature scans, free-fermion oracle
//! comparisons, and parameter sweeps with CSV/JSON output.
//!
//! Exit codes: 0 success, 2 invalid regime or configuration, 3 solver
//! non-convergence, 4 I/O failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use xxz_corrlen::freefermion::{self, PhiVariant};
use xxz_corrlen::model::ModelParams;
use xxz_corrlen::nlie::SolverOptions;
use xxz_corrlen::spectral::{self, CorrlenResult};
use xxz_corrlen::{dressed, lowt, C64, Error};

#[derive(Parser)]
#[command(name = "xxz-corrlen", version, about = "Finite-temperature correlation lengths of the XXZ spin-1/2 chain")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate dressed energy, charge and momentum on the Fermi interval
    Dressed(DressedArgs),
    /// Inverse correlation length and leading-asymptotics phase at one point
    Corrlen(CorrlenArgs),
    /// Exhaustive low-temperature scan over particle-hole configurations
    LowtScan(LowtScanArgs),
    /// Free-fermion closed forms and comparison against the contour route
    FfOracle(FfOracleArgs),
    /// Parameter sweep: one corrlen record per grid point
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct CommonOut {
    /// Config file (flat key=value lines or one JSON object); flags override
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path ("-" for stdout)
    #[arg(long, default_value = "-")]
    output: String,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Suppress the timestamp meta line so outputs are byte-reproducible
    #[arg(long)]
    no_meta: bool,
}

#[derive(Args, Clone)]
struct PhysArgs {
    /// Exchange coupling J > 0
    #[arg(long = "J")]
    j: Option<f64>,
    /// Anisotropy 0 <= delta < 1
    #[arg(long)]
    delta: Option<f64>,
    /// Magnetic field 0 < h < 4J(1+delta)
    #[arg(long)]
    h: Option<f64>,
    /// Temperature T > 0
    #[arg(long = "T")]
    t: Option<f64>,
}

#[derive(Args)]
struct DressedArgs {
    #[command(flatten)]
    phys: PhysArgs,
    /// Nystrom order
    #[arg(long, default_value_t = 64)]
    nystrom: usize,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct CorrlenArgs {
    #[command(flatten)]
    phys: PhysArgs,
    /// Ratio t/m of time to separation
    #[arg(long = "t-over-m")]
    t_over_m: Option<f64>,
    #[arg(long, default_value_t = 64)]
    nystrom: usize,
    /// Fixed-point tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Sweep budget of the fixed point
    #[arg(long, default_value_t = 200)]
    max_sweeps: usize,
    /// Write full solution snapshots (contours, u, roots) as JSON
    #[arg(long)]
    dump_solutions: Option<PathBuf>,
    /// Write the excited-state contour as CSV
    #[arg(long)]
    dump_contour: Option<PathBuf>,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct LowtScanArgs {
    #[command(flatten)]
    phys: PhysArgs,
    #[arg(long = "t-over-m")]
    t_over_m: Option<f64>,
    /// Maximal particles/holes per branch
    #[arg(long, default_value_t = 3)]
    n_max: usize,
    /// Quantum numbers run over [0, M)
    #[arg(long = "max-quantum", default_value_t = 6)]
    max_quantum: u32,
    #[arg(long, default_value_t = 64)]
    nystrom: usize,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Args)]
struct FfOracleArgs {
    #[command(flatten)]
    phys: PhysArgs,
    /// Phi integrand variant: the printed lambda argument or the mu argument
    #[arg(long, value_enum, default_value = "mu")]
    phi_variant: PhiArg,
    /// Skip the contour-route comparison (closed forms only)
    #[arg(long)]
    oracle_only: bool,
    #[command(flatten)]
    out: CommonOut,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhiArg {
    Mu,
    Printed,
}

#[derive(Args)]
struct SweepArgs {
    /// Anisotropy grid
    #[arg(long, value_delimiter = ',', required = true)]
    delta: Vec<f64>,
    /// Field grid
    #[arg(long, value_delimiter = ',', required = true)]
    h: Vec<f64>,
    /// Temperature grid
    #[arg(long = "T", value_delimiter = ',', required = true)]
    t: Vec<f64>,
    /// t/m grid
    #[arg(long = "t-over-m", value_delimiter = ',', default_value = "0.0")]
    t_over_m: Vec<f64>,
    #[arg(long = "J", default_value_t = 1.0)]
    j: f64,
    #[arg(long, default_value_t = 64)]
    nystrom: usize,
    /// Worker threads (default: machine parallelism)
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    out: CommonOut,
}

/// Key=value or single-JSON-object config file; flags take precedence.
struct FileConfig {
    map: HashMap<String, String>,
}

impl FileConfig {
    fn load(path: Option<&PathBuf>) -> Result<Self, Error> {
        let mut map = HashMap::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)?;
            let trimmed = text.trim_start();
            if trimmed.starts_with('{') {
                let v: serde_json::Value = serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("config JSON: {e}")))?;
                let obj = v
                    .as_object()
                    .ok_or_else(|| Error::InvalidConfig("config must be one JSON object".into()))?;
                for (k, val) in obj {
                    let s = match val {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    map.insert(k.clone(), s);
                }
            } else {
                for line in text.lines() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (k, v) = line.split_once('=').ok_or_else(|| {
                        Error::InvalidConfig(format!("config line without '=': {line}"))
                    })?;
                    map.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        }
        Ok(Self { map })
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, Error> {
        match self.map.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("config key {key}: bad number {s}"))),
        }
    }
}

fn resolve_params(phys: &PhysArgs, cfg: &FileConfig) -> Result<ModelParams, Error> {
    let j = phys.j.or(cfg.f64("J")?).unwrap_or(1.0);
    let delta = phys
        .delta
        .or(cfg.f64("delta")?)
        .ok_or_else(|| Error::InvalidConfig("missing --delta".into()))?;
    let h = phys
        .h
        .or(cfg.f64("h")?)
        .ok_or_else(|| Error::InvalidConfig("missing --h".into()))?;
    let t = phys
        .t
        .or(cfg.f64("T")?)
        .ok_or_else(|| Error::InvalidConfig("missing --T".into()))?;
    ModelParams::new(j, delta, h, t)
}

struct Out {
    sink: Box<dyn Write>,
}

impl Out {
    fn open(path: &str) -> Result<Self, Error> {
        let sink: Box<dyn Write> = if path == "-" {
            Box::new(std::io::stdout())
        } else {
            Box::new(std::fs::File::create(path)?)
        };
        Ok(Self { sink })
    }
}

fn meta_line(no_meta: bool) -> Option<String> {
    if no_meta {
        return None;
    }
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Some(format!("generated-unix-seconds: {secs}"))
}

const CORRLEN_COLUMNS: &str = "delta,h,J,T,t_over_m,q,vF,Zq,ReP,ImP,ReE,ImE,ReDelta,ImDelta,decay_rate,residual,monodromy_abs,iterations";

fn corrlen_csv_row(r: &CorrlenResult) -> String {
    format!(
        "{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.3e},{:.3e},{}",
        r.params.delta,
        r.params.h,
        r.params.j,
        r.params.t,
        r.t_over_m,
        r.q,
        r.v_f,
        r.z_q,
        r.obs.p_eff.re,
        r.obs.p_eff.im,
        r.obs.e_eff.re,
        r.obs.e_eff.im,
        r.obs.delta.re,
        r.obs.delta.im,
        r.obs.decay_rate(),
        r.excited.residual,
        r.excited.monodromy.norm(),
        r.excited.iterations
    )
}

fn run_corrlen(a: CorrlenArgs) -> Result<(), Error> {
    let cfg = FileConfig::load(a.out.config.as_ref())?;
    let params = resolve_params(&a.phys, &cfg)?;
    let t_over_m = a.t_over_m.or(cfg.f64("t-over-m")?).unwrap_or(0.0);
    let mut opts = SolverOptions::for_params(&params);
    opts.tol = a.tol;
    opts.max_sweeps = a.max_sweeps;
    let r = spectral::dominant_corrlen(&params, t_over_m, a.nystrom, Some(opts))?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    if r.obs.decay_rate() <= 0.0 {
        return Err(Error::OutOfRegime(format!(
            "computed Im Delta = {} <= 0: outside the exponentially decaying regime",
            r.obs.decay_rate()
        )));
    }
    if let Some(p) = &a.dump_solutions {
        let snap = serde_json::json!({
            "dominant": r.dominant.to_json(),
            "excited": r.excited.to_json(),
            "excited_mirror": r.excited_mirror.to_json(),
        });
        std::fs::write(p, serde_json::to_string_pretty(&snap).unwrap())?;
    }
    if let Some(p) = &a.dump_contour {
        let mut f = std::fs::File::create(p)?;
        xxz_corrlen::contour::write_contour_csv(&mut f, &r.excited.contour, &r.excited.u)?;
    }
    let mut out = Out::open(&a.out.output)?;
    match a.out.format {
        Format::Csv => {
            writeln!(out.sink, "# corrlen-csv v1")?;
            if let Some(m) = meta_line(a.out.no_meta) {
                writeln!(out.sink, "# {m}")?;
            }
            writeln!(out.sink, "{CORRLEN_COLUMNS}")?;
            writeln!(out.sink, "{}", corrlen_csv_row(&r))?;
        }
        Format::Json => {
            let mut v = r.to_json();
            if let Some(m) = meta_line(a.out.no_meta) {
                v["meta"] = serde_json::json!(m);
            }
            writeln!(out.sink, "{}", serde_json::to_string_pretty(&v).unwrap())?;
        }
    }
    Ok(())
}

fn run_dressed(a: DressedArgs) -> Result<(), Error> {
    let cfg = FileConfig::load(a.out.config.as_ref())?;
    let params = resolve_params(&a.phys, &cfg)?;
    let d = dressed::dressed_quantities(&params, a.nystrom)?;
    let mut out = Out::open(&a.out.output)?;
    match a.out.format {
        Format::Csv => {
            writeln!(out.sink, "# dressed-csv v1: q={:.16e} vF={:.16e} Zq={:.16e}", d.q, d.v_f, d.z_q)?;
            if let Some(m) = meta_line(a.out.no_meta) {
                writeln!(out.sink, "# {m}")?;
            }
            writeln!(out.sink, "lambda,eps,eps_deriv,z,p_deriv,p")?;
            for (i, &x) in d.rule.nodes.iter().enumerate() {
                let p = d.p_at(C64::new(x, 0.0)).map(|v| v.re).unwrap_or(f64::NAN);
                writeln!(
                    out.sink,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    x, d.eps.values[i], d.eps_deriv.values[i], d.z.values[i], d.p_deriv.values[i], p
                )?;
            }
        }
        Format::Json => {
            let mut v = serde_json::json!({
                "params": {"J": params.j, "delta": params.delta, "h": params.h, "T": params.t},
                "q": d.q,
                "vF": d.v_f,
                "Zq": d.z_q,
                "nodes": d.rule.nodes,
                "eps": d.eps.values,
                "eps_deriv": d.eps_deriv.values,
                "z": d.z.values,
                "p_deriv": d.p_deriv.values,
                "residuals": {
                    "eps": d.eps.residual,
                    "eps_deriv": d.eps_deriv.residual,
                    "z": d.z.residual,
                    "p_deriv": d.p_deriv.residual,
                },
            });
            if let Some(m) = meta_line(a.out.no_meta) {
                v["meta"] = serde_json::json!(m);
            }
            writeln!(out.sink, "{}", serde_json::to_string_pretty(&v).unwrap())?;
        }
    }
    Ok(())
}

fn run_lowt(a: LowtScanArgs) -> Result<(), Error> {
    let cfg = FileConfig::load(a.out.config.as_ref())?;
    let params = resolve_params(&a.phys, &cfg)?;
    let t_over_m = a.t_over_m.or(cfg.f64("t-over-m")?).unwrap_or(0.0);
    let d = dressed::dressed_quantities(&params, a.nystrom)?;
    let mut out = Out::open(&a.out.output)?;
    match a.out.format {
        Format::Csv => {
            if let Some(m) = meta_line(a.out.no_meta) {
                writeln!(out.sink, "# {m}")?;
            }
            lowt::write_scan_csv(&mut out.sink, &d, t_over_m, a.n_max, a.max_quantum)?;
        }
        Format::Json => {
            let r = lowt::minimize_im_delta0(&d, t_over_m, a.n_max, a.max_quantum)?;
            let v0 = r.delta0(&d, t_over_m);
            let mut v = serde_json::json!({
                "params": {"J": params.j, "delta": params.delta, "h": params.h, "T": params.t},
                "t_over_m": t_over_m,
                "vF": d.v_f,
                "Zq": d.z_q,
                "argmin": r.argmin,
                "bracket": r.bracket,
                "im_delta0": r.im_delta0,
                "delta0": [v0.re, v0.im],
                "ties": r.ties,
                "n_scanned": r.n_scanned,
            });
            if let Some(m) = meta_line(a.out.no_meta) {
                v["meta"] = serde_json::json!(m);
            }
            writeln!(out.sink, "{}", serde_json::to_string_pretty(&v).unwrap())?;
        }
    }
    Ok(())
}

fn run_ff(a: FfOracleArgs) -> Result<(), Error> {
    let cfg = FileConfig::load(a.out.config.as_ref())?;
    let mut phys = a.phys.clone();
    if phys.delta.is_none() {
        phys.delta = Some(0.0);
    }
    let params = resolve_params(&phys, &cfg)?;
    let variant = match a.phi_variant {
        PhiArg::Mu => PhiVariant::MuArg,
        PhiArg::Printed => PhiVariant::AsPrinted,
    };
    let rate = freefermion::ff_exponent_rate(&params)?;
    let constant = freefermion::ff_constant(&params, variant)?;
    let (nlie_rate, rate_rel, re_delta) = if a.oracle_only {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let r = spectral::dominant_corrlen(&params, 0.0, 64, None)?;
        let nr = r.obs.decay_rate();
        ((nr), (nr + rate).abs() / rate.abs(), r.obs.oscillation())
    };
    let mut out = Out::open(&a.out.output)?;
    match a.out.format {
        Format::Csv => {
            writeln!(out.sink, "# ff-oracle-csv v1")?;
            if let Some(m) = meta_line(a.out.no_meta) {
                writeln!(out.sink, "# {m}")?;
            }
            writeln!(out.sink, "J,h,T,rate,ReC,ImC,nlie_decay_rate,rate_rel_diff,nlie_oscillation")?;
            writeln!(
                out.sink,
                "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.3e},{:.3e}",
                params.j, params.h, params.t, rate, constant.re, constant.im, nlie_rate, rate_rel, re_delta
            )?;
        }
        Format::Json => {
            let mut v = serde_json::json!({
                "params": {"J": params.j, "h": params.h, "T": params.t},
                "rate": rate,
                "constant": [constant.re, constant.im],
                "nlie_decay_rate": nlie_rate,
                "rate_rel_diff": rate_rel,
                "nlie_oscillation": re_delta,
            });
            if let Some(m) = meta_line(a.out.no_meta) {
                v["meta"] = serde_json::json!(m);
            }
            writeln!(out.sink, "{}", serde_json::to_string_pretty(&v).unwrap())?;
        }
    }
    Ok(())
}

fn run_sweep(a: SweepArgs) -> Result<(), Error> {
    if a.delta.is_empty() || a.h.is_empty() || a.t.is_empty() || a.t_over_m.is_empty() {
        return Err(Error::InvalidConfig("sweep axes must be non-empty".into()));
    }
    let mut grid = Vec::new();
    for &delta in &a.delta {
        for &h in &a.h {
            for &t in &a.t {
                for &tm in &a.t_over_m {
                    grid.push((delta, h, t, tm));
                }
            }
        }
    }
    let jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .max(1);
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<CorrlenResult, Error>>>> =
        (0..grid.len()).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(grid.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= grid.len() {
                    break;
                }
                let (delta, h, t, tm) = grid[i];
                let r = ModelParams::new(a.j, delta, h, t)
                    .and_then(|p| spectral::dominant_corrlen(&p, tm, a.nystrom, None));
                *results[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut out = Out::open(&a.out.output)?;
    match a.out.format {
        Format::Csv => {
            writeln!(out.sink, "# corrlen-sweep-csv v1")?;
            if let Some(m) = meta_line(a.out.no_meta) {
                writeln!(out.sink, "# {m}")?;
            }
            writeln!(out.sink, "{CORRLEN_COLUMNS},error")?;
            for (i, cell) in results.iter().enumerate() {
                let (delta, h, t, tm) = grid[i];
                match cell.lock().unwrap().take().unwrap() {
                    Ok(r) => writeln!(out.sink, "{},", corrlen_csv_row(&r))?,
                    Err(e) => writeln!(
                        out.sink,
                        "{delta},{h},{},{t},{tm},,,,,,,,,,,,,,\"{e}\"",
                        a.j
                    )?,
                }
            }
        }
        Format::Json => {
            let mut records = Vec::new();
            for (i, cell) in results.iter().enumerate() {
                let (delta, h, t, tm) = grid[i];
                match cell.lock().unwrap().take().unwrap() {
                    Ok(r) => records.push(r.to_json()),
                    Err(e) => records.push(serde_json::json!({
                        "params": {"J": a.j, "delta": delta, "h": h, "T": t},
                        "t_over_m": tm,
                        "error": e.to_string(),
                    })),
                }
            }
            let mut v = serde_json::json!({ "records": records });
            if let Some(m) = meta_line(a.out.no_meta) {
                v["meta"] = serde_json::json!(m);
            }
            writeln!(out.sink, "{}", serde_json::to_string_pretty(&v).unwrap())?;
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::OutOfRegime(_) | Error::InvalidConfig(_) | Error::Domain(_) => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Dressed(a) => run_dressed(a),
        Command::Corrlen(a) => run_corrlen(a),
        Command::LowtScan(a) => run_lowt(a),
        Command::FfOracle(a) => run_ff(a),
        Command::Sweep(a) => run_sweep(a),
    };
    if let Err(e) = result {
        let record = serde_json::json!({ "error": e.to_string(), "exit": exit_code(&e) });
        eprintln!("{record}");
        std::process::exit(exit_code(&e));
    }
}
