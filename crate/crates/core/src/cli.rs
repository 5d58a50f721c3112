//! The `postcap` command line.
//!
//! Exit codes: 0 ok, 2 input error, 3 a theorem hypothesis fails (invalid
//! plan, singular kernel, law not realizable), 4 solver did not converge.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::channel::{proximity, MemorylessChannel, PostChannel};
use crate::error::{Error, Result};
use crate::feedback::{support_restriction, uniqueness_probe, FcapOptions, DEFAULT_FCAP_MAX_ITER, DEFAULT_FCAP_TOL};
use crate::memoryless::{
    capacity_iteration, check_connected, check_indecomposable_sufficient, surjectivity_check, DEFAULT_CAPACITY_MAX_ITER,
    DEFAULT_CAPACITY_TOL, DEFAULT_SUPPORT_TOL,
};
use crate::realizability::{
    optimal_law, parse_eps_grid, sweep_example, theorem2_check_with_tol, write_sweep_csv, Feasibility, FeasibleAll,
    LpVerdict, DEFAULT_SWEEP_N,
};
use crate::simulation::{build_plans_up_to, plan_mutual_information, verify_plan, PlanValidity};
use crate::spec_file::{load_channel_file, ChannelSpecFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_THEOREM: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "postcap", version, about = "Capacity diagnostics for channels whose state is the previous output")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Print information quantities in bits instead of nats.
    #[arg(long, global = true)]
    pub bits: bool,
    /// Write a JSON run report to this path.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Worker threads for restarts and sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a channel file and check its invariants.
    Validate { path: PathBuf },
    /// Capacity, surjectivity and proximity thresholds of the reference W.
    AnalyzeW {
        path: PathBuf,
        /// Support and slackness tolerance.
        #[arg(long, default_value_t = DEFAULT_SUPPORT_TOL)]
        tol: f64,
    },
    /// Feedback capacity of the channel.
    Fcap {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FCAP_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_FCAP_MAX_ITER)]
        max_iter: usize,
        /// Random restarts for the uniqueness probe.
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build and verify the non-feedback simulation plans for n = 1..N.
    Simulate {
        path: PathBuf,
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// Write the horizon-N plan as JSON.
        #[arg(long)]
        emit_plan: Option<PathBuf>,
        /// Comma-separated input symbols to keep when |X| > |Y|.
        #[arg(long)]
        restrict_s: Option<String>,
    },
    /// LP realizability of the optimal output law and the D diagnostic.
    Diagnose {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SWEEP_N)]
        n: usize,
        #[arg(long, default_value_t = crate::lp::DEFAULT_LP_TOL)]
        tol: f64,
    },
    /// Sweep a worked example over an eps grid and write CSV.
    Sweep {
        #[arg(long)]
        example: u32,
        /// Grid a:b:step, inclusive of b when step divides the range.
        #[arg(long)]
        eps: String,
        #[arg(long, default_value_t = DEFAULT_SWEEP_N)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::AnalyzeW { .. } => "analyze-w",
            Command::Fcap { .. } => "fcap",
            Command::Simulate { .. } => "simulate",
            Command::Diagnose { .. } => "diagnose",
            Command::Sweep { .. } => "sweep",
        }
    }

    fn input_path(&self) -> Option<&Path> {
        match self {
            Command::Validate { path }
            | Command::AnalyzeW { path, .. }
            | Command::Fcap { path, .. }
            | Command::Simulate { path, .. }
            | Command::Diagnose { path, .. } => Some(path),
            Command::Sweep { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 over the arguments and the input file contents.
    pub inputs_digest: String,
    pub units: &'static str,
    pub payload: Value,
    pub wall_time_s: f64,
    pub version: &'static str,
    pub exit_code: i32,
}

/// Text for the terminal, a JSON payload and the exit code.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub text: String,
    pub payload: Value,
    pub exit_code: i32,
}

struct Units {
    bits: bool,
}

impl Units {
    fn info(&self, nats: f64) -> String {
        if self.bits {
            format!("{:.12} bits", nats / std::f64::consts::LN_2)
        } else {
            format!("{nats:.12} nats")
        }
    }
}

fn fmt_vec<'a>(v: impl IntoIterator<Item = &'a f64>) -> String {
    let parts: Vec<String> = v.into_iter().map(|x| format!("{x:.10}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_columns(m: &nalgebra::DMatrix<f64>, label: &str) -> String {
    (0..m.ncols())
        .map(|s| format!("  {label}(.|{s}) = {}\n", fmt_vec(m.column(s).iter())))
        .collect()
}

fn digest(cli: &Cli) -> String {
    let mut h = Sha256::new();
    h.update(format!("{:?}", cli.command).as_bytes());
    if let Some(path) = cli.command.input_path() {
        if let Ok(bytes) = fs::read(path) {
            h.update([0u8]);
            h.update(&bytes);
        }
    }
    hex::encode(h.finalize())
}

/// The reference W: `reference_w` when given, else the common kernel of a
/// memoryless channel.
fn reference_of(ch: &PostChannel, w: Option<MemorylessChannel>) -> Result<MemorylessChannel> {
    match w {
        Some(w) => Ok(w),
        None if ch.is_memoryless() => MemorylessChannel::new(ch.kernel(0).clone()),
        None => Err(Error::Precondition(
            "channel file has no reference_w and its kernels differ; add a reference_w matrix".into(),
        )),
    }
}

pub fn cmd_validate(path: &Path) -> Result<CommandOutput> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec = ChannelSpecFile::from_json(&text)?;
    let (ch, w) = spec.to_channel()?;
    let mut out = format!(
        "ok: |X| = {}, |Y| = {}, {} kernels, memoryless: {}\n",
        ch.x_size(),
        ch.y_size(),
        ch.y_size(),
        if ch.is_memoryless() { "yes" } else { "no" }
    );
    let delta = match &w {
        Some(w) => {
            let d = proximity(&ch, w)?.delta;
            out.push_str(&format!("reference W present, delta = {d:.6e}\n"));
            Some(d)
        }
        None => None,
    };
    Ok(CommandOutput {
        text: out,
        payload: json!({
            "input_size": ch.x_size(),
            "output_size": ch.y_size(),
            "memoryless": ch.is_memoryless(),
            "reference_w": w.is_some(),
            "delta": delta,
        }),
        exit_code: EXIT_OK,
    })
}

fn cmd_analyze_w(path: &Path, tol: f64, units: &Units) -> Result<CommandOutput> {
    let (ch, w) = load_channel_file(path)?;
    let w = reference_of(&ch, w)?;
    let prof = capacity_iteration(&w, DEFAULT_CAPACITY_TOL, DEFAULT_CAPACITY_MAX_ITER)?;
    let surj = surjectivity_check(&w, &prof, tol)?;
    let t = &surj.thresholds;
    let mut out = String::new();
    out.push_str(&format!("capacity C(W) = {}\n", units.info(prof.capacity_nats)));
    out.push_str(&format!("P_X = {}\n", fmt_vec(&prof.p_x)));
    out.push_str(&format!("P_Y = {}\n", fmt_vec(&prof.p_y)));
    out.push_str(&format!("duality gap = {:.3e} after {} iterations\n", prof.gap, prof.iterations));
    out.push_str(&format!("{}\n", surj.verdict));
    if surj.is_surjective {
        out.push_str(&format!("support S = {:?}, sigma_min(W(S)) = {:.6e}\n", surj.support_s, surj.sigma_min_s));
    }
    out.push_str(&format!(
        "thresholds: indec = {:.6e}, conn = {:.6e}, fullrank = {:.6e}, fullrank_S = {:.6e}\n",
        t.indec, t.conn, t.fullrank, t.fullrank_s
    ));
    let mut extra = json!(null);
    if !ch.is_memoryless() || ch.kernel(0) != w.matrix() {
        let ind = check_indecomposable_sufficient(&ch, &w)?;
        let connected = check_connected(&ch);
        out.push_str(&format!(
            "delta = {:.6e}; indecomposable (sufficient test): {}; connected: {}\n",
            ind.delta, ind.holds, connected
        ));
        extra = json!({ "indecomposability": ind, "connected": connected });
    }
    let exit_code = if prof.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
    Ok(CommandOutput {
        text: out,
        payload: json!({ "profile": prof, "surjectivity": surj, "channel": extra }),
        exit_code,
    })
}

fn cmd_fcap(path: &Path, opts: &FcapOptions, restarts: usize, seed: u64, units: &Units) -> Result<CommandOutput> {
    let (ch, _) = load_channel_file(path)?;
    let mut out = String::new();
    let connected = check_connected(&ch);
    if !connected {
        out.push_str("warning: connectedness fails: single-letter characterization inapplicable; solving the program as a formal quantity\n");
    }
    let res = crate::feedback::solve_fcap_with(&ch, opts, None)?;
    out.push_str(&format!("C_f = {}\n", units.info(res.c_f_nats)));
    out.push_str(&format!("P*_Y' = {}\n", fmt_vec(res.stationary.iter())));
    out.push_str("P*_X|Y':\n");
    out.push_str(&fmt_columns(&res.input_kernel, "p"));
    out.push_str("P*_Y|Y':\n");
    out.push_str(&fmt_columns(&res.output_kernel, "q"));
    out.push_str(&format!(
        "certificate gap = {:.3e}, iterations = {}, converged = {}\n",
        res.certificate_gap, res.iterations, res.converged
    ));
    let probe = if restarts > 1 {
        let p = uniqueness_probe(&ch, &res, restarts, seed, opts)?;
        out.push_str(&format!(
            "uniqueness probe: {} restarts, max TV between maximizers = {:.3e}, excluded = {:?}\n",
            restarts, p.max_tv, p.excluded
        ));
        Some(p)
    } else {
        None
    };
    let exit_code = if res.converged { EXIT_OK } else { EXIT_NOT_CONVERGED };
    Ok(CommandOutput {
        text: out,
        payload: json!({ "result": res, "connected": connected, "uniqueness": probe }),
        exit_code,
    })
}

fn parse_subset(s: &str) -> Result<Vec<usize>> {
    let v = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad input symbol {p:?} in --restrict-s"))))
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(v)
}

fn digits(index: usize, base: usize, n: usize) -> Vec<usize> {
    (0..n).map(|t| (index / base.pow((n - 1 - t) as u32)) % base).collect()
}

fn cmd_simulate(path: &Path, n: usize, emit: Option<&Path>, restrict: Option<&str>, units: &Units) -> Result<CommandOutput> {
    let (ch, _) = load_channel_file(path)?;
    let (plan_ch, symbols) = match restrict {
        Some(s) => {
            let subset = parse_subset(s)?;
            (support_restriction(&ch, &subset)?, subset)
        }
        None if ch.x_size() < ch.y_size() => {
            return Err(Error::Precondition(format!(
                "|X| = {} < |Y| = {}: no square simulation plan exists; use diagnose for LP realizability",
                ch.x_size(),
                ch.y_size()
            )))
        }
        None if ch.x_size() != ch.y_size() => {
            return Err(Error::Precondition(format!(
                "|X| = {} differs from |Y| = {}; pass --restrict-s with {} input symbols to restrict the support",
                ch.x_size(),
                ch.y_size(),
                ch.y_size()
            )))
        }
        None => (ch.clone(), (0..ch.x_size()).collect()),
    };
    let (fb, law) = optimal_law(&ch)?;
    let mut out = format!("C_f = {}\n", units.info(fb.c_f_nats));
    if !fb.converged {
        out.push_str(&format!("solver did not converge (gap {:.3e})\n", fb.certificate_gap));
        return Ok(CommandOutput {
            text: out,
            payload: json!({ "result": fb }),
            exit_code: EXIT_NOT_CONVERGED,
        });
    }
    let mut plans = build_plans_up_to(&plan_ch, &law, n)?;
    for p in &mut plans {
        p.input_symbols = symbols.clone();
    }
    let mut rows = Vec::new();
    let mut exit_code = EXIT_OK;
    for plan in &plans {
        match plan.validity {
            PlanValidity::Valid => {
                let residual = verify_plan(&plan_ch, plan, &law)?.max;
                let rate = plan_mutual_information(&plan_ch, plan, &law)?;
                out.push_str(&format!(
                    "n = {}: min_entry = {:.6e}, norm_error = {:.3e}, residual = {:.3e}, rate = {}, rate gap = {:.3e}\n",
                    plan.n,
                    plan.min_entry,
                    plan.norm_error,
                    residual,
                    units.info(rate),
                    (rate - fb.c_f_nats).abs()
                ));
                rows.push(json!({ "n": plan.n, "min_entry": plan.min_entry, "norm_error": plan.norm_error,
                    "residual": residual, "rate_nats": rate }));
            }
            PlanValidity::Invalid { y0, index, value } | PlanValidity::Ambiguous { y0, index, value } => {
                let word = if matches!(plan.validity, PlanValidity::Invalid { .. }) { "INVALID" } else { "AMBIGUOUS" };
                let xs: Vec<usize> = digits(index, plan.x_size, plan.n).iter().map(|&d| symbols[d]).collect();
                out.push_str(&format!("{word} at (y0, x^n) = ({y0}, {xs:?}) for n = {}: entry {value:.6e}\n", plan.n));
                rows.push(json!({ "n": plan.n, "validity": plan.validity }));
                exit_code = EXIT_THEOREM;
                break;
            }
        }
    }
    if exit_code == EXIT_OK {
        out.push_str(&format!("VALID for n = 1..{n}\n"));
    }
    if let Some(p) = emit {
        let plan = plans.last().expect("n >= 1");
        fs::write(p, plan.to_json()).map_err(|e| Error::io(p, e))?;
        out.push_str(&format!("plan written to {}\n", p.display()));
    }
    Ok(CommandOutput {
        text: out,
        payload: json!({ "c_f_nats": fb.c_f_nats, "input_symbols": symbols, "horizons": rows }),
        exit_code,
    })
}

fn cmd_diagnose(path: &Path, n: usize, tol: f64, units: &Units) -> Result<CommandOutput> {
    let (ch, _) = load_channel_file(path)?;
    let (fb, law) = optimal_law(&ch)?;
    if !fb.converged {
        return Ok(CommandOutput {
            text: format!("solver did not converge (gap {:.3e})\n", fb.certificate_gap),
            payload: json!({ "result": fb }),
            exit_code: EXIT_NOT_CONVERGED,
        });
    }
    let v = theorem2_check_with_tol(&ch, &law, &fb, n, tol)?;
    let mut out = format!("C_f = {}\nn = {n}\n", units.info(fb.c_f_nats));
    for s in &v.per_y0 {
        let verdict = match &s.lp {
            LpVerdict::Feasible { residual_inf, .. } => format!("feasible (witness residual {residual_inf:.3e})"),
            LpVerdict::Infeasible { margin, .. } => format!("infeasible (separator margin {margin:.3e})"),
            LpVerdict::Indeterminate { phase1_objective } => {
                format!("indeterminate (phase-1 value {phase1_objective:.3e})")
            }
        };
        out.push_str(&format!(
            "y0 = {}: {verdict}; rank = {}; ls residual = {:.6e}\n",
            s.y0, s.rank, s.ls_residual_l1
        ));
    }
    if v.per_y0.iter().all(|s| s.feasible == Feasibility::Yes) {
        out.push_str("feasible all y0\n");
    }
    out.push_str(&format!("D = {:.6e}\n", v.d));
    out.push_str(&format!("marginal condition: {}\n", v.marginal_condition));
    out.push_str(&format!(
        "realizable without feedback at n = {n}: {}\n",
        match v.realizable {
            Feasibility::Yes => "yes",
            Feasibility::No => "no",
            Feasibility::Indeterminate => "indeterminate",
        }
    ));
    let exit_code = if v.realizable == Feasibility::No { EXIT_THEOREM } else { EXIT_OK };
    Ok(CommandOutput {
        text: out,
        payload: json!({ "c_f_nats": fb.c_f_nats, "verdict": v }),
        exit_code,
    })
}

pub fn cmd_sweep(example: u32, eps: &str, n: usize, out_path: &Path, jobs: Option<usize>) -> Result<CommandOutput> {
    crate::channel::example_max_eps(example)?;
    let grid = parse_eps_grid(eps)?;
    let rows = with_pool(jobs, || sweep_example(example, &grid, n))?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf).expect("writing to memory");
    fs::write(out_path, &buf).map_err(|e| Error::io(out_path, e))?;
    let max_d = rows.iter().map(|r| r.d).filter(|d| !d.is_nan()).fold(f64::NAN, f64::max);
    let first_infeasible = rows.iter().find(|r| r.feasible_all == FeasibleAll::False).map(|r| r.eps);
    let errors = rows.iter().filter(|r| r.feasible_all == FeasibleAll::Error).count();
    let text = format!(
        "{} rows written to {}; max D = {:.6e}; first infeasible eps = {}; failed points = {errors}\n",
        rows.len(),
        out_path.display(),
        max_d,
        first_infeasible.map_or_else(|| "none".to_string(), |e| format!("{e}")),
    );
    Ok(CommandOutput {
        text,
        payload: json!({ "csv": out_path, "rows": rows }),
        exit_code: EXIT_OK,
    })
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Execute a parsed command line.
pub fn execute(cli: &Cli) -> Result<CommandOutput> {
    let units = Units { bits: cli.bits };
    match &cli.command {
        Command::Validate { path } => cmd_validate(path),
        Command::AnalyzeW { path, tol } => cmd_analyze_w(path, *tol, &units),
        Command::Fcap {
            path,
            tol,
            max_iter,
            restarts,
            seed,
        } => {
            let opts = FcapOptions {
                tol: *tol,
                max_iter: *max_iter,
                ..Default::default()
            };
            with_pool(cli.jobs, || cmd_fcap(path, &opts, *restarts, *seed, &units))?
        }
        Command::Simulate {
            path,
            n,
            emit_plan,
            restrict_s,
        } => cmd_simulate(path, *n, emit_plan.as_deref(), restrict_s.as_deref(), &units),
        Command::Diagnose { path, n, tol } => cmd_diagnose(path, *n, *tol, &units),
        Command::Sweep { example, eps, n, out } => cmd_sweep(*example, eps, *n, out, cli.jobs),
    }
}

/// Parse arguments, run, print, write the report; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let start = Instant::now();
    match execute(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            if let Some(path) = &cli.report {
                let report = RunReport {
                    command: cli.command.name().to_string(),
                    inputs_digest: digest(&cli),
                    units: if cli.bits { "bits" } else { "nats" },
                    payload: out.payload,
                    wall_time_s: start.elapsed().as_secs_f64(),
                    version: env!("CARGO_PKG_VERSION"),
                    exit_code: out.exit_code,
                };
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                if let Err(e) = fs::write(path, text) {
                    eprintln!("error: cannot write report {}: {e}", path.display());
                    return EXIT_INPUT;
                }
            }
            out.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
