//! `tulip` - benchmark front end for the two-stage stochastic MILP toolkit.
//!
//! Subcommands:
//!   generate   adapt a deterministic base file into a stochastic instance
//!   solve      run one method on one instance, append a CSV row
//!   bench      run a manifest of (instance, method) cells, with aggregates
//!   converge   fast-forward vs random-sampling convergence curves
//!
//! Instance files are self-contained. Routing instances are a TSPLIB-style
//! block (EXPLICIT FULL_MATRIX) terminated by EOF, followed by one scenario
//! line per scenario ("p b_1 ... b_n"). Network instances use the Stage
//! section format written by `generate ssfp`.

mod record;
mod runner;

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tulip_core::driver::{convergence_curve, CurveMode};
use tulip_core::scvrp::{format_scenario_lines, generate_demands, parse_tsplib_vrp};
use tulip_core::ssfp::{adapt_sstp_instance, dump_ssfp_instance, parse_stp};

use record::{append_row, fmt_sig, rows_to_csv, Row};
use runner::{load_instance, run_cell, Cell, Instance, Method};

#[derive(Parser)]
#[command(name = "tulip", version, about = "Two-stage stochastic MILP benchmark driver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Adapt a deterministic base file into a stochastic instance file.
    Generate {
        /// Problem family of the base file.
        #[arg(value_enum)]
        kind: Kind,
        /// Base file: TSPLIB-style .vrp (scvrp) or SteinLib-style .stp (ssfp).
        #[arg(long)]
        base: PathBuf,
        /// Demand variance factor (scvrp only).
        #[arg(long)]
        alpha: Option<f64>,
        /// Scenario count. Required for scvrp; for ssfp optionally keeps only
        /// the first S scenario blocks of the base file (renormalized).
        #[arg(long, short = 's')]
        scenarios: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output instance file.
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Solve one instance with one method and append a CSV row.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Tulip)]
        method: Method,
        /// Wall-clock budget in seconds for the whole solve.
        #[arg(long, default_value_t = 120.0)]
        time_limit: f64,
        /// Scenario-reduction fraction for the tulip method.
        #[arg(long, default_value_t = 0.1)]
        fraction: f64,
        /// Seed column of the emitted record (bookkeeping only).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Alpha recorded in the parameter column (bookkeeping only).
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        beta: BetaArgs,
        /// CSV file to append to (header written when new).
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Run every cell of a manifest file and append an aggregate block.
    ///
    /// Manifest lines: "instance method [fraction] [time_limit] [seed]",
    /// whitespace separated, '#' comments allowed.
    Bench {
        manifest: PathBuf,
        /// Number of solves run in parallel.
        #[arg(long, short = 'j', default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        beta: BetaArgs,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
    /// Convergence study: per reduced size, the fast-forward objective and
    /// the min/mean/max over random scenario subsets.
    Converge {
        instance: PathBuf,
        /// Comma-separated reduced sizes, each in 1..=S.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Random-sampling repetitions per size.
        #[arg(long, default_value_t = 25)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        beta: BetaArgs,
        #[arg(long, short = 'o')]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Scvrp,
    Ssfp,
}

/// Distance weights for the network problem (cost / group / type terms).
#[derive(Args, Clone, Copy)]
struct BetaArgs {
    #[arg(long, default_value_t = 1.0)]
    beta1: f64,
    #[arg(long, default_value_t = 0.0)]
    beta2: f64,
    #[arg(long, default_value_t = 0.0)]
    beta3: f64,
}

impl BetaArgs {
    fn as_array(self) -> [f64; 3] {
        [self.beta1, self.beta2, self.beta3]
    }
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Generate { kind, base, alpha, scenarios, seed, out } => {
            cmd_generate(kind, &base, alpha, scenarios, seed, &out)
        }
        Cmd::Solve { instance, method, time_limit, fraction, seed, alpha, beta, out } => {
            cmd_solve(&instance, method, time_limit, fraction, seed, alpha, beta, &out)
        }
        Cmd::Bench { manifest, jobs, beta, out } => cmd_bench(&manifest, jobs, beta, &out),
        Cmd::Converge { instance, sizes, repeats, seed, beta, out } => {
            cmd_converge(&instance, &sizes, repeats, seed, beta, &out)
        }
    }
}

fn cmd_generate(
    kind: Kind,
    base: &Path,
    alpha: Option<f64>,
    scenarios: Option<usize>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let text = std::fs::read_to_string(base)
        .with_context(|| format!("reading base file {}", base.display()))?;
    let name = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let body = match kind {
        Kind::Scvrp => {
            let alpha = alpha.context("scvrp generation needs --alpha")?;
            let s = scenarios.context("scvrp generation needs --scenarios")?;
            let parsed = parse_tsplib_vrp(&text)
                .with_context(|| format!("parsing {}", base.display()))?;
            let inst = generate_demands(&parsed, alpha, s, seed)?;
            dump_combined_scvrp(&inst, &name)
        }
        Kind::Ssfp => {
            if alpha.is_some() {
                bail!("--alpha only applies to scvrp generation");
            }
            let mut stp =
                parse_stp(&text).with_context(|| format!("parsing {}", base.display()))?;
            if let Some(s) = scenarios {
                if s == 0 {
                    bail!("need at least one scenario");
                }
                if s > stp.scenarios.len() {
                    bail!("base file has only {} scenario blocks", stp.scenarios.len());
                }
                stp.scenarios.truncate(s);
                let total: f64 = stp.scenarios.iter().map(|sc| sc.probability).sum();
                if total <= 0.0 {
                    bail!("selected scenarios have zero total probability");
                }
                for sc in &mut stp.scenarios {
                    sc.probability /= total;
                }
            }
            let inst = adapt_sstp_instance(&stp, seed)?;
            dump_ssfp_instance(&inst)
        }
    };
    std::fs::write(out, body).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

/// Self-contained routing dump: TSPLIB block with an explicit distance
/// matrix, then one scenario line per scenario after the EOF marker.
fn dump_combined_scvrp(inst: &tulip_core::scvrp::ScvrpInstance, name: &str) -> String {
    let n1 = inst.dist.len();
    let mut out = String::new();
    out.push_str(&format!("NAME : {name}\n"));
    out.push_str("TYPE : CVRP\n");
    out.push_str(&format!("DIMENSION : {n1}\n"));
    out.push_str(&format!("CAPACITY : {}\n", inst.capacity));
    out.push_str("EDGE_WEIGHT_TYPE : EXPLICIT\n");
    out.push_str("EDGE_WEIGHT_FORMAT : FULL_MATRIX\n");
    out.push_str("EDGE_WEIGHT_SECTION\n");
    for row in &inst.dist {
        let toks: Vec<String> = row.iter().map(|d| format!("{d}")).collect();
        out.push_str(&toks.join(" "));
        out.push('\n');
    }
    // Representative demands only; the scenario lines are authoritative.
    out.push_str("DEMAND_SECTION\n");
    for (i, &d) in inst.scenarios.payload(0).iter().enumerate() {
        out.push_str(&format!("{} {d}\n", i + 1));
    }
    out.push_str("DEPOT_SECTION\n1\n-1\nEOF\n");
    out.push_str("# scenarios: probability then per-city demands (depot omitted)\n");
    out.push_str(&format_scenario_lines(&inst.scenarios));
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    path: &Path,
    method: Method,
    time_limit: f64,
    fraction: f64,
    seed: u64,
    alpha: Option<f64>,
    beta: BetaArgs,
    out: &Path,
) -> Result<()> {
    let inst = load_instance(path)?;
    let param = match (alpha, &inst) {
        (Some(a), _) => fmt_sig(a),
        (None, Instance::Ssfp(_)) => {
            format!("{}/{}/{}", fmt_sig(beta.beta1), fmt_sig(beta.beta2), fmt_sig(beta.beta3))
        }
        (None, Instance::Scvrp(_)) => String::new(),
    };
    let cell = Cell {
        id: instance_id(path),
        instance: inst,
        method,
        fraction,
        time_limit: Duration::from_secs_f64(time_limit),
        seed,
        param,
        beta: beta.as_array(),
    };
    let row = run_cell(&cell);
    append_row(out, &row)?;
    println!("{}", row.to_line());
    if row.status == "error" {
        bail!("solve failed: {}", row.message);
    }
    Ok(())
}

fn instance_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn cmd_bench(manifest: &Path, jobs: usize, beta: BetaArgs, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(manifest)
        .with_context(|| format!("reading manifest {}", manifest.display()))?;
    let dir = manifest.parent().map(PathBuf::from).unwrap_or_default();
    let mut cells = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() < 2 || parts.len() > 5 {
            bail!("manifest line {}: expected 'instance method [fraction] [time_limit] [seed]'", k + 1);
        }
        let path = dir.join(parts[0]);
        let method = Method::from_str(parts[1])
            .with_context(|| format!("manifest line {}", k + 1))?;
        let fraction: f64 = parts.get(2).map_or(Ok(0.1), |t| t.parse())
            .with_context(|| format!("manifest line {}: bad fraction", k + 1))?;
        let time_limit: f64 = parts.get(3).map_or(Ok(120.0), |t| t.parse())
            .with_context(|| format!("manifest line {}: bad time limit", k + 1))?;
        let seed: u64 = parts.get(4).map_or(Ok(0), |t| t.parse())
            .with_context(|| format!("manifest line {}: bad seed", k + 1))?;
        // A cell that fails to load still yields a row, never an abort.
        let instance = load_instance(&path);
        cells.push((instance_id(&path), instance, method, fraction, time_limit, seed));
    }
    if cells.is_empty() {
        bail!("manifest lists no runs");
    }

    let prepared: Vec<Option<Cell>> = cells
        .iter()
        .map(|(id, inst, method, fraction, time_limit, seed)| match inst {
            Ok(inst) => Some(Cell {
                id: id.clone(),
                instance: inst.clone(),
                method: *method,
                fraction: *fraction,
                time_limit: Duration::from_secs_f64(*time_limit),
                seed: *seed,
                param: String::new(),
                beta: beta.as_array(),
            }),
            Err(_) => None,
        })
        .collect();

    // Whole-solve parallelism: a worker pool pulls cell indices off a shared
    // counter; results land in manifest order regardless of finish order.
    let jobs = jobs.max(1);
    let slots = std::sync::Mutex::new(vec![None::<Row>; prepared.len()]);
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(prepared.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= prepared.len() {
                    break;
                }
                let row = match &prepared[i] {
                    Some(cell) => run_cell(cell),
                    None => {
                        let (id, inst, method, _, _, seed) = &cells[i];
                        let msg = inst.as_ref().err().map(|e| e.to_string()).unwrap_or_default();
                        Row::error(id.clone(), method.name(), *seed, msg)
                    }
                };
                slots.lock().unwrap()[i] = Some(row);
            });
        }
    });
    let rows: Vec<Row> = slots.into_inner().unwrap().into_iter().map(|r| r.unwrap()).collect();

    let mut body = rows_to_csv(&rows);
    body.push_str(&aggregate_block(&rows));
    std::fs::write(out, &body).with_context(|| format!("writing {}", out.display()))?;
    let optimal = rows.iter().filter(|r| r.status == "optimal").count();
    println!("{} runs, {} optimal -> {}", rows.len(), optimal, out.display());
    Ok(())
}

/// Per-method aggregates in manifest order of first appearance: mean wall
/// time, mean gap over the non-infinity gaps, how many gaps were finite, and
/// how many runs proved optimality.
fn aggregate_block(rows: &[Row]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for row in rows {
        if !methods.contains(&row.method.as_str()) {
            methods.push(&row.method);
        }
    }
    let mut out = String::from("# aggregate,method,runs,mean_time,mean_gap_percent,gaps_non_inf,optimal\n");
    for method in methods {
        let group: Vec<&Row> = rows.iter().filter(|r| r.method == method).collect();
        let runs = group.len();
        let mean_time = group.iter().map(|r| r.time_total()).sum::<f64>() / runs as f64;
        let finite: Vec<f64> =
            group.iter().map(|r| r.gap_percent).filter(|g| g.is_finite()).collect();
        let mean_gap = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let optimal = group.iter().filter(|r| r.status == "optimal").count();
        out.push_str(&format!(
            "# aggregate,{method},{runs},{},{},{},{optimal}\n",
            fmt_sig(mean_time),
            fmt_sig(mean_gap),
            finite.len()
        ));
    }
    out
}

fn cmd_converge(
    path: &Path,
    sizes: &[usize],
    repeats: usize,
    seed: u64,
    beta: BetaArgs,
    out: &Path,
) -> Result<()> {
    if repeats == 0 {
        bail!("need at least one random repetition");
    }
    let problem = load_instance(path)?.into_problem(beta.as_array())?;
    let ff = convergence_curve(problem.as_ref(), sizes, CurveMode::FastForward)?;
    let rand = convergence_curve(
        problem.as_ref(),
        sizes,
        CurveMode::Random { runs: repeats, seed },
    )?;
    let mut body = String::from("size,fast_forward,random_min,random_mean,random_max\n");
    for (f, r) in ff.iter().zip(&rand) {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            f.size,
            fmt_sig(f.mean),
            fmt_sig(r.min),
            fmt_sig(r.mean),
            fmt_sig(r.max)
        ));
        println!(
            "size {}: fast-forward {} random [{}, {}]",
            f.size,
            fmt_sig(f.mean),
            fmt_sig(r.min),
            fmt_sig(r.max)
        );
    }
    std::fs::write(out, body).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
