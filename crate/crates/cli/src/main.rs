use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use indnet::benders::{solve_benders, CutSource, PartialConfig, Selection, Stabilization};
use indnet::formulation::{build_ind, check_feasibility, DesignSolution};
use indnet::instance::{generate_synthetic, load_instance, save_instance, SizeClass, TransitInstance};
use indnet::lp::solve_lp_relaxation;
use indnet::mip::{MipLimits, SolveStats, Termination};
use indnet::oracle::{enumerate_designs_capped, solve_exact};
use indnet::report::{
    render_design, to_csv, to_table, CutCounts, Method, RunRecord, SolutionFile, RUN_RECORD_VERSION,
    SOLUTION_FILE_VERSION,
};
use indnet::solve::{solve_direct, solve_sequential};

#[derive(Parser)]
#[command(name = "indnet", version, about = "Joint rapid/slow transit line design")]
struct Cli {
    /// Log progress lines (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveMethod {
    Direct,
    Benders,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(clap::Args)]
struct LimitArgs {
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<usize>,
}

impl LimitArgs {
    fn limits(&self) -> MipLimits {
        MipLimits {
            time: self.time_limit,
            nodes: self.node_limit,
            ..MipLimits::default()
        }
    }
}

#[derive(clap::Args)]
struct OutputArgs {
    /// Run record path [default: <instance>-<method>.record.json].
    #[arg(long)]
    record: Option<PathBuf>,
    /// Also write the design and routes here.
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check an instance file.
    Validate { file: PathBuf },
    /// Generate a synthetic instance.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "tiny")]
        size: SizeClass,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Keep pairs with demand at least G; several thresholds print a count ladder.
    Filter {
        file: PathBuf,
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
        min_demand: Vec<f64>,
        /// Write the filtered instance (single threshold only).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve with the direct MILP or branch-and-Benders-cut.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "direct")]
        method: SolveMethod,
        /// Share of pairs kept in the Benders master.
        #[arg(long, default_value_t = 0.0)]
        percentage: f64,
        /// Pair selection: 1 random, 2 highest demand, 3 lowest demand.
        #[arg(long = "type", default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
        selection: u8,
        /// In-out stabilization weight.
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Seed for random pair selection.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one JSON line per Benders cut.
        #[arg(long)]
        cut_log: Option<PathBuf>,
        #[command(flatten)]
        limits: LimitArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Rapid line first, then the slow line with the rapid line fixed.
    Sequential {
        file: PathBuf,
        #[command(flatten)]
        limits: LimitArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Exhaustive optimum (tiny instances only).
    Oracle {
        file: PathBuf,
        /// Largest design space to enumerate.
        #[arg(long, default_value_t = indnet::oracle::DEFAULT_CAP)]
        cap: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Tabulate run records.
    Report {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Draw a solution as SVG.
    Plot {
        solution: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Instance file, if the solution does not record a usable path.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Solve the LP relaxation of the full model.
    Lp { file: PathBuf },
    /// Write the full model in MPS format.
    Export {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    /// Exit 1: infeasible, invalid or no solution found.
    Negative(String),
    /// Exit 2: bad input.
    Usage(String),
    /// Exit 3.
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

type Res = Result<(), Failure>;

fn load(path: &Path) -> Result<TransitInstance, Failure> {
    load_instance(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Res {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Internal)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{}", x + 0.0))
}

fn summary(stats: &SolveStats) -> String {
    let gap = match stats.gap {
        Some(g) if stats.obj_v.is_some() => format!("{g:.2}%"),
        _ => "-".into(),
    };
    format!(
        "obj_v={} bound={:.4} gap={gap} nodes={} cuts={} t={:.2} status={:?}",
        fmt_opt(stats.obj_v),
        stats.bound,
        stats.nodes,
        stats.n_cuts,
        stats.t,
        stats.termination
    )
}

/// Shared tail of solve/sequential/oracle: check, print, write files.
fn finish(
    path: &Path,
    inst: &TransitInstance,
    method: Method,
    record: RunRecord,
    solution: Option<&DesignSolution>,
    out: &OutputArgs,
) -> Res {
    println!("{}", summary(&record.stats));
    if let Some(sol) = solution {
        let report = check_feasibility(inst, sol);
        if !report.all_passed() {
            return Err(Failure::Internal(anyhow::anyhow!(
                "solution fails checks: {:?}",
                report.failed()
            )));
        }
        let c = &sol.stats;
        println!(
            "covered demand R={} S={} RS={} pairs R={} S={} RS={}",
            c.demand_r, c.demand_s, c.demand_rs, c.pairs_r, c.pairs_s, c.pairs_rs
        );
    }
    let rec_path = out
        .record
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}-{}.record.json", inst.name, method.label())));
    write(&rec_path, &record.to_json())?;
    if let (Some(p), Some(sol)) = (&out.solution, solution) {
        let file = SolutionFile {
            schema_version: SOLUTION_FILE_VERSION,
            instance: inst.name.clone(),
            instance_path: Some(path.display().to_string()),
            method,
            solution: sol.clone(),
        };
        write(p, &file.to_json())?;
    }
    if solution.is_none() {
        return Err(Failure::Negative(match record.stats.termination {
            Termination::Infeasible => "infeasible".into(),
            t => format!("no solution found ({t:?})"),
        }));
    }
    Ok(())
}

fn run(cli: Cli) -> Res {
    match cli.cmd {
        Cmd::Validate { file } => match load_instance(&file) {
            Ok(inst) => {
                println!(
                    "ok: {} nodes, {} edges, {} centroids, {} pairs",
                    inst.nodes.len(),
                    inst.edges.len(),
                    inst.centroids.len(),
                    inst.num_pairs()
                );
                Ok(())
            }
            Err(e) => Err(Failure::Negative(format!("{}: {e}", file.display()))),
        },
        Cmd::Gen { seed, size, output } => {
            let inst = generate_synthetic(seed, size).context("generating").map_err(Failure::Internal)?;
            save_instance(&inst, &output)
                .with_context(|| format!("writing {}", output.display()))
                .map_err(Failure::Internal)?;
            println!("{}: {} pairs", inst.name, inst.num_pairs());
            Ok(())
        }
        Cmd::Filter {
            file,
            min_demand,
            output,
        } => {
            let inst = load(&file)?;
            if output.is_some() && min_demand.len() != 1 {
                return Err(Failure::Usage("--output needs exactly one --min-demand value".into()));
            }
            println!("min_demand,pairs");
            for &g in &min_demand {
                let f = inst.filter_by_demand(g);
                println!("{g},{}", f.num_pairs());
                if let Some(out) = &output {
                    save_instance(&f, out)
                        .with_context(|| format!("writing {}", out.display()))
                        .map_err(Failure::Internal)?;
                }
            }
            Ok(())
        }
        Cmd::Solve {
            file,
            method,
            percentage,
            selection,
            lambda,
            seed,
            cut_log,
            limits,
            out,
        } => {
            if !(0.0..=100.0).contains(&percentage) {
                return Err(Failure::Usage("--percentage must be within 0..=100".into()));
            }
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Failure::Usage("--lambda must be within 0..=1".into()));
            }
            let inst = load(&file)?;
            let limits = limits.limits();
            match method {
                SolveMethod::Direct => {
                    let o = solve_direct(&inst, &limits).map_err(|e| Failure::Internal(e.into()))?;
                    let record = RunRecord {
                        schema_version: RUN_RECORD_VERSION,
                        instance: inst.name.clone(),
                        method: Method::Direct,
                        partial: None,
                        lambda: None,
                        limits,
                        stats: o.stats.clone(),
                        benders_cuts: None,
                        coverage: o.solution.as_ref().map(|s| s.stats),
                    };
                    finish(&file, &inst, Method::Direct, record, o.solution.as_ref(), &out)
                }
                SolveMethod::Benders => {
                    let cfg = PartialConfig {
                        percentage,
                        selection: Selection::from_code(selection).expect("range-checked"),
                        seed,
                    };
                    let stab = Stabilization {
                        lambda,
                        ..Stabilization::default()
                    };
                    let b = solve_benders(&inst, &cfg, &stab, &limits).map_err(|e| Failure::Internal(e.into()))?;
                    if let Some(p) = &cut_log {
                        let lines: String = b
                            .cuts
                            .iter()
                            .map(|c| serde_json::to_string(c).expect("cuts serialize") + "\n")
                            .collect();
                        write(p, &lines)?;
                    }
                    let counts = CutCounts {
                        lazy: b.cuts.iter().filter(|c| c.source == CutSource::Lazy).count(),
                        user: b.cuts.iter().filter(|c| c.source == CutSource::User).count(),
                    };
                    let record = RunRecord {
                        schema_version: RUN_RECORD_VERSION,
                        instance: inst.name.clone(),
                        method: Method::Benders,
                        partial: Some(cfg),
                        lambda: Some(lambda),
                        limits,
                        stats: b.outcome.stats.clone(),
                        benders_cuts: Some(counts),
                        coverage: b.outcome.solution.as_ref().map(|s| s.stats),
                    };
                    finish(&file, &inst, Method::Benders, record, b.outcome.solution.as_ref(), &out)
                }
            }
        }
        Cmd::Sequential { file, limits, out } => {
            let inst = load(&file)?;
            let limits = limits.limits();
            let o = solve_sequential(&inst, &limits).map_err(|e| Failure::Internal(e.into()))?;
            if let Some(r) = &o.rapid {
                println!("stage 1: obj_v={} rapid edges {:?}", fmt_opt(o.stage1.obj_v), r.edges);
            }
            let solution = o.stage2.as_ref().and_then(|s| s.solution.clone());
            let record = RunRecord {
                schema_version: RUN_RECORD_VERSION,
                instance: inst.name.clone(),
                method: Method::Sequential,
                partial: None,
                lambda: None,
                limits,
                stats: o.stats(),
                benders_cuts: None,
                coverage: solution.as_ref().map(|s| s.stats),
            };
            finish(&file, &inst, Method::Sequential, record, solution.as_ref(), &out)
        }
        Cmd::Oracle { file, cap, out } => {
            let inst = load(&file)?;
            let start = std::time::Instant::now();
            let space = enumerate_designs_capped(&inst, cap).map_err(|e| Failure::Usage(e.to_string()))?;
            println!("designs: {}", space.len());
            let solved = solve_exact(&inst);
            let (v, sol) = match solved {
                Ok(x) => (Some(x.0), Some(x.1)),
                Err(indnet::oracle::OracleError::NoDesign) => (None, None),
                Err(e) => return Err(Failure::Usage(e.to_string())),
            };
            let stats = SolveStats {
                t: start.elapsed().as_secs_f64(),
                nodes: space.len(),
                n_cuts: 0,
                lazy_cuts: 0,
                user_cuts: 0,
                obj_v: v,
                bound: v.unwrap_or(f64::NEG_INFINITY),
                gap: v.map(|_| 0.0),
                lp_iterations: 0,
                termination: if v.is_some() {
                    Termination::Optimal
                } else {
                    Termination::Infeasible
                },
            };
            let record = RunRecord {
                schema_version: RUN_RECORD_VERSION,
                instance: inst.name.clone(),
                method: Method::Oracle,
                partial: None,
                lambda: None,
                limits: MipLimits::default(),
                stats,
                benders_cuts: None,
                coverage: sol.as_ref().map(|s| s.stats),
            };
            finish(&file, &inst, Method::Oracle, record, sol.as_ref(), &out)
        }
        Cmd::Report { records, format } => {
            let mut recs = Vec::new();
            for p in &records {
                let text = fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
                recs.push(RunRecord::from_json(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?);
            }
            print!(
                "{}",
                match format {
                    Format::Table => to_table(&recs),
                    Format::Csv => to_csv(&recs),
                }
            );
            Ok(())
        }
        Cmd::Plot {
            solution,
            output,
            instance,
        } => {
            let text =
                fs::read_to_string(&solution).map_err(|e| Failure::Usage(format!("{}: {e}", solution.display())))?;
            let sol = SolutionFile::from_json(&text).map_err(|e| Failure::Usage(format!("{}: {e}", solution.display())))?;
            let inst_path = match instance.or_else(|| sol.instance_path.as_ref().map(PathBuf::from)) {
                Some(p) => p,
                None => return Err(Failure::Usage("the solution names no instance; pass --instance".into())),
            };
            let inst = load(&inst_path)?;
            write(&output, &render_design(&inst, &sol.solution))
        }
        Cmd::Lp { file } => {
            let inst = load(&file)?;
            let m = build_ind(&inst).map_err(|e| Failure::Usage(e.to_string()))?;
            let out = solve_lp_relaxation(&m.model);
            println!(
                "status={:?} obj={:.6} rows={} cols={} iterations={}",
                out.status,
                out.objective,
                m.model.num_rows(),
                m.model.num_cols(),
                out.iterations
            );
            if out.is_optimal() {
                Ok(())
            } else {
                Err(Failure::Negative(format!("{:?}", out.status)))
            }
        }
        Cmd::Export { file, output } => {
            let inst = load(&file)?;
            let m = build_ind(&inst).map_err(|e| Failure::Usage(e.to_string()))?;
            write(&output, &m.model.to_mps())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Negative(msg)) => {
            eprintln!("indnet: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("indnet: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("indnet: internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}
