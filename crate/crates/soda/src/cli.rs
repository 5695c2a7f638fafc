//! Command-line interface. Thin: every subcommand parses flags, calls the
//! library, prints a summary, and maps the result to an exit code:
//! 0 = success, 1 = negative algorithmic verdict (solver failure, no stable
//! matching, unstable), 2 = input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::engine::{solve, Permutation, SodaOutcome, SolveMode};
use crate::experiments::{
    self, default_budget, graph_diagnostics_sweep, rank_histogram, success_rate_sweep,
    truthfulness_probe, ExperimentConfig,
};
use crate::gen::{generate_market, CoupleRule, GenParams};
use crate::influence::{
    build_all_trees, build_couples_graph, find_cycle, topological_insertion_order,
    weakly_connected_components,
};
use crate::io;
use crate::matching::find_blocks;
use crate::oracle::{exhaustive_stability_oracle, EnumOrder, OracleVerdict, DEFAULT_ORACLE_BUDGET};
use crate::pessimistic::l_pessimistic_da;
use crate::rng;

#[derive(Parser)]
#[command(
    name = "soda",
    version,
    about = "Stable matching with couples: generate, solve, check, analyze, and experiment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Classic,
    BackwardEdge,
    Direct,
}

impl From<ModeArg> for SolveMode {
    fn from(m: ModeArg) -> SolveMode {
        match m {
            ModeArg::Classic => SolveMode::Classic,
            ModeArg::BackwardEdge => SolveMode::BackwardEdge,
            ModeArg::Direct => SolveMode::Direct,
        }
    }
}

#[derive(Args)]
struct CoupleCountArgs {
    /// Exact couple count.
    #[arg(long)]
    couples: Option<usize>,
    /// Couples = n^(1-epsilon).
    #[arg(long, conflicts_with = "couples")]
    epsilon: Option<f64>,
    /// Couples = alpha * n.
    #[arg(long, conflicts_with_all = ["couples", "epsilon"])]
    alpha: Option<f64>,
}

impl CoupleCountArgs {
    fn rule(&self) -> CoupleRule {
        if let Some(c) = self.couples {
            CoupleRule::Count(c)
        } else if let Some(e) = self.epsilon {
            CoupleRule::Power(e)
        } else if let Some(a) = self.alpha {
            CoupleRule::Fraction(a)
        } else {
            CoupleRule::Count(0)
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random market file.
    Generate {
        /// Number of single doctors.
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        couple_count: CoupleCountArgs,
        /// Excess-position ratio (positions >= lambda * n).
        #[arg(long, default_value_t = 1.5)]
        lambda: f64,
        /// Uniform hospital capacity.
        #[arg(long, default_value_t = 3)]
        capacity: u32,
        /// Explicit hospital count (overrides lambda).
        #[arg(long)]
        hospitals: Option<usize>,
        /// Hospital quality scores with rejection-sampled doctor draws.
        #[arg(long)]
        fitness: bool,
        /// Cap on single preference lists (default: all hospitals).
        #[arg(long)]
        single_list_cap: Option<usize>,
        /// Cap on couple pair lists.
        #[arg(long, default_value_t = 200)]
        couple_list_cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output market file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a market file for a stable matching.
    Solve {
        market: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Classic)]
        mode: ModeArg,
        /// Initial couple order: "index", "random", or comma-separated list.
        #[arg(long, default_value = "index")]
        pi: String,
        /// Seed for --pi random.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output matching file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the run trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check a matching file for stability against its market.
    Check { market: PathBuf, matching: PathBuf },
    /// Influence trees, couples graph, and insertion-order diagnostics.
    Analyze {
        market: PathBuf,
        /// Rejection budget (default: ceil(4/epsilon) from metadata, else 4).
        #[arg(long)]
        r: Option<i64>,
        /// Write the influence forest as JSON.
        #[arg(long)]
        trees_out: Option<PathBuf>,
        /// Write the couples graph in DOT format.
        #[arg(long)]
        graph_out: Option<PathBuf>,
    },
    /// Exhaustively decide whether any stable matching exists (tiny markets).
    Oracle {
        market: PathBuf,
        /// Candidate budget.
        #[arg(long, default_value_t = DEFAULT_ORACLE_BUDGET)]
        budget: u64,
    },
    /// Run the randomized l-pessimistic application process.
    Pessimistic {
        market: PathBuf,
        /// Assignments per player.
        #[arg(long, default_value_t = 3)]
        l: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte Carlo studies with CSV output.
    Experiment {
        #[arg(long, value_enum)]
        op: ExperimentOp,
        /// Sweep axis, comma separated (e.g. 500,1000,2000).
        #[arg(long, value_delimiter = ',', default_value = "500")]
        n: Vec<usize>,
        /// Couple percentages of n, comma separated (e.g. 1,5,10).
        #[arg(long, value_delimiter = ',')]
        couples_pct: Vec<f64>,
        /// Couples = n^(1-epsilon).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Couples = alpha * n.
        #[arg(long)]
        alpha: Option<f64>,
        /// Exact couple count.
        #[arg(long)]
        couples: Option<usize>,
        #[arg(long, default_value_t = 600)]
        trials: usize,
        #[arg(long, default_value_t = 1.5)]
        lambda: f64,
        #[arg(long, default_value_t = 3)]
        capacity: u32,
        #[arg(long)]
        hospitals: Option<usize>,
        #[arg(long)]
        fitness: bool,
        #[arg(long, value_enum, default_value_t = ModeArg::Classic)]
        mode: ModeArg,
        /// Influence budget for graph diagnostics.
        #[arg(long)]
        r: Option<i64>,
        /// Misreports sampled per population per trial.
        #[arg(long, default_value_t = 5)]
        deviations: usize,
        #[arg(long)]
        single_list_cap: Option<usize>,
        #[arg(long, default_value_t = 200)]
        couple_list_cap: usize,
        /// Desk-scale budget: larger sweep points are scaled down.
        #[arg(long)]
        max_n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dump raw per-trial records (first sweep point) as JSON lines.
        #[arg(long)]
        raw_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentOp {
    SuccessSweep,
    RankHistogram,
    Truthfulness,
    GraphDiagnostics,
}

/// 0 = success, 1 = negative verdict, 2 = input error.
pub fn run() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn write_or_print(path: &Option<PathBuf>, content: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Generate {
            n,
            couple_count,
            lambda,
            capacity,
            hospitals,
            fitness,
            single_list_cap,
            couple_list_cap,
            seed,
            out,
        } => {
            let mut p = GenParams::new(n, seed);
            p.couples = couple_count.rule();
            p.lambda = lambda;
            p.capacity = capacity;
            p.hospitals = hospitals;
            p.fitness = fitness;
            p.single_list_cap = single_list_cap;
            p.couple_list_cap = couple_list_cap;
            p.epsilon = couple_count.epsilon;
            // Explicitly requested caps that cannot be met are rejected
            // rather than silently clamped.
            let h_count = p.hospital_count();
            if couple_list_cap > h_count * h_count {
                return Err(format!(
                    "couple list cap {couple_list_cap} exceeds the {} distinct pairs",
                    h_count * h_count
                ));
            }
            if single_list_cap.is_some_and(|cap| cap > h_count) {
                return Err(format!(
                    "single list cap {} exceeds the {h_count} hospitals",
                    single_list_cap.unwrap()
                ));
            }
            let market = generate_market(&p).map_err(|e| e.to_string())?;
            println!(
                "generate: n={} couples={} hospitals={} capacity={} lambda={} fitness={} seed={}",
                n,
                market.couples().len(),
                market.n_hospitals(),
                capacity,
                lambda,
                fitness,
                seed
            );
            io::write_market(&market, &out).map_err(|e| e.to_string())?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve {
            market,
            mode,
            pi,
            seed,
            out,
            trace,
        } => {
            let m = io::read_market(&market).map_err(|e| e.to_string())?;
            let n_couples = m.couples().len();
            let pi0 = parse_pi(&pi, n_couples, seed)?;
            println!(
                "solve: market={} mode={} pi={:?} seed={}",
                market.display(),
                experiments::mode_label(mode.into()),
                pi0.as_slice(),
                seed
            );
            let report = solve(&m, pi0, mode.into());
            if let Some(path) = &trace {
                std::fs::write(path, io::trace_to_jsonl(&report.trace))
                    .map_err(|e| format!("{}: {e}", path.display()))?;
            }
            match &report.outcome {
                SodaOutcome::Stable {
                    matching,
                    final_permutation,
                    restarts,
                    ..
                } => {
                    println!(
                        "outcome: stable (restarts={}, final_pi={:?})",
                        restarts,
                        final_permutation.as_slice()
                    );
                    if let Some(path) = &out {
                        io::write_matching(&m, matching, path).map_err(|e| e.to_string())?;
                        println!("wrote {}", path.display());
                    }
                    Ok(ExitCode::SUCCESS)
                }
                other => {
                    println!("outcome: {}", other.tag());
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Check { market, matching } => {
            let m = io::read_market(&market).map_err(|e| e.to_string())?;
            let mu = io::read_matching(&m, &matching).map_err(|e| e.to_string())?;
            println!(
                "check: market={} matching={}",
                market.display(),
                matching.display()
            );
            let blocks = find_blocks(&m, &mu).map_err(|v| {
                v.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join("; ")
            })?;
            if blocks.is_empty() {
                println!("stable");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("unstable: {} blocks", blocks.len());
                for b in blocks.iter().take(20) {
                    println!("  {b:?}");
                }
                Ok(ExitCode::from(1))
            }
        }
        Command::Analyze {
            market,
            r,
            trees_out,
            graph_out,
        } => {
            let m = io::read_market(&market).map_err(|e| e.to_string())?;
            let r = r.unwrap_or_else(|| default_budget(m.params.as_ref().and_then(|p| p.epsilon)));
            println!("analyze: market={} r={}", market.display(), r);
            let mu_da = crate::engine::deferred_acceptance(&m);
            let trees = build_all_trees(&m, &mu_da, r).map_err(|e| e.to_string())?;
            let graph = build_couples_graph(&m, &trees).map_err(|e| e.to_string())?;
            let components = weakly_connected_components(&graph);
            let sizes: Vec<usize> = trees.iter().map(|t| t.entries.len()).collect();
            println!(
                "trees: {} built, max size {}, self-intersections {}",
                trees.len(),
                sizes.iter().max().copied().unwrap_or(0),
                trees.iter().filter(|t| t.self_intersection).count()
            );
            println!(
                "graph: {} edges, largest weak component {}",
                graph.edges.len(),
                components.iter().map(|c| c.len()).max().unwrap_or(0)
            );
            match find_cycle(&graph) {
                Some(cycle) => println!("cycle: {cycle:?}"),
                None => {
                    let order = topological_insertion_order(&graph).expect("acyclic");
                    println!("topological insertion order: {:?}", order.as_slice());
                }
            }
            if let Some(path) = &trees_out {
                std::fs::write(path, io::trees_to_json(&trees))
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                println!("wrote {}", path.display());
            }
            if let Some(path) = &graph_out {
                std::fs::write(path, graph.to_dot())
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { market, budget } => {
            let m = io::read_market(&market).map_err(|e| e.to_string())?;
            println!("oracle: market={} budget={}", market.display(), budget);
            let verdict = exhaustive_stability_oracle(&m, budget, EnumOrder::SinglesOuter)
                .map_err(|e| e.to_string())?;
            match verdict {
                OracleVerdict::Exists(_) => {
                    println!("exists");
                    Ok(ExitCode::SUCCESS)
                }
                OracleVerdict::None => {
                    println!("none");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Pessimistic { market, l, seed } => {
            let m = io::read_market(&market).map_err(|e| e.to_string())?;
            println!(
                "pessimistic: market={} l={} seed={}",
                market.display(),
                l,
                seed
            );
            let stats = l_pessimistic_da(&m, l, seed).map_err(|e| e.to_string())?;
            println!(
                "visited={} steps={} settled={:?} terminated={}",
                stats.visited_hospitals, stats.steps, stats.settled_histogram, stats.terminated
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment {
            op,
            n,
            couples_pct,
            epsilon,
            alpha,
            couples,
            trials,
            lambda,
            capacity,
            hospitals,
            fitness,
            mode,
            r,
            deviations,
            single_list_cap,
            couple_list_cap,
            max_n,
            seed,
            out,
            raw_out,
        } => {
            let mut rules: Vec<CoupleRule> = couples_pct
                .iter()
                .map(|&pct| CoupleRule::Fraction(pct / 100.0))
                .collect();
            if let Some(e) = epsilon {
                rules.push(CoupleRule::Power(e));
            }
            if let Some(a) = alpha {
                rules.push(CoupleRule::Fraction(a));
            }
            if let Some(c) = couples {
                rules.push(CoupleRule::Count(c));
            }
            if rules.is_empty() {
                rules.push(CoupleRule::Count(0));
            }
            let mut cfg = ExperimentConfig::new(seed);
            cfg.n_values = n;
            cfg.couple_rules = rules;
            cfg.trials = trials;
            cfg.lambda = lambda;
            cfg.capacity = capacity;
            cfg.hospitals = hospitals;
            cfg.fitness = fitness;
            cfg.mode = mode.into();
            cfg.r_override = r;
            cfg.single_list_cap = single_list_cap.or(Some(64));
            cfg.couple_list_cap = couple_list_cap;
            cfg.max_n = max_n;
            println!(
                "experiment: trials={} n={:?} mode={} seed={}",
                cfg.trials,
                cfg.n_values,
                experiments::mode_label(cfg.mode),
                cfg.seed_base
            );
            let csv = match op {
                ExperimentOp::SuccessSweep => success_rate_sweep(&cfg).csv,
                ExperimentOp::RankHistogram => rank_histogram(&cfg).csv,
                ExperimentOp::Truthfulness => truthfulness_probe(&cfg, deviations).csv,
                ExperimentOp::GraphDiagnostics => graph_diagnostics_sweep(&cfg).csv,
            };
            write_or_print(&out, &csv)?;
            if let Some(path) = &out {
                println!("wrote {}", path.display());
            }
            if let Some(path) = &raw_out {
                let records = experiments::raw_trials(&cfg, cfg.n_values[0], cfg.couple_rules[0]);
                std::fs::write(path, experiments::records_to_jsonl(&records))
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_pi(pi: &str, n_couples: usize, seed: u64) -> Result<Permutation, String> {
    match pi {
        "index" => Ok(Permutation::identity(n_couples)),
        "random" => {
            let mut rng = rng::rng_from(rng::derive_seed(seed, rng::stream::PERMUTATION, 0));
            Ok(Permutation::random(n_couples, &mut rng))
        }
        list => {
            let order: Vec<u32> = list
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<u32>()
                        .map_err(|_| format!("bad pi entry {tok:?}"))
                })
                .collect::<Result<_, _>>()?;
            if order.len() != n_couples {
                return Err(format!(
                    "pi has {} entries, market has {} couples",
                    order.len(),
                    n_couples
                ));
            }
            Permutation::new(order).ok_or_else(|| "pi is not a permutation".to_string())
        }
    }
}
