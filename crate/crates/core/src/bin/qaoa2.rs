//! Command-line interface: solving single instances, benchmarking method
//! suites, building offline datasets, training the evaluator/generator,
//! test-time adaptation, and noise studies.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use qaoa2::bench::{evaluate_suite, paired_t_test, resolve_opt, ResultTable};
use qaoa2::gen::dataset::{build_offline_dataset, load_samples, save_samples, FixedTopStrategy};
use qaoa2::gen::evaluator::EvaluatorNet;
use qaoa2::gen::generator::{GeneratorNet, GeneratorStrategy};
use qaoa2::gen::training::{train_evaluator, train_generator, EvalTrainConfig, GenTrainConfig};
use qaoa2::gen::tta::{tta_adapt, TtaConfig};
use qaoa2::graph::{
    parse_edge_list, parse_qubo, performance_ratio, qubo_to_maxcut, BestKnownTable, WeightedGraph,
};
use qaoa2::nn::Checkpoint;
use qaoa2::partition::Partitioner;
use qaoa2::sim::NoiseSpec;
use qaoa2::solver::{recursive_solve, HeuristicStrategy, PartitionPlan, PartitionStrategy, SolveConfig};
use qaoa2::{Error, Result};

/// Environment variable naming the default data directory for outputs.
const DATA_DIR_ENV: &str = "QAOA2_DATA_DIR";

#[derive(Parser)]
#[command(name = "qaoa2", about = "Recursive divide-and-conquer QAOA MaxCut/QUBO solver", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum InstanceFormat {
    /// "N M" header plus 1-based weighted edges.
    Edgelist,
    /// "n" header plus i j q coefficient triplets.
    Qubo,
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// Subgraph qubit budget (maximum nodes per partition).
    #[arg(long, default_value_t = 10)]
    max_nodes: usize,
    /// QAOA circuit depth.
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Gradient steps per subgraph angle optimization.
    #[arg(long, default_value_t = 20)]
    steps: usize,
    /// Angle optimization learning rate.
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Measurement shots per subgraph readout.
    #[arg(long, default_value_t = 1000)]
    shots: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Brute-force the final recursion level instead of QAOA (debugging).
    #[arg(long)]
    exact_merge: bool,
    /// Optimize angles on shot-sampled expectations instead of exact ones.
    #[arg(long)]
    shot_noise_opt: bool,
    /// Bit-phase flip probability applied to readout samples.
    #[arg(long, default_value_t = 0.0)]
    readout_p: f64,
}

impl SolveArgs {
    fn to_config(&self) -> Result<SolveConfig> {
        let cfg = SolveConfig {
            max_nodes: self.max_nodes,
            p: self.p,
            steps: self.steps,
            lr: self.lr,
            shots: self.shots,
            noise: NoiseSpec {
                shots: if self.shot_noise_opt { Some(self.shots) } else { None },
                readout_bitphase_p: self.readout_p,
            },
            seed: self.seed,
            ..SolveConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print a JSON report.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = InstanceFormat::Edgelist)]
        format: InstanceFormat,
        /// random | modularity | boundary | kl | gen
        #[arg(long, default_value = "modularity")]
        partitioner: String,
        /// Generator checkpoint (required for --partitioner gen).
        #[arg(long)]
        generator: Option<PathBuf>,
        /// Disable edge-weight scaling inside attention layers.
        #[arg(long)]
        gnn_unweighted: bool,
        /// CSV of best-known cut values for ratio reporting.
        #[arg(long)]
        best_known: Option<PathBuf>,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Benchmark several methods over an instance directory.
    Evaluate {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_enum, default_value_t = InstanceFormat::Edgelist)]
        format: InstanceFormat,
        /// Comma-separated methods from {random,modularity,boundary,kl,gen}.
        #[arg(long, default_value = "random,modularity,boundary,kl")]
        methods: String,
        #[arg(long)]
        generator: Option<PathBuf>,
        #[arg(long)]
        gnn_unweighted: bool,
        /// Independent solver runs per instance and method.
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long)]
        best_known: Option<PathBuf>,
        /// Report path stem (.csv and .json are appended).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report a one-sided paired t-test of this method pair, e.g. "gen,kl".
        #[arg(long)]
        t_test: Option<String>,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Build a labeled offline dataset from heuristic partitions.
    GenDataset {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_enum, default_value_t = InstanceFormat::Edgelist)]
        format: InstanceFormat,
        #[arg(long, default_value_t = 70)]
        runs_per_heuristic: usize,
        /// Output JSON-lines file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Train the surrogate evaluator on an offline dataset.
    TrainEvaluator {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_enum, default_value_t = InstanceFormat::Edgelist)]
        format: InstanceFormat,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 5e-4)]
        weight_decay: f64,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        gnn_unweighted: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the generator against a frozen evaluator checkpoint.
    TrainGenerator {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, value_enum, default_value_t = InstanceFormat::Edgelist)]
        format: InstanceFormat,
        #[arg(long)]
        evaluator: PathBuf,
        #[arg(long, default_value_t = 1500)]
        epochs: usize,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long, default_value_t = 4e-3)]
        lr: f64,
        #[arg(long, default_value_t = 5e-4)]
        weight_decay: f64,
        #[arg(long, default_value_t = 10)]
        max_nodes: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        gnn_unweighted: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test-time adapt the generator to one instance, then solve with it.
    Adapt {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = InstanceFormat::Edgelist)]
        format: InstanceFormat,
        #[arg(long)]
        generator: PathBuf,
        #[arg(long)]
        evaluator: PathBuf,
        /// Adaptation gradient steps (ceiling 1000).
        #[arg(long, default_value_t = 64)]
        tta_steps: usize,
        #[arg(long)]
        best_known: Option<PathBuf>,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Re-render report artifacts from a saved JSON table.
    Report {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare mean ratio across readout noise levels.
    NoiseEval {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = InstanceFormat::Edgelist)]
        format: InstanceFormat,
        #[arg(long, default_value = "modularity")]
        partitioner: String,
        /// Comma-separated bit-phase flip probabilities.
        #[arg(long, default_value = "0.0,0.05")]
        noise_levels: String,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long)]
        best_known: Option<PathBuf>,
        #[command(flatten)]
        solve: SolveArgs,
    },
}

fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn default_out(name: &str) -> PathBuf {
    data_dir().join(name)
}

/// Parse one instance file. QUBO files are reduced to MaxCut; the returned
/// offset satisfies objective = offset - cut.
fn load_instance(path: &Path, format: InstanceFormat) -> Result<(WeightedGraph, Option<f64>)> {
    let text = std::fs::read_to_string(path)?;
    match format {
        InstanceFormat::Edgelist => Ok((parse_edge_list(&text)?, None)),
        InstanceFormat::Qubo => {
            let qubo = parse_qubo(&text)?;
            let (g, offset) = qubo_to_maxcut(&qubo)?;
            Ok((g, Some(offset)))
        }
    }
}

/// Load every regular file in a directory as an instance, keyed by file
/// name.
fn load_instance_dir(dir: &Path, format: InstanceFormat) -> Result<Vec<(String, WeightedGraph)>> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Bench(format!("no instance files in {}", dir.display())));
    }
    names
        .into_iter()
        .map(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("instance").to_string();
            let (g, _) = load_instance(&p, format)?;
            Ok((name, g))
        })
        .collect()
}

fn load_best_known(path: &Option<PathBuf>) -> Result<BTreeMap<String, f64>> {
    match path {
        Some(p) => Ok(BestKnownTable::load(p)?.to_map()),
        None => Ok(BTreeMap::new()),
    }
}

fn load_generator(path: &Path, gnn_unweighted: bool) -> Result<GeneratorNet> {
    let mut net = GeneratorNet::from_checkpoint(&Checkpoint::load(path)?)?;
    if gnn_unweighted {
        net.weighted = false;
    }
    Ok(net)
}

/// Resolve a method name to a boxed strategy.
fn build_strategy(
    name: &str,
    generator: &Option<PathBuf>,
    gnn_unweighted: bool,
) -> Result<Box<dyn PartitionStrategy>> {
    if name == "gen" {
        let path = generator
            .as_ref()
            .ok_or_else(|| Error::Bench("--partitioner gen requires --generator <checkpoint>".into()))?;
        return Ok(Box::new(GeneratorStrategy { net: load_generator(path, gnn_unweighted)? }));
    }
    let which: Partitioner = name.parse()?;
    Ok(Box::new(HeuristicStrategy(which)))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn instance_name(path: &Path) -> String {
    path.file_name().and_then(|n| n.to_str()).unwrap_or("instance").to_string()
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Solve { instance, format, partitioner, generator, gnn_unweighted, best_known, solve } => {
            let cfg = solve.to_config()?;
            let (g, offset) = load_instance(&instance, format)?;
            let strategy = build_strategy(&partitioner, &generator, gnn_unweighted)?;
            let mut report = recursive_solve(&g, strategy.as_ref(), &cfg)?;
            let table = load_best_known(&best_known)?;
            if let Ok(opt) = resolve_opt(&instance_name(&instance), &g, &table) {
                report.ratio = Some(performance_ratio(report.cut, opt, g.negative_weight())?);
            }
            let mut payload = serde_json::to_value(&report)?;
            if let Some(offset) = offset {
                payload["qubo_objective"] = serde_json::json!(offset - report.cut);
            }
            print_json(&payload)
        }
        Command::Evaluate {
            instances,
            format,
            methods,
            generator,
            gnn_unweighted,
            runs,
            best_known,
            out,
            t_test,
            solve,
        } => {
            let cfg = solve.to_config()?;
            let suite = load_instance_dir(&instances, format)?;
            let table = load_best_known(&best_known)?;
            let method_names: Vec<String> = methods.split(',').map(|s| s.trim().to_string()).collect();
            let strategies: Vec<(String, Box<dyn PartitionStrategy>)> = method_names
                .iter()
                .map(|m| Ok((m.clone(), build_strategy(m, &generator, gnn_unweighted)?)))
                .collect::<Result<_>>()?;
            let method_refs: Vec<(&str, &dyn PartitionStrategy)> =
                strategies.iter().map(|(n, s)| (n.as_str(), s.as_ref())).collect();
            let result = evaluate_suite(&suite, &method_refs, &cfg, runs, &table)?;
            let stem = out.unwrap_or_else(|| default_out("report"));
            result.write_report(&stem)?;
            eprintln!("report written to {}.csv / .json", stem.display());
            for (m, mean) in result.method_means() {
                println!("{m}: mean ratio {mean:.4}");
            }
            if let Some(pair) = t_test {
                let (a, b) = pair
                    .split_once(',')
                    .ok_or_else(|| Error::Bench("--t-test expects \"methodA,methodB\"".into()))?;
                let p = paired_t_test(&result.method_column(a.trim())?, &result.method_column(b.trim())?)?;
                println!("one-sided paired t-test {a} > {b}: p = {p:.6}");
            }
            Ok(())
        }
        Command::GenDataset { instances, format, runs_per_heuristic, out, solve } => {
            let cfg = solve.to_config()?;
            let suite = load_instance_dir(&instances, format)?;
            let samples = build_offline_dataset(&suite, &cfg, runs_per_heuristic, cfg.seed)?;
            let path = out.unwrap_or_else(|| default_out("offline.jsonl"));
            save_samples(&path, &samples)?;
            eprintln!("{} samples written to {}", samples.len(), path.display());
            Ok(())
        }
        Command::TrainEvaluator {
            dataset,
            instances,
            format,
            epochs,
            batch,
            lr,
            weight_decay,
            p,
            seed,
            gnn_unweighted,
            out,
        } => {
            let suite = load_instance_dir(&instances, format)?;
            let samples = load_samples(&dataset)?;
            let mut net = EvaluatorNet::new(p, seed);
            net.weighted = !gnn_unweighted;
            let cfg = EvalTrainConfig { batch, lr, weight_decay, epochs, seed, ..EvalTrainConfig::default() };
            let log = train_evaluator(&mut net, &suite, &samples, &cfg)?;
            for e in &log.epochs {
                eprintln!("epoch {:>4}  train mse {:.6}  val mse {:.6}  lr {:.2e}", e.epoch, e.train, e.val, e.lr);
            }
            println!("best val mse {:.6} at epoch {}", log.best_metric, log.best_epoch);
            let path = out.unwrap_or_else(|| default_out("evaluator.json"));
            net.to_checkpoint().save(&path)?;
            eprintln!("checkpoint written to {}", path.display());
            Ok(())
        }
        Command::TrainGenerator {
            instances,
            format,
            evaluator,
            epochs,
            batch,
            lr,
            weight_decay,
            max_nodes,
            seed,
            gnn_unweighted,
            out,
        } => {
            let suite = load_instance_dir(&instances, format)?;
            let eval_net = EvaluatorNet::from_checkpoint(&Checkpoint::load(&evaluator)?)?;
            let mut gen = GeneratorNet::new(eval_net.p, seed);
            gen.weighted = !gnn_unweighted;
            let cfg = GenTrainConfig { batch, lr, weight_decay, epochs, max_nodes, seed, ..GenTrainConfig::default() };
            let log = train_generator(&mut gen, &eval_net, &suite, &cfg)?;
            for e in &log.epochs {
                eprintln!("epoch {:>4}  mean rho-hat {:.6}  lr {:.2e}", e.epoch, e.train, e.lr);
            }
            println!("best mean rho-hat {:.6} at epoch {}", log.best_metric, log.best_epoch);
            let path = out.unwrap_or_else(|| default_out("generator.json"));
            gen.to_checkpoint().save(&path)?;
            eprintln!("checkpoint written to {}", path.display());
            Ok(())
        }
        Command::Adapt { instance, format, generator, evaluator, tta_steps, best_known, solve } => {
            let cfg = solve.to_config()?;
            let (g, _) = load_instance(&instance, format)?;
            let gen = GeneratorNet::from_checkpoint(&Checkpoint::load(&generator)?)?;
            let eval_net = EvaluatorNet::from_checkpoint(&Checkpoint::load(&evaluator)?)?;
            let tta_cfg = TtaConfig { steps: tta_steps, max_nodes: cfg.max_nodes, ..TtaConfig::default() };
            let adapted = tta_adapt(&gen, &eval_net, &g, &tta_cfg)?;
            let plan = PartitionPlan {
                part: adapted.part.clone(),
                angles: Some(adapted.angles.clone()),
                pin_angles: false,
                used_fallback: false,
            };
            let strategy = FixedTopStrategy::with_inner(plan, GeneratorStrategy { net: gen });
            let mut report = recursive_solve(&g, &strategy, &cfg)?;
            let table = load_best_known(&best_known)?;
            if let Ok(opt) = resolve_opt(&instance_name(&instance), &g, &table) {
                report.ratio = Some(performance_ratio(report.cut, opt, g.negative_weight())?);
            }
            let payload = serde_json::json!({
                "best_rho_hat": adapted.best_rho_hat,
                "best_step": adapted.best_step,
                "trajectory": adapted.trajectory,
                "partition": adapted.part.assignment,
                "report": report,
            });
            print_json(&payload)
        }
        Command::Report { table, out } => {
            let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&table)?)?;
            let parsed: ResultTable = serde_json::from_value(json["table"].clone())
                .map_err(|e| Error::Bench(format!("not a report JSON: {e}")))?;
            let stem = out.unwrap_or_else(|| default_out("report"));
            parsed.write_report(&stem)?;
            eprintln!("report written to {}.csv / .json", stem.display());
            Ok(())
        }
        Command::NoiseEval { instance, format, partitioner, noise_levels, runs, best_known, solve } => {
            let (g, _) = load_instance(&instance, format)?;
            let strategy = build_strategy(&partitioner, &None, false)?;
            let table = load_best_known(&best_known)?;
            let opt = resolve_opt(&instance_name(&instance), &g, &table)?;
            let neg = g.negative_weight();
            for level in noise_levels.split(',') {
                let p: f64 = level
                    .trim()
                    .parse()
                    .map_err(|_| Error::Bench(format!("bad noise level {level:?}")))?;
                let mut args = solve.clone();
                args.readout_p = p;
                let cfg = args.to_config()?;
                let mut total = 0.0;
                for run in 0..runs {
                    let mut run_cfg = cfg.clone();
                    run_cfg.seed = qaoa2::bench::run_seed(cfg.seed, &instance_name(&instance), run);
                    let report = recursive_solve(&g, strategy.as_ref(), &run_cfg)?;
                    total += performance_ratio(report.cut, opt, neg)?;
                }
                println!("readout_p {p}: mean ratio {:.4} over {runs} runs", total / runs as f64);
            }
            Ok(())
        }
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
