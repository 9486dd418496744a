//! Benchmark orchestration: suite splitting, multi-run evaluation, paired
//! significance testing, and CSV/JSON report generation.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::graph::{brute_force_opt, performance_ratio, WeightedGraph};
use crate::solver::{recursive_solve, PartitionStrategy, SolveConfig};

/// Largest instance brute-forced for OPT when no best-known value exists.
pub const BRUTE_FORCE_OPT_LIMIT: usize = 24;

/// FNV-1a 64-bit hash. Used wherever a stable, platform-independent hash
/// is needed (per-instance seeds, dataset graph fingerprints); std's
/// `DefaultHasher` is explicitly not stable across releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Reproducible per-run seed independent of scheduling order.
pub fn run_seed(base: u64, instance: &str, run: usize) -> u64 {
    let mut bytes = instance.as_bytes().to_vec();
    bytes.extend_from_slice(&(run as u64).to_le_bytes());
    base ^ fnv1a(&bytes)
}

/// Deterministic train/test split: instance IDs whose trailing numeric
/// suffix (after the last '.') is 1 or 2 are reserved for testing.
/// Unparseable names go to train; their names are returned as warnings.
pub fn split_suite(instances: &[String]) -> (Vec<String>, Vec<String>, Vec<String>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut warnings = Vec::new();
    for name in instances {
        match name.rsplit('.').next().and_then(|s| s.parse::<u64>().ok()) {
            Some(1) | Some(2) => test.push(name.clone()),
            Some(_) => train.push(name.clone()),
            None => {
                warnings.push(name.clone());
                train.push(name.clone());
            }
        }
    }
    (train, test, warnings)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CellStats {
    pub mean: f64,
    pub std: f64,
    pub mean_cut: f64,
    pub rank: usize,
    pub win: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceResult {
    pub instance: String,
    pub num_nodes: usize,
    pub opt: f64,
    /// One cell per method, aligned with `ResultTable::methods`.
    pub cells: Vec<CellStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultTable {
    pub methods: Vec<String>,
    pub rows: Vec<InstanceResult>,
    pub runs: usize,
    pub seed: u64,
    /// Tie policy note carried into every report.
    pub rank_policy: String,
}

/// Assign ranks (1-based, descending mean; ties share the minimum rank)
/// and win flags in place.
fn assign_ranks(cells: &mut [CellStats]) {
    let means: Vec<f64> = cells.iter().map(|c| c.mean).collect();
    for (i, cell) in cells.iter_mut().enumerate() {
        let better = means.iter().filter(|&&m| m > means[i]).count();
        cell.rank = better + 1;
        cell.win = cell.rank == 1;
    }
}

/// OPT for an instance: best-known table lookup, else brute force on
/// small graphs.
pub fn resolve_opt(name: &str, g: &WeightedGraph, best_known: &BTreeMap<String, f64>) -> Result<f64> {
    if let Some(&opt) = best_known.get(name) {
        return Ok(opt);
    }
    if g.num_nodes() <= BRUTE_FORCE_OPT_LIMIT {
        return Ok(brute_force_opt(g).0);
    }
    Err(Error::Bench(format!(
        "no best-known value for {name:?} and {} nodes exceeds the brute-force limit {BRUTE_FORCE_OPT_LIMIT}",
        g.num_nodes()
    )))
}

/// Evaluate every method on every instance with `runs` independent solver
/// runs each; aggregate mean/std shifted performance ratio, rank, and win
/// flags. Work is parallel over (instance, run) with seeds derived from
/// the instance name so scheduling cannot change results.
pub fn evaluate_suite(
    instances: &[(String, WeightedGraph)],
    methods: &[(&str, &dyn PartitionStrategy)],
    cfg: &SolveConfig,
    runs: usize,
    best_known: &BTreeMap<String, f64>,
) -> Result<ResultTable> {
    if runs == 0 {
        return Err(Error::Bench("runs must be >= 1".into()));
    }
    if methods.is_empty() {
        return Err(Error::Bench("no methods to evaluate".into()));
    }
    let mut rows = Vec::with_capacity(instances.len());
    for (name, g) in instances {
        let opt = resolve_opt(name, g, best_known)?;
        let neg = g.negative_weight();
        let mut cells = Vec::with_capacity(methods.len());
        for (_, strategy) in methods {
            let outcomes: Result<Vec<(f64, f64)>> = (0..runs)
                .into_par_iter()
                .map(|run| {
                    let mut run_cfg = cfg.clone();
                    run_cfg.seed = run_seed(cfg.seed, name, run);
                    let report = recursive_solve(g, *strategy, &run_cfg)?;
                    let rho = performance_ratio(report.cut, opt, neg)?;
                    Ok((rho, report.cut))
                })
                .collect();
            let outcomes = outcomes?;
            let n = outcomes.len() as f64;
            let mean = outcomes.iter().map(|o| o.0).sum::<f64>() / n;
            let var = if outcomes.len() > 1 {
                outcomes.iter().map(|o| (o.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let mean_cut = outcomes.iter().map(|o| o.1).sum::<f64>() / n;
            cells.push(CellStats { mean, std: var.sqrt(), mean_cut, rank: 0, win: false });
        }
        assign_ranks(&mut cells);
        rows.push(InstanceResult { instance: name.clone(), num_nodes: g.num_nodes(), opt, cells });
    }
    Ok(ResultTable {
        methods: methods.iter().map(|(n, _)| n.to_string()).collect(),
        rows,
        runs,
        seed: cfg.seed,
        rank_policy: "ties share the minimum rank".to_string(),
    })
}

impl ResultTable {
    /// Per-method mean of per-instance means (the headline aggregate).
    pub fn method_means(&self) -> Vec<(String, f64)> {
        self.methods
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let mean = self.rows.iter().map(|r| r.cells[j].mean).sum::<f64>() / self.rows.len() as f64;
                (m.clone(), mean)
            })
            .collect()
    }

    /// Per-instance mean column for one method (paired-test input).
    pub fn method_column(&self, method: &str) -> Result<Vec<f64>> {
        let j = self
            .methods
            .iter()
            .position(|m| m == method)
            .ok_or_else(|| Error::Bench(format!("unknown method {method:?}")))?;
        Ok(self.rows.iter().map(|r| r.cells[j].mean).collect())
    }

    /// CSV rendering: one row per instance x method. Deterministic for a
    /// given table (fixed float formatting, fixed ordering).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# runs={} seed={} rank_policy={}\n", self.runs, self.seed, self.rank_policy));
        out.push_str("instance,num_nodes,opt,method,mean_ratio,std_ratio,mean_cut,rank,win\n");
        for row in &self.rows {
            for (j, m) in self.methods.iter().enumerate() {
                let c = &row.cells[j];
                out.push_str(&format!(
                    "{},{},{:.6},{},{:.6},{:.6},{:.6},{},{}\n",
                    row.instance, row.num_nodes, row.opt, m, c.mean, c.std, c.mean_cut, c.rank, c.win
                ));
            }
        }
        out
    }

    /// Per-size aggregate series (mean ratio by node count, per method).
    pub fn size_series(&self) -> Vec<(usize, String, f64)> {
        let mut acc: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
        for row in &self.rows {
            for j in 0..self.methods.len() {
                let e = acc.entry((row.num_nodes, j)).or_insert((0.0, 0));
                e.0 += row.cells[j].mean;
                e.1 += 1;
            }
        }
        acc.into_iter()
            .map(|((n, j), (sum, count))| (n, self.methods[j].clone(), sum / count as f64))
            .collect()
    }

    /// Write the CSV and JSON artifacts next to each other.
    pub fn write_report(&self, stem: &Path) -> Result<()> {
        let csv_path = stem.with_extension("csv");
        let json_path = stem.with_extension("json");
        std::fs::write(&csv_path, self.to_csv())?;
        let payload = serde_json::json!({
            "table": self,
            "method_means": self.method_means(),
            "size_series": self.size_series(),
        });
        std::fs::write(&json_path, serde_json::to_string_pretty(&payload)?)?;
        Ok(())
    }
}

/// One-sided paired t-test for the alternative mean(a) > mean(b).
/// Returns the p-value; all-zero differences give exactly 0.5.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Bench("paired test needs two equal-length samples of size >= 2".into()));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        // degenerate spread: identical samples sit exactly at chance;
        // a constant nonzero shift is decided outright
        return Ok(if mean == 0.0 {
            0.5
        } else if mean > 0.0 {
            0.0
        } else {
            1.0
        });
    }
    let t = mean / (var.sqrt() / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::Bench(format!("t distribution: {e}")))?;
    Ok(1.0 - dist.cdf(t))
}
