//! Seeded PQ vs. reordered-PQ sweeps at matched storage budgets.

use std::collections::BTreeMap;

use hera_core::{
    compute_errors, generate_truncated_normal, hera_dequantize, hera_quantize, pq_dequantize,
    pq_quantize, BitBudget, Matrix, Method, PqConfig,
};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::BenchError;

/// Errors and cost of one successfully quantized cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub ks: usize,
    pub mae: f64,
    pub mre: Option<f64>,
    pub mse: f64,
    pub total_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub m: usize,
    pub levels: usize,
    pub seed: u64,
    /// `None` when no `K_s` fits the budget.
    pub outcome: Option<CellResult>,
}

impl ResultRow {
    fn sort_key(&self) -> (Method, usize, usize, u64) {
        (self.method, self.m, self.levels, self.seed)
    }
}

/// Storage every cell with `m` subspaces must fit into.
pub fn baseline_budget(cfg: &ExperimentConfig, m: usize) -> Result<BitBudget, BenchError> {
    if let Some(total_bits) = cfg.budget_bits {
        return Ok(BitBudget { total_bits, ..Default::default() });
    }
    Ok(cfg.policy().account_pq(cfg.n, cfg.d, m, cfg.baseline_ks)?)
}

fn run_cell(
    cfg: &ExperimentConfig,
    data: &Matrix,
    seed: u64,
    m: usize,
    levels: usize,
) -> Result<Option<CellResult>, BenchError> {
    let policy = cfg.policy();
    let baseline = baseline_budget(cfg, m)?;
    let ks = match policy.match_budget(&baseline, cfg.n, cfg.d, m, levels) {
        Ok(ks) => ks.min(cfg.n >> levels),
        Err(hera_core::Error::BudgetTooSmall { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let pq = PqConfig {
        num_subspaces: m,
        centroids_per_subspace: ks,
        kmeans: cfg.kmeans(seed),
    };
    let restored = if levels == 0 {
        pq_dequantize(&pq_quantize(data, &pq)?)?
    } else {
        hera_dequantize(&hera_quantize(data, levels, &pq)?)?
    };
    let err = compute_errors(data, &restored)?;
    Ok(Some(CellResult {
        ks,
        mae: err.mae,
        mre: err.mre,
        mse: err.mse,
        total_bits: policy.account_hera(cfg.n, cfg.d, m, ks, levels)?.total_bits,
    }))
}

/// Runs every (repetition, M, levels) cell and returns rows sorted by
/// method, M, levels and seed. The output depends only on `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, BenchError> {
    cfg.validate()?;
    let datasets = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed(r);
            generate_truncated_normal::<f32>(&cfg.dataset(seed), cfg.n, cfg.d).map(|m| (seed, m))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let cells: Vec<_> = datasets
        .iter()
        .flat_map(|(seed, data)| {
            cfg.subspaces.iter().flat_map(move |&m| {
                cfg.levels.iter().map(move |&levels| (*seed, data, m, levels))
            })
        })
        .collect();

    let mut rows = cells
        .into_par_iter()
        .map(|(seed, data, m, levels)| {
            Ok(ResultRow {
                method: if levels == 0 { Method::Pq } else { Method::Hera },
                m,
                levels,
                seed,
                outcome: run_cell(cfg, data, seed, m, levels)?,
            })
        })
        .collect::<Result<Vec<_>, BenchError>>()?;
    rows.sort_by_key(ResultRow::sort_key);
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single observation.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub m: usize,
    pub levels: usize,
    /// Feasible repetitions in the group.
    pub count: usize,
    pub ks: Option<usize>,
    pub total_bits: Option<u64>,
    pub mae: Option<Stat>,
    /// Absent when the group is infeasible or any MRE is undefined.
    pub mre: Option<Stat>,
    pub mse: Option<Stat>,
}

/// Aggregates rows per (method, M, levels) over repetitions.
pub fn summarize(rows: &[ResultRow]) -> Result<Vec<SummaryRow>, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::Config("nothing to summarize".into()));
    }
    let mut groups: BTreeMap<(Method, usize, usize), Vec<&CellResult>> = BTreeMap::new();
    for row in rows {
        let group = groups.entry((row.method, row.m, row.levels)).or_default();
        if let Some(c) = &row.outcome {
            group.push(c);
        }
    }
    Ok(groups
        .into_iter()
        .map(|((method, m, levels), cells)| {
            let stat = |f: fn(&CellResult) -> f64| {
                (!cells.is_empty()).then(|| Stat::of(&cells.iter().map(|c| f(c)).collect::<Vec<_>>()))
            };
            let mre = cells
                .iter()
                .map(|c| c.mre)
                .collect::<Option<Vec<_>>>()
                .filter(|v| !v.is_empty())
                .map(|v| Stat::of(&v));
            SummaryRow {
                method,
                m,
                levels,
                count: cells.len(),
                ks: cells.first().map(|c| c.ks),
                total_bits: cells.first().map(|c| c.total_bits),
                mae: stat(|c| c.mae),
                mre,
                mse: stat(|c| c.mse),
            }
        })
        .collect())
}
