//! Randomized accuracy studies: solver against the exhaustive oracle on
//! generated mean-variance instances.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{decode_spins, markowitz_to_ising, utility, MarkowitzProblem};
use crate::error::{Error, Result};
use crate::ising::{ground_states, DEFAULT_ORACLE_CEILING};
use crate::sb::{solve, SolverConfig};
use crate::scalar::Scalar;

/// Tolerance under which two utilities count as the same optimum.
pub const UTILITY_MATCH_TOLERANCE: f64 = 1e-9;

/// Cap on the number of tied optima kept for the Hamming comparison.
const MAX_OPTIMA: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub assets: usize,
    pub alpha: u32,
}

impl Cell {
    pub fn new(assets: usize, alpha: u32) -> Self {
        Self { assets, alpha }
    }

    pub fn spins(&self) -> usize {
        self.assets * self.alpha as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySpec {
    pub grid: Vec<Cell>,
    pub trials: usize,
    /// Returns are drawn from `mu_scale * U(-1, 1)`.
    pub mu_scale: f64,
    /// Covariances are `sigma_scale * A A^T / N` with standard normal `A`.
    pub sigma_scale: f64,
    pub gamma: f64,
    pub solver: SolverConfig,
    pub seed: u64,
    pub oracle_ceiling: usize,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            grid: vec![Cell::new(2, 1)],
            trials: 50,
            mu_scale: 1e-2,
            sigma_scale: 1e-4,
            gamma: 1.0,
            solver: SolverConfig::default(),
            seed: 0,
            oracle_ceiling: DEFAULT_ORACLE_CEILING,
        }
    }
}

impl StudySpec {
    pub const PRESETS: [&'static str; 4] = ["accuracy-grid", "gap-grid", "onebit-curve", "desk"];

    /// Named study grids.
    ///
    /// * `accuracy-grid`: every tractable (assets, bits) cell, 50 trials.
    /// * `gap-grid`: the same grid with 100 trials.
    /// * `onebit-curve`: one bit per asset, 6 to 18 assets, 150 trials.
    /// * `desk`: a small mixed grid, 50 trials.
    pub fn preset(name: &str) -> Option<Self> {
        let full_grid = || {
            let max_assets = [(1, 14), (2, 7), (3, 4), (4, 3), (5, 2), (6, 2), (7, 2)];
            max_assets
                .iter()
                .flat_map(|&(alpha, top)| (2..=top).map(move |n| Cell::new(n, alpha)))
                .collect::<Vec<_>>()
        };
        let spec = match name {
            "accuracy-grid" => Self {
                grid: full_grid(),
                trials: 50,
                ..Self::default()
            },
            "gap-grid" => Self {
                grid: full_grid(),
                trials: 100,
                ..Self::default()
            },
            "onebit-curve" => Self {
                grid: (6..=18).map(|n| Cell::new(n, 1)).collect(),
                trials: 150,
                ..Self::default()
            },
            "desk" => Self {
                grid: vec![
                    Cell::new(2, 1),
                    Cell::new(5, 1),
                    Cell::new(10, 1),
                    Cell::new(5, 2),
                    Cell::new(7, 2),
                    Cell::new(3, 3),
                ],
                trials: 50,
                ..Self::default()
            },
            _ => return None,
        };
        Some(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Model("trials must be positive".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Model("study grid is empty".into()));
        }
        for cell in &self.grid {
            if cell.assets == 0 || cell.alpha == 0 {
                return Err(Error::Dimension(format!(
                    "cell ({}, {}) must have positive size",
                    cell.assets, cell.alpha
                )));
            }
            if cell.spins() > self.oracle_ceiling {
                return Err(Error::InstanceTooLarge {
                    n: cell.spins(),
                    ceiling: self.oracle_ceiling,
                });
            }
        }
        for (name, v) in [
            ("mu_scale", self.mu_scale),
            ("sigma_scale", self.sigma_scale),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Model(format!("{name} must be positive, got {v}")));
            }
        }
        self.solver.validate()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for one (cell, trial, purpose) triple.
fn derive_seed(seed: u64, cell: Cell, trial: usize, purpose: u64) -> u64 {
    [cell.assets as u64, cell.alpha as u64, trial as u64, purpose]
        .into_iter()
        .fold(splitmix(seed), |acc, v| splitmix(acc ^ v))
}

/// Deterministic random instance for `(spec.seed, cell, trial)`.
pub fn random_instance<T: Scalar>(
    spec: &StudySpec,
    cell: Cell,
    trial: usize,
) -> Result<MarkowitzProblem<T>> {
    let n = cell.assets;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, cell, trial, 0));
    let a: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    let scale = spec.sigma_scale / n as f64;
    let mut sigma = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let g: f64 = (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum();
            sigma[i][j] = T::lit(scale * g);
            sigma[j][i] = sigma[i][j];
        }
    }
    let mu = (0..n)
        .map(|_| T::lit(spec.mu_scale * rng.random_range(-1.0..1.0)))
        .collect();
    MarkowitzProblem::new(mu, sigma, T::lit(spec.gamma), cell.alpha)
}

/// `|value - optimum| / |optimum|`, or the absolute gap when the optimum is 0.
pub fn relative_gap<T: Scalar>(value: T, optimum: T) -> T {
    let gap = (value - optimum).abs();
    if optimum == T::zero() {
        gap
    } else {
        gap / optimum.abs()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub solve_ms: f64,
    pub oracle_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub assets: usize,
    pub alpha: u32,
    pub trial: usize,
    /// Solver reached the optimal utility (within the match tolerance).
    pub exact_match: bool,
    pub rel_gap_ising: Option<f64>,
    pub rel_gap_utility: Option<f64>,
    /// Fraction of spins agreeing with the closest optimal configuration.
    pub hamming_accuracy: Option<f64>,
    pub sb_energy: Option<f64>,
    pub opt_energy: f64,
    pub sb_utility: Option<f64>,
    pub opt_utility: f64,
    pub converged: bool,
    pub steps: u64,
    /// Solver error for this trial, if any.
    pub failure: Option<String>,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub assets: usize,
    pub alpha: u32,
    pub trials: usize,
    pub failures: usize,
    pub exact_match_pct: f64,
    pub mean_rel_gap_ising: f64,
    pub mean_rel_gap_utility: f64,
    pub mean_hamming_accuracy: f64,
    pub converged_pct: f64,
    pub mean_steps: f64,
    pub mean_solve_ms: f64,
    pub mean_oracle_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub spec: StudySpec,
    pub cells: Vec<CellSummary>,
    pub trials: Vec<TrialRecord>,
}

impl StudyReport {
    /// Copy with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for t in &mut r.trials {
            t.timing = Timing::default();
        }
        for c in &mut r.cells {
            c.mean_solve_ms = 0.0;
            c.mean_oracle_ms = 0.0;
        }
        r
    }

    pub fn cell(&self, assets: usize, alpha: u32) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.assets == assets && c.alpha == alpha)
    }
}

/// Runs one trial: reduce, solve, compare to the oracle.
pub fn run_trial<T: Scalar>(spec: &StudySpec, cell: Cell, trial: usize) -> Result<TrialRecord> {
    let problem = random_instance::<T>(spec, cell, trial)?;
    let reduction = markowitz_to_ising(&problem)?;
    let model = &reduction.model;

    let started = Instant::now();
    let config = spec
        .solver
        .with_seed(derive_seed(spec.seed, cell, trial, 1));
    let solved = solve(model, &config);
    let solve_ms = started.elapsed().as_secs_f64() * 1e3;

    let started = Instant::now();
    let (_, optima) = ground_states(model, spec.oracle_ceiling, MAX_OPTIMA)?;
    let oracle_ms = started.elapsed().as_secs_f64() * 1e3;

    let best = &optima[0];
    let opt_energy = crate::ising::energy(model, best)?.as_f64();
    let opt_utility = utility(&problem, &decode_spins(best, cell.assets, cell.alpha)?)?.as_f64();
    let timing = Timing {
        solve_ms,
        oracle_ms,
    };

    let mut record = TrialRecord {
        assets: cell.assets,
        alpha: cell.alpha,
        trial,
        exact_match: false,
        rel_gap_ising: None,
        rel_gap_utility: None,
        hamming_accuracy: None,
        sb_energy: None,
        opt_energy,
        sb_utility: None,
        opt_utility,
        converged: false,
        steps: 0,
        failure: None,
        timing,
    };
    let result = match solved {
        Ok(r) => r,
        Err(e) => {
            record.failure = Some(e.to_string());
            return Ok(record);
        }
    };
    let sb_energy = result.energy.as_f64();
    let sb_utility = utility(
        &problem,
        &decode_spins(&result.spins, cell.assets, cell.alpha)?,
    )?
    .as_f64();
    let exact_match =
        (sb_utility - opt_utility).abs() <= UTILITY_MATCH_TOLERANCE * (1.0 + opt_utility.abs());
    let n = result.spins.len() as f64;
    let hamming = optima
        .iter()
        .map(|s| s.agreement(&result.spins))
        .max()
        .unwrap_or(0) as f64
        / n;
    let (gap_ising, gap_utility) = if exact_match {
        (0.0, 0.0)
    } else {
        (
            relative_gap(sb_energy, opt_energy),
            relative_gap(sb_utility, opt_utility),
        )
    };
    record.exact_match = exact_match;
    record.rel_gap_ising = Some(gap_ising);
    record.rel_gap_utility = Some(gap_utility);
    record.hamming_accuracy = Some(hamming);
    record.sb_energy = Some(sb_energy);
    record.sb_utility = Some(sb_utility);
    record.converged = result.converged;
    record.steps = result.steps_run;
    Ok(record)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Aggregates per-trial records into a cell summary. Failed trials count as
/// misses for the match percentage and are left out of the other means.
pub fn summarize(cell: Cell, records: &[TrialRecord]) -> CellSummary {
    let trials = records.len();
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    let pct = |count: usize| 100.0 * count as f64 / trials.max(1) as f64;
    CellSummary {
        assets: cell.assets,
        alpha: cell.alpha,
        trials,
        failures: trials - ok.len(),
        exact_match_pct: pct(records.iter().filter(|r| r.exact_match).count()),
        mean_rel_gap_ising: mean(ok.iter().filter_map(|r| r.rel_gap_ising)),
        mean_rel_gap_utility: mean(ok.iter().filter_map(|r| r.rel_gap_utility)),
        mean_hamming_accuracy: mean(ok.iter().filter_map(|r| r.hamming_accuracy)),
        converged_pct: pct(records.iter().filter(|r| r.converged).count()),
        mean_steps: mean(ok.iter().map(|r| r.steps as f64)),
        mean_solve_ms: mean(records.iter().map(|r| r.timing.solve_ms)),
        mean_oracle_ms: mean(records.iter().map(|r| r.timing.oracle_ms)),
    }
}

/// Runs every cell of the study. Trials run in parallel; each one derives its
/// own random streams, so the report does not depend on the worker count.
pub fn run_study<T: Scalar>(spec: &StudySpec) -> Result<StudyReport> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.grid.len());
    let mut trials = Vec::with_capacity(spec.grid.len() * spec.trials);
    for &cell in &spec.grid {
        let records = (0..spec.trials)
            .into_par_iter()
            .map(|t| run_trial::<T>(spec, cell, t))
            .collect::<Result<Vec<_>>>()?;
        cells.push(summarize(cell, &records));
        trials.extend(records);
    }
    Ok(StudyReport {
        spec: spec.clone(),
        cells,
        trials,
    })
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Ingest(format!("csv output: {e}"))
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One line per trial.
pub fn write_trials_csv<W: Write>(report: &StudyReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "assets",
        "alpha",
        "trial",
        "exact_match",
        "rel_gap_ising",
        "rel_gap_utility",
        "hamming_accuracy",
        "sb_energy",
        "opt_energy",
        "sb_utility",
        "opt_utility",
        "converged",
        "steps",
        "failure",
        "solve_ms",
        "oracle_ms",
    ])
    .map_err(csv_err)?;
    for t in &report.trials {
        w.write_record([
            t.assets.to_string(),
            t.alpha.to_string(),
            t.trial.to_string(),
            t.exact_match.to_string(),
            opt(t.rel_gap_ising),
            opt(t.rel_gap_utility),
            opt(t.hamming_accuracy),
            opt(t.sb_energy),
            t.opt_energy.to_string(),
            opt(t.sb_utility),
            t.opt_utility.to_string(),
            t.converged.to_string(),
            t.steps.to_string(),
            t.failure.clone().unwrap_or_default(),
            format!("{:.3}", t.timing.solve_ms),
            format!("{:.3}", t.timing.oracle_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// One line per cell.
pub fn write_summary_csv<W: Write>(report: &StudyReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "assets",
        "alpha",
        "trials",
        "failures",
        "exact_match_pct",
        "mean_rel_gap_ising",
        "mean_rel_gap_utility",
        "mean_hamming_accuracy",
        "converged_pct",
        "mean_steps",
        "mean_solve_ms",
        "mean_oracle_ms",
    ])
    .map_err(csv_err)?;
    for c in &report.cells {
        w.write_record([
            c.assets.to_string(),
            c.alpha.to_string(),
            c.trials.to_string(),
            c.failures.to_string(),
            c.exact_match_pct.to_string(),
            c.mean_rel_gap_ising.to_string(),
            c.mean_rel_gap_utility.to_string(),
            c.mean_hamming_accuracy.to_string(),
            c.converged_pct.to_string(),
            c.mean_steps.to_string(),
            format!("{:.3}", c.mean_solve_ms),
            format!("{:.3}", c.mean_oracle_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Which aggregate to lay out as a bits-by-assets table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableMetric {
    ExactMatchPct,
    /// Mean relative Ising gap in units of 1e-4.
    IsingGapE4,
    /// Mean relative utility gap in units of 1e-4.
    UtilityGapE4,
}

/// Pivot table with one row per `alpha` and one column per asset count;
/// cells not in the study are marked `x`.
pub fn write_table_csv<W: Write>(report: &StudyReport, metric: TableMetric, out: W) -> Result<()> {
    let mut alphas: Vec<u32> = report.cells.iter().map(|c| c.alpha).collect();
    alphas.sort_unstable();
    alphas.dedup();
    let mut assets: Vec<usize> = report.cells.iter().map(|c| c.assets).collect();
    assets.sort_unstable();
    assets.dedup();

    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["bits/assets".to_string()];
    header.extend(assets.iter().map(|a| a.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    for &alpha in &alphas {
        let mut row = vec![alpha.to_string()];
        for &n in &assets {
            row.push(match report.cell(n, alpha) {
                None => "x".into(),
                Some(c) => {
                    let v = match metric {
                        TableMetric::ExactMatchPct => c.exact_match_pct,
                        TableMetric::IsingGapE4 => c.mean_rel_gap_ising * 1e4,
                        TableMetric::UtilityGapE4 => c.mean_rel_gap_utility * 1e4,
                    };
                    format!("{v:.2}")
                }
            });
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}

/// Accuracy against subset size for the one-bit cells.
pub fn write_accuracy_curve_csv<W: Write>(report: &StudyReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "assets",
        "mean_hamming_accuracy",
        "exact_match_pct",
        "trials",
    ])
    .map_err(csv_err)?;
    let mut cells: Vec<&CellSummary> = report.cells.iter().filter(|c| c.alpha == 1).collect();
    cells.sort_by_key(|c| c.assets);
    for c in cells {
        w.write_record([
            c.assets.to_string(),
            c.mean_hamming_accuracy.to_string(),
            c.exact_match_pct.to_string(),
            c.trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(csv_err)
}
