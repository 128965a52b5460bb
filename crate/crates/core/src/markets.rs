//! Closing-price ingestion and return moments.
//!
//! Input is a CSV with a `date` column (ISO-8601) followed by one column per
//! ticker. Dates with any missing cell are dropped.

use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::encoding::{symmetrize, MarkowitzProblem};
use crate::error::{Error, Result};
use crate::ising::SYMMETRY_TOLERANCE;
use crate::scalar::Scalar;

/// Cleaned closing prices, one row per date, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries<T> {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// `prices[t][i]`: closing price of ticker `i` on `dates[t]`.
    pub prices: Vec<Vec<T>>,
    /// Rows removed because a cell was missing.
    pub dropped_rows: usize,
}

/// Daily simple returns: row `t` covers `dates[t] -> dates[t + 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnsMatrix<T> {
    pub tickers: Vec<String>,
    pub returns: Vec<Vec<T>>,
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.trim().to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "none" | "n/a" | "-"
    )
}

/// Reads a `date,TICKER1,TICKER2,...` CSV.
pub fn ingest_prices<T: Scalar, R: Read>(source: R) -> Result<PriceSeries<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let header = reader
        .headers()
        .map_err(|e| Error::Ingest(e.to_string()))?
        .clone();
    if header.len() < 2 {
        return Err(Error::Ingest(
            "expected a date column followed by at least one ticker column".into(),
        ));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let width = tickers.len();

    let mut rows: Vec<(NaiveDate, Vec<T>)> = Vec::new();
    let mut dropped_rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Ingest(e.to_string()))?;
        let line = line + 2;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let date_cell = record.get(0).unwrap_or_default();
        let date = NaiveDate::parse_from_str(date_cell, "%Y-%m-%d")
            .map_err(|e| Error::Ingest(format!("line {line}: bad date `{date_cell}`: {e}")))?;
        if record.len() > width + 1 {
            return Err(Error::Ingest(format!(
                "line {line}: {} cells for {} columns",
                record.len(),
                width + 1
            )));
        }
        let mut prices = Vec::with_capacity(width);
        let mut missing = record.len() < width + 1;
        for cell in record.iter().skip(1) {
            if is_missing(cell) {
                missing = true;
                continue;
            }
            let value: f64 = cell
                .parse()
                .map_err(|_| Error::Ingest(format!("line {line}: bad price `{cell}`")))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Ingest(format!(
                    "line {line}: price must be positive, got {value}"
                )));
            }
            prices.push(T::lit(value));
        }
        if missing {
            dropped_rows += 1;
        } else {
            rows.push((date, prices));
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    rows.sort_by_key(|(d, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Ingest(format!("duplicate date {}", w[0].0)));
    }
    let (dates, prices) = rows.into_iter().unzip();
    Ok(PriceSeries {
        tickers,
        dates,
        prices,
        dropped_rows,
    })
}

/// Estimation window over a price series.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    /// Keep only the trailing `last` dates after the date bounds.
    pub last: Option<usize>,
}

impl<T: Scalar> PriceSeries<T> {
    pub fn windowed(&self, window: &Window) -> PriceSeries<T> {
        let keep: Vec<usize> = (0..self.dates.len())
            .filter(|&t| window.start.is_none_or(|s| self.dates[t] >= s))
            .filter(|&t| window.end.is_none_or(|e| self.dates[t] <= e))
            .collect();
        let skip = window
            .last
            .map_or(0, |last| keep.len().saturating_sub(last));
        let keep = &keep[skip..];
        PriceSeries {
            tickers: self.tickers.clone(),
            dates: keep.iter().map(|&t| self.dates[t]).collect(),
            prices: keep.iter().map(|&t| self.prices[t].clone()).collect(),
            dropped_rows: self.dropped_rows,
        }
    }
}

pub fn daily_returns<T: Scalar>(p: &PriceSeries<T>) -> Result<ReturnsMatrix<T>> {
    if p.prices.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 dates for returns, have {}",
            p.prices.len()
        )));
    }
    let returns = p
        .prices
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(&before, &after)| (after - before) / before)
                .collect()
        })
        .collect();
    Ok(ReturnsMatrix {
        tickers: p.tickers.clone(),
        returns,
    })
}

/// How the per-day returns collapse into the expected-return vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuMode {
    /// Arithmetic mean over the window.
    #[default]
    Mean,
    /// Most recent daily return only.
    LastDay,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    pub mu: Vec<T>,
    pub sigma: Vec<Vec<T>>,
}

/// Mean returns and sample covariance (divisor `T - 1`).
pub fn estimate_moments<T: Scalar>(r: &ReturnsMatrix<T>, mode: MuMode) -> Result<Moments<T>> {
    let rows = r.returns.len();
    if rows < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 return rows for a covariance, have {rows}"
        )));
    }
    let n = r.tickers.len();
    let count = T::from_usize(rows).unwrap();
    let mean: Vec<T> = (0..n)
        .map(|i| r.returns.iter().map(|row| row[i]).sum::<T>() / count)
        .collect();
    let divisor = T::from_usize(rows - 1).unwrap();
    let mut sigma = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let c = r
                .returns
                .iter()
                .map(|row| (row[i] - mean[i]) * (row[j] - mean[j]))
                .sum::<T>()
                / divisor;
            sigma[i][j] = c;
            sigma[j][i] = c;
        }
    }
    let mu = match mode {
        MuMode::Mean => mean,
        MuMode::LastDay => r.returns.last().unwrap().clone(),
    };
    Ok(Moments { mu, sigma })
}

/// Validates and symmetrizes `(sigma + sigma^T) / 2` into a problem.
pub fn assemble_problem<T: Scalar>(
    mu: Vec<T>,
    sigma: Vec<Vec<T>>,
    gamma: T,
    alpha: u32,
) -> Result<MarkowitzProblem<T>> {
    let n = mu.len();
    if sigma.len() != n || sigma.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension(format!(
            "mu has {n} entries but sigma is not {n}x{n}"
        )));
    }
    let tol = T::lit(SYMMETRY_TOLERANCE);
    for i in 0..n {
        for j in i + 1..n {
            if (sigma[i][j] - sigma[j][i]).abs() > tol {
                return Err(Error::Model(format!("sigma not symmetric at ({i}, {j})")));
            }
        }
    }
    MarkowitzProblem::new(mu, symmetrize(sigma), gamma, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn ingest(text: &str) -> Result<PriceSeries<f64>> {
        ingest_prices(text.as_bytes())
    }

    #[test]
    fn ingest_clean_file() {
        let p = ingest("date,A,B\n2021-01-04,10,20\n2021-01-05,11,21\n2021-01-06,12,22\n").unwrap();
        assert_eq!(p.tickers, vec!["A", "B"]);
        assert_eq!(p.dates.len(), 3);
        assert_eq!(p.dropped_rows, 0);
        assert_eq!(p.prices[1], vec![11.0, 21.0]);
    }

    #[test]
    fn ingest_drops_rows_with_gaps() {
        let p = ingest("date,A,B\n2021-01-04,10,20\n2021-01-05,,21\n2021-01-06,12,22\n").unwrap();
        assert_eq!(p.dates.len(), 2);
        assert_eq!(p.dropped_rows, 1);
        let p = ingest("date,A,B\n2021-01-04,10,20\n2021-01-05,11\n2021-01-06,12,NaN\n").unwrap();
        assert_eq!(p.dates.len(), 1);
        assert_eq!(p.dropped_rows, 2);
    }

    #[test]
    fn ingest_sorts_dates() {
        let p = ingest("date,A\n2021-01-06,3\n2021-01-04,1\n2021-01-05,2\n").unwrap();
        assert_eq!(
            p.dates,
            vec![
                NaiveDate::from_ymd_opt(2021, 1, 4).unwrap(),
                NaiveDate::from_ymd_opt(2021, 1, 5).unwrap(),
                NaiveDate::from_ymd_opt(2021, 1, 6).unwrap(),
            ]
        );
        assert_eq!(p.prices, vec![vec![1.0], vec![2.0], vec![3.0]]);
    }

    #[test]
    fn ingest_errors() {
        assert!(matches!(
            ingest("date\n2021-01-04\n"),
            Err(Error::Ingest(_))
        ));
        assert!(matches!(
            ingest("date,A\nyesterday,1\n"),
            Err(Error::Ingest(_))
        ));
        assert!(matches!(
            ingest("date,A\n2021-01-04,abc\n"),
            Err(Error::Ingest(_))
        ));
        assert!(matches!(
            ingest("date,A\n2021-01-04,-1\n"),
            Err(Error::Ingest(_))
        ));
        assert!(matches!(
            ingest("date,A\n2021-01-04,1\n2021-01-04,2\n"),
            Err(Error::Ingest(_))
        ));
        assert_eq!(ingest("date,A\n2021-01-04,\n"), Err(Error::EmptyData));
        assert_eq!(ingest("date,A\n"), Err(Error::EmptyData));
    }

    fn series(prices: Vec<Vec<f64>>) -> PriceSeries<f64> {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        PriceSeries {
            tickers: (0..prices[0].len()).map(|i| format!("T{i}")).collect(),
            dates: (0..prices.len())
                .map(|d| start + chrono::Days::new(d as u64))
                .collect(),
            prices,
            dropped_rows: 0,
        }
    }

    #[test]
    fn returns_examples() {
        let r = daily_returns(&series(vec![vec![100.0], vec![110.0]])).unwrap();
        assert!((r.returns[0][0] - 0.10).abs() < 1e-15);
        let r = daily_returns(&series(vec![vec![100.0]; 3])).unwrap();
        assert_eq!(r.returns, vec![vec![0.0], vec![0.0]]);
        let r = daily_returns(&series(vec![vec![100.0], vec![90.0]])).unwrap();
        assert!((r.returns[0][0] + 0.10).abs() < 1e-15);
        assert!(matches!(
            daily_returns(&series(vec![vec![100.0]])),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn returns_reconstruct_prices() {
        let prices: Vec<Vec<f64>> = (0..50)
            .map(|t| vec![100.0 * (1.0 + 0.01 * (t as f64).sin()), 5.0 + t as f64])
            .collect();
        let r = daily_returns(&series(prices.clone())).unwrap();
        let mut rebuilt = prices[0].clone();
        for (t, row) in r.returns.iter().enumerate() {
            for i in 0..2 {
                rebuilt[i] *= 1.0 + row[i];
                assert!((rebuilt[i] - prices[t + 1][i]).abs() <= 1e-12 * prices[t + 1][i]);
            }
        }
    }

    fn returns(rows: Vec<Vec<f64>>) -> ReturnsMatrix<f64> {
        ReturnsMatrix {
            tickers: (0..rows[0].len()).map(|i| format!("T{i}")).collect(),
            returns: rows,
        }
    }

    #[test]
    fn moment_examples() {
        let m = estimate_moments(&returns(vec![vec![0.01, 0.02]; 4]), MuMode::Mean).unwrap();
        assert_eq!(m.sigma, vec![vec![0.0; 2]; 2]);
        assert!((m.mu[0] - 0.01).abs() < 1e-15 && (m.mu[1] - 0.02).abs() < 1e-15);

        let a = 0.03;
        let m = estimate_moments(&returns(vec![vec![a, a], vec![-a, -a]]), MuMode::Mean).unwrap();
        assert_eq!(m.sigma[0][1], m.sigma[0][0]);
        assert_eq!(m.sigma[1][1], m.sigma[0][0]);

        let m = estimate_moments(
            &returns(vec![vec![0.01, -0.01], vec![-0.01, 0.01]]),
            MuMode::Mean,
        )
        .unwrap();
        assert_eq!(m.mu, vec![0.0, 0.0]);
        let expect = [[2e-4, -2e-4], [-2e-4, 2e-4]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.sigma[i][j] - expect[i][j]).abs() < 1e-18);
            }
        }
        assert!(matches!(
            estimate_moments(&returns(vec![vec![0.0]]), MuMode::Mean),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn last_day_mode() {
        let m = estimate_moments(
            &returns(vec![vec![0.01], vec![0.03], vec![-0.02]]),
            MuMode::LastDay,
        )
        .unwrap();
        assert_eq!(m.mu, vec![-0.02]);
    }

    #[test]
    fn recovers_diagonal_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let stds = [0.01, 0.02, 0.005];
        let dists: Vec<Normal<f64>> = stds.iter().map(|&s| Normal::new(0.0, s).unwrap()).collect();
        let rows = (0..10_000)
            .map(|_| dists.iter().map(|d| d.sample(&mut rng)).collect())
            .collect();
        let m = estimate_moments(&returns(rows), MuMode::Mean).unwrap();
        for i in 0..3 {
            let var = stds[i] * stds[i];
            assert!((m.sigma[i][i] - var).abs() <= 0.1 * var);
            for j in 0..3 {
                assert_eq!(m.sigma[i][j], m.sigma[j][i]);
                if i != j {
                    assert!(m.sigma[i][j].abs() <= 0.1 * stds[i] * stds[j]);
                }
            }
        }
    }

    #[test]
    fn assemble_examples() {
        assert!(assemble_problem(vec![0.0], vec![vec![1.0]], 0.0, 1).is_err());
        let p = assemble_problem(
            vec![0.0, 0.0],
            vec![vec![1.0, 0.5], vec![0.5 + 1e-12, 1.0]],
            1.0,
            1,
        )
        .unwrap();
        assert_eq!(p.sigma()[0][1], p.sigma()[1][0]);
        assert!(matches!(
            assemble_problem(vec![0.0], vec![vec![1.0, 0.0]], 1.0, 1),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            assemble_problem(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.4, 1.0]], 1.0, 1),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn window_selection() {
        let p = series((1..=10).map(|v| vec![v as f64]).collect());
        let w = Window {
            last: Some(3),
            ..Window::default()
        };
        assert_eq!(
            p.windowed(&w).prices,
            vec![vec![8.0], vec![9.0], vec![10.0]]
        );
        let w = Window {
            start: Some(p.dates[2]),
            end: Some(p.dates[4]),
            last: None,
        };
        assert_eq!(p.windowed(&w).dates, p.dates[2..=4].to_vec());
    }
}
