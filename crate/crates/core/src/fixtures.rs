//! Seven-asset reference portfolio (equities, sovereign bonds, cash).
//!
//! `gamma = 1` is pinned: it is the risk aversion under which the one-bit
//! optimum of this dataset has utility ~0.131.

use crate::encoding::MarkowitzProblem;

pub const REFERENCE_PORTFOLIO_JSON: &str = include_str!("../fixtures/reference_portfolio.json");

/// Expected one-bit optimum utility for the reference portfolio.
pub const REFERENCE_ONE_BIT_UTILITY: f64 = 0.131;

pub fn reference_problem() -> MarkowitzProblem<f64> {
    serde_json::from_str(REFERENCE_PORTFOLIO_JSON).expect("reference fixture parses")
}

pub fn reference_tickers() -> Vec<String> {
    #[derive(serde::Deserialize)]
    struct Names {
        tickers: Vec<String>,
    }
    serde_json::from_str::<Names>(REFERENCE_PORTFOLIO_JSON)
        .expect("reference fixture parses")
        .tickers
}
