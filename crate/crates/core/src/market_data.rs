//! Price history ingestion and mean-variance inputs.
//!
//! Returns are simple daily returns `(p_t - p_{t-1}) / p_{t-1}` and the
//! covariance uses the unbiased `N - 1` denominator. The frontier helpers
//! implement the closed-form relations between the risk factor `q` of the
//! Lagrangian objective `q/2 wᵀΣw - wᵀE` and the target return `μ`.

use std::io::Read;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QbError, Result};

/// Largest accepted condition number of Σ before it is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Tolerance on the smallest eigenvalue of Σ.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceHistory {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// Rows are dates, columns are tickers.
    pub prices: Vec<Vec<f64>>,
}

impl PriceHistory {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, prices: Vec<Vec<f64>>) -> Result<Self> {
        if tickers.is_empty() {
            return Err(QbError::MalformedPrices("no ticker columns".into()));
        }
        if dates.len() != prices.len() {
            return Err(QbError::MalformedPrices(format!(
                "{} dates but {} price rows",
                dates.len(),
                prices.len()
            )));
        }
        if dates.len() < 2 {
            return Err(QbError::TooFewDates { needed: 2, got: dates.len() });
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(QbError::MalformedPrices(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        for (row, r) in prices.iter().enumerate() {
            if r.len() != tickers.len() {
                return Err(QbError::MalformedPrices(format!(
                    "row {row} has {} prices for {} tickers",
                    r.len(),
                    tickers.len()
                )));
            }
            for (col, &value) in r.iter().enumerate() {
                if !(value.is_finite() && value > 0.0) {
                    return Err(QbError::NonPositivePrice {
                        row,
                        ticker: tickers[col].clone(),
                        value,
                    });
                }
            }
        }
        Ok(Self { tickers, dates, prices })
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    /// Keep only the named tickers, in the given order.
    pub fn select(&self, tickers: &[String]) -> Result<Self> {
        if tickers.is_empty() {
            return Err(QbError::Config("empty ticker selection".into()));
        }
        let cols = tickers
            .iter()
            .map(|t| {
                self.tickers
                    .iter()
                    .position(|x| x == t)
                    .ok_or_else(|| QbError::Config(format!("unknown ticker {t}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let prices = self
            .prices
            .iter()
            .map(|row| cols.iter().map(|&c| row[c]).collect())
            .collect();
        Self::new(tickers.to_vec(), self.dates.clone(), prices)
    }
}

/// Parse a `date,<ticker>,...` CSV of closing prices.
///
/// Blank cells are rejected rather than imputed.
pub fn load_price_history<R: Read>(source: R) -> Result<PriceHistory> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.len() < 2 {
        return Err(QbError::MalformedPrices(
            "expected a date column followed by at least one ticker".into(),
        ));
    }
    if !headers[0].eq_ignore_ascii_case("date") {
        return Err(QbError::MalformedPrices(format!(
            "first column must be `date`, found `{}`",
            &headers[0]
        )));
    }
    let tickers: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();

    let mut dates = Vec::new();
    let mut prices = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| QbError::MalformedPrices(format!("row {row}: bad date `{}`: {e}", &record[0])))?;
        let mut values = Vec::with_capacity(tickers.len());
        for (col, ticker) in tickers.iter().enumerate() {
            let cell = record.get(col + 1).unwrap_or("");
            if cell.is_empty() {
                return Err(QbError::MissingValue { row, ticker: ticker.clone() });
            }
            let value: f64 = cell
                .parse()
                .map_err(|_| QbError::MalformedPrices(format!("row {row}: bad price `{cell}` for {ticker}")))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(QbError::NonPositivePrice { row, ticker: ticker.clone(), value });
            }
            values.push(value);
        }
        dates.push(date);
        prices.push(values);
    }
    PriceHistory::new(tickers, dates, prices)
}

/// Mean daily returns `E` and their covariance `Σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketMoments {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tickers: Vec<String>,
    pub expectation: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl MarketMoments {
    /// Validate dimensions, symmetry and positive semidefiniteness.
    pub fn new(tickers: Vec<String>, expectation: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self { tickers, expectation, covariance };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.expectation.len();
        if n == 0 {
            return Err(QbError::InvalidMoments("empty expectation vector".into()));
        }
        if !self.tickers.is_empty() && self.tickers.len() != n {
            return Err(QbError::DimensionMismatch { expected: n, got: self.tickers.len() });
        }
        if self.covariance.len() != n || self.covariance.iter().any(|r| r.len() != n) {
            return Err(QbError::InvalidMoments(format!("covariance must be {n}x{n}")));
        }
        let scale = self
            .covariance
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (self.covariance[i][j] - self.covariance[j][i]).abs() > 1e-12 * scale {
                    return Err(QbError::InvalidMoments(format!("covariance not symmetric at ({i},{j})")));
                }
            }
        }
        let eig = self.covariance_matrix().symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOLERANCE {
            return Err(QbError::InvalidMoments(format!(
                "covariance not positive semidefinite (smallest eigenvalue {min:e})"
            )));
        }
        Ok(())
    }

    pub fn n_assets(&self) -> usize {
        self.expectation.len()
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.n_assets();
        DMatrix::from_fn(n, n, |i, j| self.covariance[i][j])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    /// Frontier constants `a = EᵀΣ⁻¹E`, `b = EᵀΣ⁻¹1`, `c = 1ᵀΣ⁻¹1`.
    pub fn frontier_constants(&self) -> Result<FrontierConstants> {
        frontier_constants(self)
    }
}

pub fn compute_moments(history: &PriceHistory) -> Result<MarketMoments> {
    let t = history.dates.len();
    if t < 2 {
        return Err(QbError::TooFewDates { needed: 2, got: t });
    }
    let n = history.n_assets();
    let returns: Vec<Vec<f64>> = history
        .prices
        .windows(2)
        .map(|w| (0..n).map(|i| (w[1][i] - w[0][i]) / w[0][i]).collect())
        .collect();
    let count = returns.len() as f64;
    let expectation: Vec<f64> = (0..n)
        .map(|i| returns.iter().map(|r| r[i]).sum::<f64>() / count)
        .collect();
    // a single return has no spread; report a zero covariance in that case
    let denom = (count - 1.0).max(1.0);
    let mut covariance = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = returns
                .iter()
                .map(|r| (r[i] - expectation[i]) * (r[j] - expectation[j]))
                .sum();
            covariance[i][j] = s / denom;
            covariance[j][i] = s / denom;
        }
    }
    MarketMoments::new(history.tickers.clone(), expectation, covariance)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub fn frontier_constants(moments: &MarketMoments) -> Result<FrontierConstants> {
    let n = moments.n_assets();
    let sigma = moments.covariance_matrix();
    let eig = sigma.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(cond < MAX_CONDITION) {
        return Err(QbError::SingularCovariance(cond));
    }
    let chol = sigma
        .cholesky()
        .ok_or(QbError::SingularCovariance(cond))?;
    let e = DVector::from_column_slice(&moments.expectation);
    let ones = DVector::from_element(n, 1.0);
    let inv_e = chol.solve(&e);
    let inv_ones = chol.solve(&ones);
    let k = FrontierConstants {
        a: e.dot(&inv_e),
        b: e.dot(&inv_ones),
        c: ones.dot(&inv_ones),
    };
    if !(k.c > 0.0) {
        return Err(QbError::DegenerateFrontier(format!("c = {} is not positive", k.c)));
    }
    Ok(k)
}

impl FrontierConstants {
    /// `ac - b²`; positive whenever `E` is not proportional to `1`.
    pub fn determinant(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    /// Risk factor `q = (ac - b²) / (cμ - b)` for a target return `μ`.
    pub fn risk_factor_from_target(&self, mu: f64) -> Result<f64> {
        let denom = self.c * mu - self.b;
        if denom == 0.0 || !denom.is_finite() {
            return Err(QbError::DegenerateFrontier(format!(
                "target return {mu} gives cμ = b, no finite risk factor"
            )));
        }
        Ok(self.determinant() / denom)
    }

    /// Inverse of [`risk_factor_from_target`](Self::risk_factor_from_target):
    /// `μ = b/c + (ac - b²)/(c q)`.
    pub fn target_from_risk_factor(&self, q: f64) -> Result<f64> {
        if q == 0.0 || !q.is_finite() {
            return Err(QbError::DegenerateFrontier(format!("risk factor {q} must be finite and nonzero")));
        }
        Ok(self.b / self.c + self.determinant() / (self.c * q))
    }

    /// Minimum variance `σ² = (a - 2bμ + cμ²)/(ac - b²)` attainable at target `μ`.
    pub fn frontier_variance(&self, mu: f64) -> Result<f64> {
        let det = self.determinant();
        if !(det > 0.0) {
            return Err(QbError::DegenerateFrontier(format!("ac - b² = {det:e} is not positive")));
        }
        Ok((self.a - 2.0 * self.b * mu + self.c * mu * mu) / det)
    }

    /// Analytic slope `dσ²/dμ = (2cμ - 2b)/(ac - b²)`.
    pub fn frontier_slope(&self, mu: f64) -> f64 {
        (2.0 * self.c * mu - 2.0 * self.b) / self.determinant()
    }
}
