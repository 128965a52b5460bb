//! Binary spin encoding of bounded integer weights and the mean-variance to
//! Ising reduction.
//!
//! Asset `k` owns the spin block `k*alpha .. (k+1)*alpha`, least significant
//! bit first, so `w = 1/2 M^T (s + 1)` where row `k*alpha + v` of `M` holds
//! `2^v` in column `k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{IsingModel, SpinVector, SYMMETRY_TOLERANCE};
use crate::scalar::{dot, Scalar};

/// Widest supported weight encoding; keeps `2^alpha - 1` inside `u64`.
pub const MAX_ALPHA: u32 = 62;

/// Sparse `(N*alpha) x N` binary-expansion matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodingMatrix {
    assets: usize,
    alpha: u32,
}

pub fn build_encoding_matrix(assets: usize, alpha: u32) -> Result<EncodingMatrix> {
    EncodingMatrix::new(assets, alpha)
}

impl EncodingMatrix {
    pub fn new(assets: usize, alpha: u32) -> Result<Self> {
        if assets == 0 {
            return Err(Error::Dimension("need at least one asset".into()));
        }
        check_alpha(alpha)?;
        Ok(Self { assets, alpha })
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn rows(&self) -> usize {
        self.assets * self.alpha as usize
    }

    /// `(column, value)` of the single nonzero in `row`.
    pub fn nonzero(&self, row: usize) -> (usize, u64) {
        let a = self.alpha as usize;
        (row / a, 1 << (row % a))
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        let (c, v) = self.nonzero(row);
        if c == col {
            v
        } else {
            0
        }
    }

    pub fn to_dense<T: Scalar>(&self) -> Vec<Vec<T>> {
        (0..self.rows())
            .map(|r| {
                (0..self.assets)
                    .map(|c| T::from_u64(self.get(r, c)).unwrap())
                    .collect()
            })
            .collect()
    }

    /// `M v` for an asset-indexed vector.
    pub fn apply<T: Scalar>(&self, v: &[T]) -> Vec<T> {
        (0..self.rows())
            .map(|r| {
                let (c, m) = self.nonzero(r);
                T::from_u64(m).unwrap() * v[c]
            })
            .collect()
    }

    pub fn max_weight(&self) -> u64 {
        max_weight(self.alpha)
    }
}

fn check_alpha(alpha: u32) -> Result<()> {
    if alpha == 0 || alpha > MAX_ALPHA {
        return Err(Error::Dimension(format!(
            "alpha must be in [1, {MAX_ALPHA}], got {alpha}"
        )));
    }
    Ok(())
}

pub fn max_weight(alpha: u32) -> u64 {
    (1u64 << alpha) - 1
}

/// Bits per weight implied by a capital budget: `floor(log2(C / N)) + 1`.
pub fn alpha_from_capital(capital: f64, assets: usize) -> Result<u32> {
    if assets == 0 {
        return Err(Error::Dimension("need at least one asset".into()));
    }
    let per_asset = capital / assets as f64;
    if !per_asset.is_finite() || per_asset < 1.0 {
        return Err(Error::Model(format!(
            "capital {capital} is below one unit per asset for {assets} assets"
        )));
    }
    let alpha = per_asset.log2().floor() as u32 + 1;
    check_alpha(alpha)?;
    Ok(alpha)
}

/// Non-negative integer allocation, one entry per asset.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<u64>);

impl WeightVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_scalars<T: Scalar>(&self) -> Vec<T> {
        self.0.iter().map(|&w| T::from_u64(w).unwrap()).collect()
    }

    /// Checks the box constraint `0 <= w_i <= 2^alpha - 1`.
    pub fn check_range(&self, alpha: u32) -> Result<()> {
        let max = max_weight(alpha);
        match self.0.iter().position(|&w| w > max) {
            Some(index) => Err(Error::EncodingRange {
                index,
                value: self.0[index],
                max,
            }),
            None => Ok(()),
        }
    }
}

/// Spin representation of `w`, least significant bit first per asset.
pub fn encode_weights(w: &WeightVector, alpha: u32) -> Result<SpinVector> {
    check_alpha(alpha)?;
    w.check_range(alpha)?;
    let spins =
        w.0.iter()
            .flat_map(|&wi| (0..alpha).map(move |v| if wi >> v & 1 == 1 { 1 } else { -1 }))
            .collect();
    SpinVector::new(spins)
}

/// `w = 1/2 M^T (s + 1)`.
pub fn decode_spins(s: &SpinVector, assets: usize, alpha: u32) -> Result<WeightVector> {
    let m = EncodingMatrix::new(assets, alpha)?;
    if s.len() != m.rows() {
        return Err(Error::Dimension(format!(
            "spin vector has length {} but N*alpha = {}",
            s.len(),
            m.rows()
        )));
    }
    let mut w = vec![0u64; assets];
    for (row, &spin) in s.as_slice().iter().enumerate() {
        if spin > 0 {
            let (col, value) = m.nonzero(row);
            w[col] += value;
        }
    }
    Ok(WeightVector(w))
}

/// Mean-variance problem over integer weights in `[0, 2^alpha - 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "ProblemDocument<T>",
    into = "ProblemDocument<T>",
    bound = "T: Scalar"
)]
pub struct MarkowitzProblem<T> {
    mu: Vec<T>,
    sigma: Vec<Vec<T>>,
    gamma: T,
    alpha: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ProblemDocument<T> {
    mu: Vec<T>,
    sigma: Vec<Vec<T>>,
    gamma: T,
    alpha: u32,
}

impl<T: Scalar> TryFrom<ProblemDocument<T>> for MarkowitzProblem<T> {
    type Error = Error;

    fn try_from(d: ProblemDocument<T>) -> Result<Self> {
        Self::new(d.mu, d.sigma, d.gamma, d.alpha)
    }
}

impl<T: Scalar> From<MarkowitzProblem<T>> for ProblemDocument<T> {
    fn from(p: MarkowitzProblem<T>) -> Self {
        ProblemDocument {
            mu: p.mu,
            sigma: p.sigma,
            gamma: p.gamma,
            alpha: p.alpha,
        }
    }
}

impl<T: Scalar> MarkowitzProblem<T> {
    pub fn new(mu: Vec<T>, sigma: Vec<Vec<T>>, gamma: T, alpha: u32) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::Dimension("need at least one asset".into()));
        }
        check_alpha(alpha)?;
        if sigma.len() != n || sigma.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("sigma must be {n}x{n}")));
        }
        if !(gamma.is_finite() && gamma > T::zero()) {
            return Err(Error::Model(format!("gamma must be positive, got {gamma}")));
        }
        if mu
            .iter()
            .chain(sigma.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Model("non-finite return or covariance entry".into()));
        }
        let tol = T::lit(SYMMETRY_TOLERANCE);
        for i in 0..n {
            if sigma[i][i] < T::zero() {
                return Err(Error::Model(format!("negative variance for asset {i}")));
            }
            for j in i + 1..n {
                if (sigma[i][j] - sigma[j][i]).abs() > tol {
                    return Err(Error::Model(format!(
                        "sigma not symmetric at ({i}, {j}): {} vs {}",
                        sigma[i][j], sigma[j][i]
                    )));
                }
            }
        }
        Ok(Self {
            mu,
            sigma,
            gamma,
            alpha,
        })
    }

    /// Bits per weight derived from a capital budget.
    pub fn with_capital(mu: Vec<T>, sigma: Vec<Vec<T>>, gamma: T, capital: f64) -> Result<Self> {
        let alpha = alpha_from_capital(capital, mu.len())?;
        Self::new(mu, sigma, gamma, alpha)
    }

    pub fn assets(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn sigma(&self) -> &[Vec<T>] {
        &self.sigma
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn spins(&self) -> usize {
        self.assets() * self.alpha as usize
    }

    pub fn encoding(&self) -> EncodingMatrix {
        EncodingMatrix {
            assets: self.assets(),
            alpha: self.alpha,
        }
    }

    pub fn with_alpha(&self, alpha: u32) -> Result<Self> {
        Self::new(self.mu.clone(), self.sigma.clone(), self.gamma, alpha)
    }

    pub fn with_mu(&self, mu: Vec<T>) -> Result<Self> {
        Self::new(mu, self.sigma.clone(), self.gamma, self.alpha)
    }

    pub fn with_gamma(&self, gamma: T) -> Result<Self> {
        Self::new(self.mu.clone(), self.sigma.clone(), gamma, self.alpha)
    }
}

/// `w^T mu - gamma/2 w^T Sigma w`.
pub fn utility<T: Scalar>(p: &MarkowitzProblem<T>, w: &WeightVector) -> Result<T> {
    if w.len() != p.assets() {
        return Err(Error::Dimension(format!(
            "weight vector has length {} but problem has {} assets",
            w.len(),
            p.assets()
        )));
    }
    w.check_range(p.alpha)?;
    let w: Vec<T> = w.to_scalars();
    let risk: T = p
        .sigma
        .iter()
        .zip(&w)
        .map(|(row, &wi)| wi * dot(row, &w))
        .sum();
    Ok(dot(&w, &p.mu) - p.gamma / T::lit(2.0) * risk)
}

/// Ising instance equivalent to a mean-variance problem, plus the constant
/// linking the two objectives: `utility(w(s)) = -(energy(s) / 2 + offset)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IsingReduction<T> {
    pub model: IsingModel<T>,
    pub offset: T,
}

impl<T: Scalar> IsingReduction<T> {
    /// Utility of the weights encoded by `s`, recovered from its energy.
    pub fn utility_of_energy(&self, energy: T) -> T {
        -(energy / T::lit(2.0) + self.offset)
    }
}

/// `J = -gamma/2 M Sigma M^T`, `h = gamma/2 M Sigma M^T 1 - M mu`, and
/// `offset = gamma/8 1^T M Sigma M^T 1 - 1/2 1^T M mu`.
pub fn markowitz_to_ising<T: Scalar>(p: &MarkowitzProblem<T>) -> Result<IsingReduction<T>> {
    let tol = T::lit(SYMMETRY_TOLERANCE);
    let n = p.assets();
    for i in 0..n {
        for j in i + 1..n {
            if (p.sigma[i][j] - p.sigma[j][i]).abs() > tol {
                return Err(Error::Model(format!("sigma not symmetric at ({i}, {j})")));
            }
        }
    }
    let m = p.encoding();
    let rows = m.rows();
    let scale: Vec<T> = (0..rows)
        .map(|r| T::from_u64(m.nonzero(r).1).unwrap())
        .collect();
    // q = M Sigma M^T
    let mut q = vec![T::zero(); rows * rows];
    for r in 0..rows {
        let a = m.nonzero(r).0;
        for c in 0..rows {
            let b = m.nonzero(c).0;
            q[r * rows + c] = scale[r] * scale[c] * p.sigma[a][b];
        }
    }
    let half_gamma = p.gamma / T::lit(2.0);
    let m_mu = m.apply(&p.mu);
    let q_one: Vec<T> = q
        .chunks(rows)
        .map(|row| row.iter().copied().sum())
        .collect();
    let couplings = q.iter().map(|&v| -half_gamma * v).collect();
    let field = q_one
        .iter()
        .zip(&m_mu)
        .map(|(&qu, &mm)| half_gamma * qu - mm)
        .collect();
    let offset = p.gamma / T::lit(8.0) * q_one.iter().copied().sum::<T>()
        - m_mu.iter().copied().sum::<T>() / T::lit(2.0);
    Ok(IsingReduction {
        model: IsingModel::from_flat(couplings, field)?,
        offset,
    })
}

/// Recovers the mean-variance problem from an Ising instance produced by
/// [`markowitz_to_ising`], given the `gamma` and `alpha` used to build it.
pub fn ising_to_markowitz<T: Scalar>(
    model: &IsingModel<T>,
    gamma: T,
    alpha: u32,
) -> Result<MarkowitzProblem<T>> {
    check_alpha(alpha)?;
    let a = alpha as usize;
    if !model.n().is_multiple_of(a) {
        return Err(Error::Dimension(format!(
            "{} spins is not a multiple of alpha = {alpha}",
            model.n()
        )));
    }
    if !(gamma.is_finite() && gamma > T::zero()) {
        return Err(Error::Model(format!("gamma must be positive, got {gamma}")));
    }
    let n = model.n() / a;
    let half_gamma = gamma / T::lit(2.0);
    // The least-significant spin of each block carries M = 1.
    let sigma: Vec<Vec<T>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| -model.coupling(i * a, j * a) / half_gamma)
                .collect()
        })
        .collect();
    let q_one: Vec<T> = (0..model.n())
        .map(|r| -model.row(r).iter().copied().sum::<T>() / half_gamma)
        .collect();
    let mu: Vec<T> = (0..n)
        .map(|i| half_gamma * q_one[i * a] - model.field()[i * a])
        .collect();
    let sigma = symmetrize(sigma);
    let problem = MarkowitzProblem::new(mu, sigma, gamma, alpha)?;
    let rebuilt = markowitz_to_ising(&problem)?.model;
    let tol = T::lit(1e-9) * (T::one() + model.magnitude());
    let mismatch = rebuilt
        .couplings()
        .iter()
        .zip(model.couplings())
        .chain(rebuilt.field().iter().zip(model.field()))
        .any(|(x, y)| (*x - *y).abs() > tol);
    if mismatch {
        return Err(Error::Model(
            "Ising instance does not have the mean-variance block structure for this gamma/alpha"
                .into(),
        ));
    }
    Ok(problem)
}

pub(crate) fn symmetrize<T: Scalar>(mut sigma: Vec<Vec<T>>) -> Vec<Vec<T>> {
    let n = sigma.len();
    let half = T::lit(0.5);
    for i in 0..n {
        for j in i + 1..n {
            let v = (sigma[i][j] + sigma[j][i]) * half;
            sigma[i][j] = v;
            sigma[j][i] = v;
        }
    }
    sigma
}

/// Best allocation found by enumerating the whole weight box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BestAllocation<T> {
    pub weights: WeightVector,
    pub utility: T,
}

/// Exhaustive maximization of the utility over `[0, 2^alpha - 1]^N`.
///
/// Walks the box with a reflected mixed-radix Gray code (one weight moves by
/// one unit per step) and updates the utility in O(N). Near-ties resolve to
/// the lexicographically smallest weight vector.
pub fn exhaustive_weight_search<T: Scalar>(
    p: &MarkowitzProblem<T>,
    ceiling: usize,
) -> Result<BestAllocation<T>> {
    let bits = p.spins();
    if bits > ceiling || bits > 62 {
        return Err(Error::InstanceTooLarge {
            n: bits,
            ceiling: ceiling.min(62),
        });
    }
    let n = p.assets();
    let top = max_weight(p.alpha);
    let half_gamma = p.gamma / T::lit(2.0);
    let magnitude = p.mu.iter().map(|m| m.abs()).sum::<T>() * T::from_u64(top).unwrap()
        + p.sigma.iter().flatten().map(|s| s.abs()).sum::<T>()
            * half_gamma
            * T::from_u64(top).unwrap().powi(2);
    let tol = T::epsilon() * T::lit(4096.0) * magnitude;

    let mut w = vec![0u64; n];
    let mut dir = vec![true; n];
    // sw = Sigma w
    let mut sw = vec![T::zero(); n];
    let mut value = T::zero();
    let mut best = (value, w.clone());
    let total = 1u64 << bits;
    for _ in 1..total {
        // reflected Gray code: advance the lowest digit that can still move
        let mut k = 0;
        loop {
            let can_move = if dir[k] { w[k] < top } else { w[k] > 0 };
            if can_move {
                break;
            }
            dir[k] = !dir[k];
            k += 1;
        }
        let d = if dir[k] { T::one() } else { -T::one() };
        // utility(w + d e_k) - utility(w) = d mu_k - gamma/2 (2 d (Sigma w)_k + Sigma_kk)
        value = value + d * p.mu[k] - half_gamma * (T::lit(2.0) * d * sw[k] + p.sigma[k][k]);
        if dir[k] {
            w[k] += 1;
        } else {
            w[k] -= 1;
        }
        for (i, s) in sw.iter_mut().enumerate() {
            *s = *s + d * p.sigma[i][k];
        }
        if value > best.0 + tol || (value >= best.0 - tol && w < best.1) {
            best = (value.max(best.0), w.clone());
        }
    }
    let weights = WeightVector(best.1);
    let utility = utility(p, &weights)?;
    Ok(BestAllocation { weights, utility })
}
