//! Simulated bifurcation: adiabatic evolution of a network of Kerr
//! parametric oscillators, integrated with a symplectic Euler scheme.
//!
//! Each macro-step `t_n -> t_{n+1}` runs `M` on-site sub-steps of length
//! `dt / M`
//!
//! ```text
//! x <- x + detuning * y * dt/M
//! y <- y - (kerr * x^3 + (detuning - p(t_{n+1})) * x) * dt/M
//! ```
//!
//! then applies the coupling and field kick once:
//! `y <- y + xi0 * (J x - 2 A(t_{n+1}) h) * dt`.
//! Spins are read as `sign(x)`. A window of sampled signs decides when every
//! oscillator has bifurcated.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ising::{energy, IsingModel, SpinVector};
use crate::scalar::{dot, Scalar};

/// Half-width of the uniform distribution the initial positions are drawn from.
pub const INITIAL_SPREAD: f64 = 1e-4;

/// Coupling scale: either fixed or derived from the spread of `J`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Xi0 {
    /// `0.7 * detuning / (std(J) * sqrt(n))`
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for Xi0 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Xi0::Auto => f.write_str("auto"),
            Xi0::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Xi0 {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Xi0::Auto);
        }
        s.parse::<f64>()
            .map(Xi0::Fixed)
            .map_err(|_| format!("expected `auto` or a number, got `{s}`"))
    }
}

impl Serialize for Xi0 {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self {
            Xi0::Auto => ser.serialize_str("auto"),
            Xi0::Fixed(v) => ser.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Xi0 {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Number(v) => Ok(Xi0::Fixed(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Hamiltonian constants, schedule, integrator and stop-window settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub kerr: f64,
    pub detuning: f64,
    pub xi0: Xi0,
    /// Slope of the linear pump `p(t) = pump_slope * t`.
    pub pump_slope: f64,
    /// Macro-step length.
    pub dt: f64,
    /// Symplectic sub-steps per macro-step.
    pub substeps: u32,
    /// Macro-steps between two window samples.
    pub sample_period: u64,
    /// Number of samples kept in the stop window.
    pub window_size: usize,
    pub max_steps: u64,
    pub seed: u64,
    /// Record a per-sample trace in the result.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kerr: 1.0,
            detuning: 1.0,
            xi0: Xi0::Auto,
            pump_slope: 0.01,
            dt: 0.01,
            substeps: 2,
            sample_period: 60,
            window_size: 35,
            max_steps: 100_000,
            seed: 0,
            trace: false,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kerr", self.kerr),
            ("detuning", self.detuning),
            ("pump_slope", self.pump_slope),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Model(format!("{name} must be positive, got {v}")));
            }
        }
        if let Xi0::Fixed(v) = self.xi0 {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Model(format!("xi0 must be positive, got {v}")));
            }
        }
        if self.substeps < 2 {
            return Err(Error::Model(format!(
                "substeps must be at least 2, got {}",
                self.substeps
            )));
        }
        if self.sample_period == 0 || self.window_size == 0 || self.max_steps == 0 {
            return Err(Error::Model(
                "sample_period, window_size and max_steps must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Concrete parameters for `model`, with `xi0` resolved.
    pub fn resolve<T: Scalar>(&self, model: &IsingModel<T>) -> Result<Params<T>> {
        self.validate()?;
        let xi0 = match self.xi0 {
            Xi0::Fixed(v) => T::lit(v),
            Xi0::Auto => auto_xi0(model, T::lit(self.detuning)),
        };
        Ok(Params {
            kerr: T::lit(self.kerr),
            detuning: T::lit(self.detuning),
            xi0,
            pump_slope: T::lit(self.pump_slope),
            dt: T::lit(self.dt),
            substeps: self.substeps,
            sample_period: self.sample_period,
            window_size: self.window_size,
            max_steps: self.max_steps,
        })
    }
}

/// `0.7 * detuning / (sigma_J * sqrt(n))`, with `sigma_J` the population
/// standard deviation of every entry of `J`. A constant `J` uses `sigma_J = 1`.
pub fn auto_xi0<T: Scalar>(model: &IsingModel<T>, detuning: T) -> T {
    let spread = model.coupling_std();
    let spread = if spread > T::zero() { spread } else { T::one() };
    T::lit(0.7) * detuning / (spread * T::from_usize(model.n()).unwrap().sqrt())
}

/// Resolved solver parameters in the solver's scalar type.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub kerr: T,
    pub detuning: T,
    pub xi0: T,
    pub pump_slope: T,
    pub dt: T,
    pub substeps: u32,
    pub sample_period: u64,
    pub window_size: usize,
    pub max_steps: u64,
}

impl<T: Scalar> Params<T> {
    pub fn pump(&self, t: T) -> T {
        self.pump_slope * t
    }

    pub fn feedback_amplitude(&self, t: T) -> T {
        let p = self.pump(t);
        if p <= self.detuning {
            T::zero()
        } else {
            ((p - self.detuning) / self.kerr).sqrt()
        }
    }

    /// Physical time reached after `step` macro-steps.
    pub fn time(&self, step: u64) -> T {
        T::from_u64(step).unwrap() * self.dt
    }
}

/// Pump amplitude `pump_slope * t`.
pub fn pump(config: &SolverConfig, t: f64) -> f64 {
    config.pump_slope * t
}

/// Tracked equilibrium amplitude: zero up to the threshold `p = detuning`,
/// `sqrt((p - detuning) / kerr)` beyond it.
pub fn feedback_amplitude(config: &SolverConfig, t: f64) -> f64 {
    let p = pump(config, t);
    if p <= config.detuning {
        0.0
    } else {
        ((p - config.detuning) / config.kerr).sqrt()
    }
}

/// `-1`, `0` or `+1`.
pub fn sign<T: Scalar>(x: T) -> i8 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}

/// Sliding record of sampled spin signs, one column per sample, oldest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignWindow {
    columns: Vec<Vec<i8>>,
}

impl SignWindow {
    /// All-zero window of `rows` spins by `size` samples.
    pub fn new(rows: usize, size: usize) -> Self {
        Self {
            columns: vec![vec![0; rows]; size],
        }
    }

    pub fn from_columns(columns: Vec<Vec<i8>>) -> Self {
        Self { columns }
    }

    pub fn columns(&self) -> &[Vec<i8>] {
        &self.columns
    }

    /// Drops the oldest column and appends `signs` as the newest.
    pub fn push(&mut self, signs: Vec<i8>) {
        if self.columns.is_empty() {
            return;
        }
        self.columns.rotate_left(1);
        *self.columns.last_mut().unwrap() = signs;
    }

    /// Every row constant and nonzero: all spins bifurcated and stable.
    pub fn is_settled(&self) -> bool {
        let Some(first) = self.columns.first() else {
            return false;
        };
        first
            .iter()
            .enumerate()
            .all(|(i, &s)| s != 0 && self.columns.iter().all(|col| col[i] == s))
    }
}

/// Positions, momenta, step counter and stop window.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorState<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub step: u64,
    pub window: SignWindow,
}

impl<T: Scalar> OscillatorState<T> {
    /// State at step 0 with zero momenta and an empty window.
    pub fn new(x: Vec<T>, window_size: usize) -> Self {
        let n = x.len();
        Self {
            x,
            y: vec![T::zero(); n],
            step: 0,
            window: SignWindow::new(n, window_size),
        }
    }

    pub fn signs(&self) -> Vec<i8> {
        self.x.iter().map(|&x| sign(x)).collect()
    }
}

/// Initial positions drawn uniformly from `[-INITIAL_SPREAD, INITIAL_SPREAD]`.
pub fn initial_positions<T: Scalar>(seed: u64, n: usize) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| T::lit(rng.random_range(-INITIAL_SPREAD..=INITIAL_SPREAD)))
        .collect()
}

/// Advances one macro-step with the symplectic sub-step scheme.
pub fn step<T: Scalar>(
    state: &mut OscillatorState<T>,
    model: &IsingModel<T>,
    params: &Params<T>,
) -> Result<()> {
    advance(state, model, params, params.substeps)
}

/// Single explicit Euler macro-step (no sub-stepping). Kept as a coarse
/// reference for the sub-step refinement checks.
pub fn euler_step<T: Scalar>(
    state: &mut OscillatorState<T>,
    model: &IsingModel<T>,
    params: &Params<T>,
) -> Result<()> {
    advance(state, model, params, 1)
}

fn advance<T: Scalar>(
    state: &mut OscillatorState<T>,
    model: &IsingModel<T>,
    params: &Params<T>,
    substeps: u32,
) -> Result<()> {
    let n = model.n();
    if state.x.len() != n || state.y.len() != n {
        return Err(Error::Dimension(format!(
            "state has {} positions for a {n}-spin model",
            state.x.len()
        )));
    }
    let t_next = params.time(state.step + 1);
    let p = params.pump(t_next);
    let amplitude = params.feedback_amplitude(t_next);
    let sub_dt = params.dt / T::from_u32(substeps).unwrap();
    let onsite = params.detuning - p;

    for (x, y) in state.x.iter_mut().zip(state.y.iter_mut()) {
        for _ in 0..substeps {
            *x = *x + params.detuning * *y * sub_dt;
            *y = *y - (params.kerr * *x * *x * *x + onsite * *x) * sub_dt;
        }
    }
    let two = T::lit(2.0);
    for i in 0..n {
        let coupling = dot(model.row(i), &state.x);
        state.y[i] =
            state.y[i] + params.xi0 * (coupling - two * amplitude * model.field()[i]) * params.dt;
    }
    state.step += 1;

    if state.x.iter().chain(&state.y).any(|v| !v.is_finite()) {
        return Err(Error::NumericalDivergence { step: state.step });
    }
    Ok(())
}

/// Samples `sign(x)` into the window when the step is a multiple of the
/// sampling period. Returns whether a sample was taken.
pub fn update_window<T: Scalar>(state: &mut OscillatorState<T>, sample_period: u64) -> bool {
    if !state.step.is_multiple_of(sample_period) {
        return false;
    }
    let signs = state.signs();
    state.window.push(signs);
    true
}

pub fn check_converged<T>(state: &OscillatorState<T>) -> bool {
    state.window.is_settled()
}

/// One sampled point of a solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TraceSample<T> {
    pub step: u64,
    pub t: T,
    /// Raw signs, `0` for oscillators still at the origin.
    pub signs: Vec<i8>,
    /// Energy of the signs with zeros read as `+1`.
    pub energy: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverResult<T> {
    pub spins: SpinVector,
    pub energy: T,
    pub steps_run: u64,
    /// `true` when the stop window settled before `max_steps`.
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceSample<T>>>,
}

/// Reads spins off the positions; an exact zero resolves to `+1`.
pub fn resolve_spins<T: Scalar>(x: &[T]) -> SpinVector {
    SpinVector::new(
        x.iter()
            .map(|&v| if sign(v) < 0 { -1 } else { 1 })
            .collect(),
    )
    .expect("resolved spins are +-1")
}

/// Runs the solver from seeded random initial positions.
pub fn solve<T: Scalar>(model: &IsingModel<T>, config: &SolverConfig) -> Result<SolverResult<T>> {
    let x0 = initial_positions(config.seed, model.n());
    solve_from(model, config, x0)
}

/// Runs the solver from the given initial positions (momenta start at zero).
pub fn solve_from<T: Scalar>(
    model: &IsingModel<T>,
    config: &SolverConfig,
    x0: Vec<T>,
) -> Result<SolverResult<T>> {
    if !model.is_symmetric() {
        return Err(Error::Model(
            "simulated bifurcation needs a symmetric coupling matrix".into(),
        ));
    }
    if x0.len() != model.n() {
        return Err(Error::Dimension(format!(
            "{} initial positions for a {}-spin model",
            x0.len(),
            model.n()
        )));
    }
    let params = config.resolve(model)?;
    let mut state = OscillatorState::new(x0, params.window_size);
    let mut trace = config.trace.then(Vec::new);
    let mut converged = false;

    while state.step < params.max_steps {
        step(&mut state, model, &params)?;
        if update_window(&mut state, params.sample_period) {
            if let Some(trace) = trace.as_mut() {
                let spins = resolve_spins(&state.x);
                trace.push(TraceSample {
                    step: state.step,
                    t: params.time(state.step),
                    signs: state.signs(),
                    energy: energy(model, &spins)?,
                });
            }
            if check_converged(&state) {
                converged = true;
                break;
            }
        }
    }

    let spins = resolve_spins(&state.x);
    Ok(SolverResult {
        energy: energy(model, &spins)?,
        spins,
        steps_run: state.step,
        converged,
        trace,
    })
}
