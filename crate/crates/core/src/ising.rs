//! Dense Ising energy model and an exhaustive ground-state oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Absolute tolerance used when flagging a coupling matrix as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Default cap on the number of spins the exhaustive oracle will enumerate.
pub const DEFAULT_ORACLE_CEILING: usize = 26;

/// Hard limit imposed by the `u64` state masks.
const MASK_BITS: usize = 62;

/// Ising model with dense couplings `J` and external field `h`.
///
/// The energy of a spin configuration `s` is `-1/2 s^T J s + s^T h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "IsingDocument<T>",
    into = "IsingDocument<T>",
    bound = "T: Scalar"
)]
pub struct IsingModel<T> {
    n: usize,
    couplings: Vec<T>,
    field: Vec<T>,
    symmetric: bool,
}

/// Wire form of an [`IsingModel`]: `{"n": .., "J": [[..]], "h": [..]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct IsingDocument<T> {
    n: usize,
    #[serde(rename = "J")]
    couplings: Vec<Vec<T>>,
    h: Vec<T>,
}

impl<T: Scalar> TryFrom<IsingDocument<T>> for IsingModel<T> {
    type Error = Error;

    fn try_from(doc: IsingDocument<T>) -> Result<Self> {
        if doc.couplings.len() != doc.n {
            return Err(Error::Dimension(format!(
                "J has {} rows but n = {}",
                doc.couplings.len(),
                doc.n
            )));
        }
        Self::new(doc.couplings, doc.h)
    }
}

impl<T: Scalar> From<IsingModel<T>> for IsingDocument<T> {
    fn from(model: IsingModel<T>) -> Self {
        IsingDocument {
            n: model.n,
            couplings: model
                .couplings
                .chunks(model.n.max(1))
                .map(<[T]>::to_vec)
                .collect(),
            h: model.field,
        }
    }
}

impl<T: Scalar> IsingModel<T> {
    /// Builds a model from row-major couplings and a field vector.
    pub fn new(couplings: Vec<Vec<T>>, field: Vec<T>) -> Result<Self> {
        let n = field.len();
        if couplings.len() != n {
            return Err(Error::Dimension(format!(
                "J has {} rows but h has length {n}",
                couplings.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in couplings.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!(
                    "J row {i} has length {} (expected {n})",
                    row.len()
                )));
            }
            flat.extend(row);
        }
        Self::from_flat(flat, field)
    }

    /// Builds a model from a flat row-major `n * n` coupling buffer.
    pub fn from_flat(couplings: Vec<T>, field: Vec<T>) -> Result<Self> {
        let n = field.len();
        if n == 0 {
            return Err(Error::Dimension("model needs at least one spin".into()));
        }
        if couplings.len() != n * n {
            return Err(Error::Dimension(format!(
                "J has {} entries, expected {}",
                couplings.len(),
                n * n
            )));
        }
        if couplings.iter().chain(&field).any(|v| !v.is_finite()) {
            return Err(Error::Model("non-finite coefficient".into()));
        }
        let tol = T::lit(SYMMETRY_TOLERANCE);
        let symmetric = (0..n).all(|i| {
            (i + 1..n).all(|j| (couplings[i * n + j] - couplings[j * n + i]).abs() <= tol)
        });
        Ok(Self {
            n,
            couplings,
            field,
            symmetric,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major coupling buffer.
    pub fn couplings(&self) -> &[T] {
        &self.couplings
    }

    pub fn coupling(&self, i: usize, j: usize) -> T {
        self.couplings[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.couplings[i * self.n..(i + 1) * self.n]
    }

    pub fn field(&self) -> &[T] {
        &self.field
    }

    /// Whether `J` passed the symmetry check at construction.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Same couplings with the field negated.
    pub fn with_negated_field(&self) -> Self {
        Self {
            field: self.field.iter().map(|&h| -h).collect(),
            ..self.clone()
        }
    }

    /// Population standard deviation over all `n * n` coupling entries.
    pub fn coupling_std(&self) -> T {
        let count = T::from_usize(self.couplings.len()).unwrap();
        let mean = self.couplings.iter().copied().sum::<T>() / count;
        let var = self
            .couplings
            .iter()
            .map(|&c| (c - mean) * (c - mean))
            .sum::<T>()
            / count;
        var.sqrt()
    }

    /// `sum |J_ij| + sum |h_i|`, a bound on the magnitude of the energy.
    pub fn magnitude(&self) -> T {
        self.couplings.iter().map(|c| c.abs()).sum::<T>()
            + self.field.iter().map(|h| h.abs()).sum::<T>()
    }
}

/// A configuration of `n` spins, each exactly `-1` or `+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SpinVector(Vec<i8>);

impl TryFrom<Vec<i8>> for SpinVector {
    type Error = Error;

    fn try_from(spins: Vec<i8>) -> Result<Self> {
        Self::new(spins)
    }
}

impl From<SpinVector> for Vec<i8> {
    fn from(s: SpinVector) -> Self {
        s.0
    }
}

impl SpinVector {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(i) = spins.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::Model(format!(
                "spin {i} is {}, expected -1 or +1",
                spins[i]
            )));
        }
        Ok(Self(spins))
    }

    /// All spins down.
    pub fn down(n: usize) -> Self {
        Self(vec![-1; n])
    }

    /// Spin `i` is `+1` iff bit `i` of `mask` is set.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self(
            (0..n)
                .map(|i| if mask >> i & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn to_mask(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .fold(0, |m, (i, _)| m | 1 << i)
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&s| -s).collect())
    }

    /// Number of positions where the two configurations agree.
    pub fn agreement(&self, other: &SpinVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a == b).count()
    }

    pub fn to_scalars<T: Scalar>(&self) -> Vec<T> {
        self.0
            .iter()
            .map(|&s| if s > 0 { T::one() } else { -T::one() })
            .collect()
    }
}

/// Ising energy `-1/2 s^T J s + s^T h`.
pub fn energy<T: Scalar>(model: &IsingModel<T>, s: &SpinVector) -> Result<T> {
    if s.len() != model.n {
        return Err(Error::Dimension(format!(
            "spin vector has length {} but model has {} spins",
            s.len(),
            model.n
        )));
    }
    Ok(energy_unchecked(model, s.as_slice()))
}

fn energy_unchecked<T: Scalar>(model: &IsingModel<T>, s: &[i8]) -> T {
    let mut quad = T::zero();
    let mut linear = T::zero();
    for (i, (&si, &hi)) in s.iter().zip(&model.field).enumerate() {
        let mut acc = T::zero();
        for (&j, &sj) in model.row(i).iter().zip(s) {
            acc = if sj > 0 { acc + j } else { acc - j };
        }
        quad = if si > 0 { quad + acc } else { quad - acc };
        linear = if si > 0 { linear + hi } else { linear - hi };
    }
    linear - quad / T::lit(2.0)
}

/// Minimum-energy configuration returned by the exhaustive oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GroundState<T> {
    pub spins: SpinVector,
    pub energy: T,
}

/// Exhaustive ground state with the default ceiling.
pub fn brute_force_ground_state<T: Scalar>(model: &IsingModel<T>) -> Result<GroundState<T>> {
    brute_force_ground_state_with_ceiling(model, DEFAULT_ORACLE_CEILING)
}

/// Enumerates all `2^n` configurations and returns the minimum.
///
/// Ties (energies within the floating-point tie tolerance of the minimum)
/// resolve to the lexicographically smallest vector under `-1 < +1`,
/// comparing spin 0 first.
pub fn brute_force_ground_state_with_ceiling<T: Scalar>(
    model: &IsingModel<T>,
    ceiling: usize,
) -> Result<GroundState<T>> {
    let search = Search::new(model, ceiling)?;
    let threshold = search.minimum_energy() + search.tie_tolerance;
    let chunks = search.chunks();
    let mask = (0..chunks)
        .into_par_iter()
        .find_map_first(|chunk| search.first_in_lex_chunk(chunk, threshold))
        .expect("the minimum is attained by some configuration");
    let spins = SpinVector::from_mask(mask, model.n);
    let energy = energy_unchecked(model, spins.as_slice());
    Ok(GroundState { spins, energy })
}

/// All configurations tied for the minimum energy, in lexicographic order.
///
/// At most `limit` configurations are returned.
pub fn ground_states<T: Scalar>(
    model: &IsingModel<T>,
    ceiling: usize,
    limit: usize,
) -> Result<(T, Vec<SpinVector>)> {
    let search = Search::new(model, ceiling)?;
    let minimum = search.minimum_energy();
    let threshold = minimum + search.tie_tolerance;
    let per_chunk: Vec<Vec<u64>> = (0..search.chunks())
        .into_par_iter()
        .map(|chunk| search.all_in_lex_chunk(chunk, threshold, limit))
        .collect();
    let states = per_chunk
        .into_iter()
        .flatten()
        .take(limit)
        .map(|m| SpinVector::from_mask(m, model.n))
        .collect();
    Ok((minimum, states))
}

/// Shared precomputation for the exhaustive passes.
struct Search<'a, T> {
    model: &'a IsingModel<T>,
    /// Symmetrized off-diagonal couplings `(J + J^T) / 2`, zero diagonal.
    sym: Vec<T>,
    /// Spins fixed per parallel chunk.
    split: usize,
    tie_tolerance: T,
}

/// Incremental energy tracker over a bitmask state.
struct Walker<'s, 'a, T> {
    search: &'s Search<'a, T>,
    mask: u64,
    /// `g_i = sum_{j != i} sym_ij s_j`
    local: Vec<T>,
    energy: T,
    flips: u32,
}

const RESYNC_PERIOD: u32 = 1024;

impl<'a, T: Scalar> Search<'a, T> {
    fn new(model: &'a IsingModel<T>, ceiling: usize) -> Result<Self> {
        let n = model.n;
        if n > ceiling || n > MASK_BITS {
            return Err(Error::InstanceTooLarge {
                n,
                ceiling: ceiling.min(MASK_BITS),
            });
        }
        let half = T::lit(0.5);
        let mut sym = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sym[i * n + j] = (model.coupling(i, j) + model.coupling(j, i)) * half;
                }
            }
        }
        let split = if n >= 14 { 6.min(n) } else { 0 };
        let tie_tolerance = T::epsilon() * T::lit(4096.0) * model.magnitude();
        Ok(Self {
            model,
            sym,
            split,
            tie_tolerance,
        })
    }

    fn chunks(&self) -> u64 {
        1 << self.split
    }

    fn walker(&self, mask: u64) -> Walker<'_, 'a, T> {
        let mut w = Walker {
            search: self,
            mask,
            local: vec![T::zero(); self.model.n],
            energy: T::zero(),
            flips: 0,
        };
        w.resync();
        w
    }

    /// Exact minimum energy via Gray-code enumeration, partitioned on the
    /// highest `split` spins.
    fn minimum_energy(&self) -> T {
        let n = self.model.n;
        let low = n - self.split;
        let best_masks: Vec<u64> = (0..self.chunks())
            .into_par_iter()
            .map(|chunk| {
                let mut w = self.walker(chunk << low);
                let (mut best, mut best_mask) = (w.energy, w.mask);
                for i in 1u64..(1 << low) {
                    w.flip(i.trailing_zeros() as usize);
                    if w.energy < best {
                        best = w.energy;
                        best_mask = w.mask;
                    }
                }
                best_mask
            })
            .collect();
        best_masks
            .into_iter()
            .map(|m| energy_unchecked(self.model, SpinVector::from_mask(m, n).as_slice()))
            .fold(T::infinity(), T::min)
    }

    /// Spin index addressed by lexicographic key bit `b` (spin 0 is the most
    /// significant bit).
    fn spin_of_key_bit(&self, b: usize) -> usize {
        self.model.n - 1 - b
    }

    fn lex_chunk_start(&self, chunk: u64) -> u64 {
        // chunk bits fix spins 0..split, most significant first
        (0..self.split)
            .filter(|&k| chunk >> (self.split - 1 - k) & 1 == 1)
            .fold(0u64, |m, spin| m | 1 << spin)
    }

    /// Walks one chunk in lexicographic order and reports each state whose
    /// exact energy is at most `threshold`. The visitor returns `false` to stop.
    fn walk_lex_chunk(&self, chunk: u64, threshold: T, mut visit: impl FnMut(u64) -> bool) {
        let low = self.model.n - self.split;
        let loose = threshold + self.tie_tolerance;
        let mut w = self.walker(self.lex_chunk_start(chunk));
        let mut counter = 0u64;
        loop {
            if w.energy <= loose {
                let exact = energy_unchecked(
                    self.model,
                    SpinVector::from_mask(w.mask, self.model.n).as_slice(),
                );
                if exact <= threshold && !visit(w.mask) {
                    return;
                }
            }
            counter += 1;
            if counter >> low != 0 {
                return;
            }
            for b in 0..=counter.trailing_zeros() as usize {
                w.flip(self.spin_of_key_bit(b));
            }
        }
    }

    fn first_in_lex_chunk(&self, chunk: u64, threshold: T) -> Option<u64> {
        let mut found = None;
        self.walk_lex_chunk(chunk, threshold, |m| {
            found = Some(m);
            false
        });
        found
    }

    fn all_in_lex_chunk(&self, chunk: u64, threshold: T, limit: usize) -> Vec<u64> {
        let mut out = Vec::new();
        self.walk_lex_chunk(chunk, threshold, |m| {
            out.push(m);
            out.len() < limit
        });
        out
    }
}

impl<T: Scalar> Walker<'_, '_, T> {
    #[inline]
    fn spin(&self, i: usize) -> T {
        if self.mask >> i & 1 == 1 {
            T::one()
        } else {
            -T::one()
        }
    }

    fn resync(&mut self) {
        let n = self.search.model.n;
        for i in 0..n {
            let row = &self.search.sym[i * n..(i + 1) * n];
            self.local[i] = (0..n).map(|j| row[j] * self.spin(j)).sum();
        }
        let spins = SpinVector::from_mask(self.mask, n);
        self.energy = energy_unchecked(self.search.model, spins.as_slice());
        self.flips = 0;
    }

    /// Flips spin `k`, updating energy and local fields in O(n).
    #[inline]
    fn flip(&mut self, k: usize) {
        let n = self.search.model.n;
        let s = self.spin(k);
        let two = T::lit(2.0);
        self.energy = self.energy + two * s * (self.local[k] - self.search.model.field[k]);
        let col = &self.search.sym;
        for i in 0..n {
            self.local[i] = self.local[i] - two * s * col[i * n + k];
        }
        self.mask ^= 1 << k;
        self.flips += 1;
        if self.flips == RESYNC_PERIOD {
            self.resync();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(model: &IsingModel<f64>, s: &SpinVector) -> f64 {
        let n = model.n();
        let s: Vec<f64> = s.to_scalars();
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                e -= 0.5 * model.coupling(i, j) * s[i] * s[j];
            }
            e += model.field()[i] * s[i];
        }
        e
    }

    fn random_model(rng: &mut impl Rng, n: usize, symmetric: bool) -> IsingModel<f64> {
        let mut j = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in 0..n {
                if !symmetric || b >= a {
                    j[a][b] = rng.random_range(-1.0..1.0);
                    if symmetric {
                        j[b][a] = j[a][b];
                    }
                }
            }
        }
        let h = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        IsingModel::new(j, h).unwrap()
    }

    fn random_spins(rng: &mut impl Rng, n: usize) -> SpinVector {
        SpinVector::new((0..n).map(|_| if rng.random() { 1 } else { -1 }).collect()).unwrap()
    }

    /// Plain enumeration in lexicographic order with strict improvement.
    fn oracle_reference(model: &IsingModel<f64>) -> (SpinVector, f64) {
        let n = model.n();
        let mut best: Option<(SpinVector, f64)> = None;
        for key in 0u64..(1 << n) {
            let s = SpinVector::new(
                (0..n)
                    .map(|i| if key >> (n - 1 - i) & 1 == 1 { 1 } else { -1 })
                    .collect(),
            )
            .unwrap();
            let e = naive(model, &s);
            if best.as_ref().is_none_or(|(_, b)| e < *b - 1e-12) {
                best = Some((s, e));
            }
        }
        best.unwrap()
    }

    #[test]
    fn energy_examples() {
        let zero = IsingModel::new(vec![vec![0.0; 2]; 2], vec![0.0; 2]).unwrap();
        assert_eq!(
            energy(&zero, &SpinVector::new(vec![1, 1]).unwrap()).unwrap(),
            0.0
        );

        let single = IsingModel::new(vec![vec![0.0]], vec![1.0]).unwrap();
        assert_eq!(
            energy(&single, &SpinVector::new(vec![-1]).unwrap()).unwrap(),
            -1.0
        );

        let pair = IsingModel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(
            energy(&pair, &SpinVector::new(vec![1, 1]).unwrap()).unwrap(),
            -1.0
        );
    }

    #[test]
    fn energy_rejects_wrong_length() {
        let m = IsingModel::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let err = energy(&m, &SpinVector::new(vec![1, 1]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn oracle_examples() {
        let m = IsingModel::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let g = brute_force_ground_state(&m).unwrap();
        assert_eq!(g.spins.as_slice(), &[-1]);
        assert_eq!(g.energy, -1.0);

        let m = IsingModel::new(vec![vec![0.0]], vec![0.0]).unwrap();
        let g = brute_force_ground_state(&m).unwrap();
        assert_eq!(g.spins.as_slice(), &[-1]);
        assert_eq!(g.energy, 0.0);

        let m = IsingModel::new(vec![vec![0.0, 2.0], vec![2.0, 0.0]], vec![0.0, 0.0]).unwrap();
        let g = brute_force_ground_state(&m).unwrap();
        assert_eq!(g.spins.as_slice(), &[-1, -1]);
        assert_eq!(g.energy, -2.0);
    }

    #[test]
    fn oracle_rejects_above_ceiling() {
        let m = IsingModel::new(vec![vec![0.0; 5]; 5], vec![0.0; 5]).unwrap();
        let err = brute_force_ground_state_with_ceiling(&m, 4).unwrap_err();
        assert_eq!(err, Error::InstanceTooLarge { n: 5, ceiling: 4 });
    }

    #[test]
    fn oracle_matches_plain_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=10 {
            for _ in 0..5 {
                let m = random_model(&mut rng, n, n % 2 == 0);
                let (s, e) = oracle_reference(&m);
                let g = brute_force_ground_state(&m).unwrap();
                assert_eq!(g.spins, s, "n = {n}");
                assert!((g.energy - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn partitioned_oracle_matches_plain_enumeration() {
        // n >= 14 splits the search across chunks
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_model(&mut rng, 15, true);
        let (s, e) = oracle_reference(&m);
        let g = brute_force_ground_state(&m).unwrap();
        assert_eq!(g.spins, s);
        assert!((g.energy - e).abs() < 1e-12);
    }

    #[test]
    fn degenerate_partitioned_instance_breaks_ties_lexicographically() {
        // h = 0, J = 0: every state ties, the all-down vector wins
        let m = IsingModel::new(vec![vec![0.0; 16]; 16], vec![0.0; 16]).unwrap();
        let g = brute_force_ground_state(&m).unwrap();
        assert_eq!(g.spins, SpinVector::down(16));
        let (_, all) = ground_states(&m, 26, 10).unwrap();
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], SpinVector::down(16));
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ground_states_lists_both_ferromagnetic_states() {
        let m = IsingModel::new(vec![vec![0.0, 2.0], vec![2.0, 0.0]], vec![0.0, 0.0]).unwrap();
        let (e, all) = ground_states(&m, 26, 16).unwrap();
        assert_eq!(e, -2.0);
        assert_eq!(
            all,
            vec![
                SpinVector::new(vec![-1, -1]).unwrap(),
                SpinVector::new(vec![1, 1]).unwrap()
            ]
        );
    }

    #[test]
    fn oracle_is_generic_over_f32() {
        let m =
            IsingModel::<f32>::new(vec![vec![0.0, 2.0], vec![2.0, 0.0]], vec![0.5, 0.0]).unwrap();
        let g = brute_force_ground_state(&m).unwrap();
        assert_eq!(g.spins.as_slice(), &[-1, -1]);
        assert_eq!(g.energy, -2.5);
    }

    #[test]
    fn symmetry_flag() {
        let asym = IsingModel::new(vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![0.0, 0.0]).unwrap();
        assert!(!asym.is_symmetric());
        let near =
            IsingModel::new(vec![vec![0.0, 1.0], vec![1.0 + 1e-12, 0.0]], vec![0.0, 0.0]).unwrap();
        assert!(near.is_symmetric());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = IsingModel::new(vec![vec![0.0, 1.5], vec![1.5, 0.0]], vec![0.25, -1.0]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"n":2,"J":[[0.0,1.5],[1.5,0.0]],"h":[0.25,-1.0]}"#);
        let back: IsingModel<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(
            serde_json::from_str::<IsingModel<f64>>(r#"{"n":3,"J":[[0.0]],"h":[1.0]}"#).is_err()
        );
        assert!(
            serde_json::from_str::<IsingModel<f64>>(r#"{"n":1,"J":[[0.0, 1.0]],"h":[1.0]}"#)
                .is_err()
        );
    }

    #[test]
    fn spin_vector_validation() {
        assert!(SpinVector::new(vec![1, 0]).is_err());
        assert!(serde_json::from_str::<SpinVector>("[1,-1,2]").is_err());
        let s = SpinVector::from_mask(0b101, 3);
        assert_eq!(s.as_slice(), &[1, -1, 1]);
        assert_eq!(s.to_mask(), 0b101);
    }

    proptest! {
        #[test]
        fn field_flip_symmetry(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(&mut rng, n, false);
            let s = random_spins(&mut rng, n);
            let lhs = energy(&m.with_negated_field(), &s.negated()).unwrap();
            let rhs = energy(&m, &s).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn energy_matches_naive_double_loop(seed in any::<u64>(), n in 1usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_model(&mut rng, n, seed % 2 == 0);
            let s = random_spins(&mut rng, n);
            let fast = energy(&m, &s).unwrap();
            let slow = naive(&m, &s);
            prop_assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()));
        }
    }

    #[test]
    fn ground_state_bounds_random_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..10 {
            let n = 2 + trial % 11;
            let m = random_model(&mut rng, n, true);
            let g = brute_force_ground_state(&m).unwrap();
            for _ in 0..1000 {
                let s = random_spins(&mut rng, n);
                assert!(g.energy <= energy(&m, &s).unwrap() + 1e-12);
            }
        }
    }
}
