//! The shared 0/1 knapsack instance, solution vectors and the two exact
//! solvers (dynamic programming and exhaustive enumeration) that certify the
//! global optimum.

use std::cmp::Ordering;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Largest item count accepted by [`solve_bruteforce`].
pub const BRUTEFORCE_ITEM_LIMIT: usize = 25;

/// Items, their resource weights and utility values, and the sack capacity.
///
/// Weights are whole resource units for every instance the simulator runs;
/// non-integral weights are still representable so that small instances can
/// be checked by enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance<T>", into = "RawInstance<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct ProblemInstance<T: Scalar> {
    weights: Vec<T>,
    values: Vec<T>,
    capacity: T,
}

#[derive(Serialize, Deserialize)]
struct RawInstance<T> {
    weights: Vec<T>,
    values: Vec<T>,
    capacity: T,
}

impl<T: Scalar> TryFrom<RawInstance<T>> for ProblemInstance<T> {
    type Error = Error;

    fn try_from(raw: RawInstance<T>) -> Result<Self> {
        ProblemInstance::new(raw.weights, raw.values, raw.capacity)
    }
}

impl<T: Scalar> From<ProblemInstance<T>> for RawInstance<T> {
    fn from(p: ProblemInstance<T>) -> Self {
        RawInstance { weights: p.weights, values: p.values, capacity: p.capacity }
    }
}

impl<T: Scalar> ProblemInstance<T> {
    pub fn new(weights: Vec<T>, values: Vec<T>, capacity: T) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("weights: must contain at least one item"));
        }
        if weights.len() != values.len() {
            return Err(invalid(format!(
                "values: expected {} entries to match weights, found {}",
                weights.len(),
                values.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > T::zero())) {
            return Err(invalid(format!("weights[{i}]: must be a positive finite number")));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > T::zero())) {
            return Err(invalid(format!("values[{i}]: must be a positive finite number")));
        }
        if !(capacity.is_finite() && capacity >= T::zero()) {
            return Err(invalid("capacity: must be a non-negative finite number"));
        }
        Ok(Self { weights, values, capacity })
    }

    pub fn item_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn capacity(&self) -> T {
        self.capacity
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Weights as whole units, or `None` if any weight has a fractional part
    /// or does not fit in `u64`.
    pub fn integer_weights(&self) -> Option<Vec<u64>> {
        self.weights
            .iter()
            .map(|w| if w.fract() == T::zero() { w.to_u64() } else { None })
            .collect()
    }

    pub fn with_capacity(&self, capacity: T) -> Result<Self> {
        Self::new(self.weights.clone(), self.values.clone(), capacity)
    }

    pub fn from_json_str(s: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            file: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Random instance: weights uniform in `[1, 1000]`, values uniform in
    /// `(0, 100)`, capacity half the total weight.
    pub fn random<R: Rng + ?Sized>(items: usize, rng: &mut R) -> Result<Self> {
        if items == 0 {
            return Err(invalid("items: must be positive"));
        }
        let weights: Vec<T> = (0..items).map(|_| T::lit(rng.gen_range(1..=1000u32) as f64)).collect();
        let values: Vec<T> = (0..items)
            .map(|_| loop {
                let v: f64 = rng.gen_range(0.0..100.0);
                if v > 0.0 {
                    break T::lit(v);
                }
            })
            .collect();
        let capacity = weights.iter().copied().sum::<T>() * T::lit(0.5);
        Self::new(weights, values, capacity)
    }
}

/// The instance listed in the simulation parameter table: ten items, capacity
/// half of the total weight.
pub fn reference_instance<T: Scalar>() -> ProblemInstance<T> {
    const WEIGHTS: [f64; 10] = [996., 771., 543., 593., 621., 473., 595., 388., 935., 874.];
    const VALUES: [f64; 10] = [
        54.04769411,
        39.33601431,
        14.83657681,
        43.52375770,
        66.31920392,
        26.17907976,
        27.14489409,
        58.72956010,
        25.50253249,
        49.04678721,
    ];
    let weights: Vec<T> = WEIGHTS.iter().map(|&w| T::lit(w)).collect();
    let values = VALUES.iter().map(|&v| T::lit(v)).collect();
    let capacity = weights.iter().copied().sum::<T>() * T::lit(0.5);
    ProblemInstance::new(weights, values, capacity).expect("table instance is valid")
}

/// A selection vector with its cached weight and value. Infeasible vectors
/// are representable.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T: Scalar> {
    pub bits: Vec<bool>,
    pub total_weight: T,
    pub total_value: T,
}

impl<T: Scalar> Solution<T> {
    pub fn is_feasible(&self, instance: &ProblemInstance<T>) -> bool {
        self.total_weight <= instance.capacity
    }

    /// Bits as a `0`/`1` string, item 1 first.
    pub fn bit_string(&self) -> String {
        bits_to_string(&self.bits)
    }
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(invalid(format!("bit string: unexpected character {other:?}"))),
        })
        .collect()
}

/// Orders by value, best first; equal values fall back to ascending
/// lexicographic bit order.
pub fn rank_by_value<T: Scalar>(a: &Solution<T>, b: &Solution<T>) -> Ordering {
    b.total_value
        .partial_cmp(&a.total_value)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.bits.cmp(&b.bits))
}

pub fn evaluate<T: Scalar>(instance: &ProblemInstance<T>, bits: &[bool]) -> Result<Solution<T>> {
    if bits.len() != instance.item_count() {
        return Err(invalid(format!(
            "bit vector has length {}, instance has {} items",
            bits.len(),
            instance.item_count()
        )));
    }
    let mut total_weight = T::zero();
    let mut total_value = T::zero();
    for ((&b, &w), &v) in bits.iter().zip(&instance.weights).zip(&instance.values) {
        if b {
            total_weight = total_weight + w;
            total_value = total_value + v;
        }
    }
    Ok(Solution { bits: bits.to_vec(), total_weight, total_value })
}

pub fn is_feasible<T: Scalar>(instance: &ProblemInstance<T>, solution: &Solution<T>) -> bool {
    solution.is_feasible(instance)
}

/// A certified maximum-value feasible solution.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimumCertificate<T: Scalar> {
    pub solution: Solution<T>,
    pub optimal_value: T,
}

impl<T: Scalar> OptimumCertificate<T> {
    fn from_bits(instance: &ProblemInstance<T>, bits: Vec<bool>) -> Self {
        let solution = evaluate(instance, &bits).expect("solver bits match the instance");
        let optimal_value = solution.total_value;
        Self { solution, optimal_value }
    }

    /// Whether `value` counts as optimal under the shared value tolerance.
    pub fn is_optimal_value(&self, value: T) -> bool {
        value >= self.optimal_value - T::value_tolerance()
    }
}

/// Exact solver over integer capacities. Among optimal selections (values
/// within the value tolerance of the maximum) returns the lexicographically
/// smallest bit vector.
pub fn solve_dp<T: Scalar>(instance: &ProblemInstance<T>) -> Result<OptimumCertificate<T>> {
    let weights = instance.integer_weights().ok_or_else(|| {
        Error::Unsupported("dynamic programming requires integer weights".into())
    })?;
    // Achievable weights are integers, so floor(W) admits the same selections.
    let cap = instance
        .capacity
        .floor()
        .to_usize()
        .ok_or_else(|| Error::Unsupported("capacity does not fit in memory".into()))?;
    let m = weights.len();
    let width = cap + 1;

    // best[i * width + c]: max value from items i.. with capacity c.
    let mut best = vec![T::zero(); (m + 1) * width];
    for i in (0..m).rev() {
        let w = weights[i] as usize;
        let v = instance.values[i];
        for c in 0..width {
            let skip = best[(i + 1) * width + c];
            let take = if w <= c { v + best[(i + 1) * width + c - w] } else { T::neg_infinity() };
            best[i * width + c] = if take > skip { take } else { skip };
        }
    }

    let tol = T::value_tolerance();
    let mut bits = vec![false; m];
    let mut c = cap;
    let mut target = best[c];
    for i in 0..m {
        if best[(i + 1) * width + c] >= target - tol {
            continue;
        }
        bits[i] = true;
        target = target - instance.values[i];
        c -= weights[i] as usize;
    }
    Ok(OptimumCertificate::from_bits(instance, bits))
}

/// Exhaustive enumeration of all `2^M` selections with the same tie-break as
/// [`solve_dp`]. Refuses instances with more than [`BRUTEFORCE_ITEM_LIMIT`]
/// items.
pub fn solve_bruteforce<T: Scalar>(instance: &ProblemInstance<T>) -> Result<OptimumCertificate<T>> {
    let m = instance.item_count();
    if m > BRUTEFORCE_ITEM_LIMIT {
        return Err(Error::TooLarge { items: m, limit: BRUTEFORCE_ITEM_LIMIT });
    }
    // Bit i of the mask (from the top) is item i, so ascending masks are in
    // lexicographic bit-vector order.
    let to_bits = |mask: u32| -> Vec<bool> { (0..m).map(|i| mask >> (m - 1 - i) & 1 == 1).collect() };

    let mut feasible_values = Vec::with_capacity(1 << m);
    let mut max_value = T::neg_infinity();
    for mask in 0u32..(1u32 << m) {
        let s = evaluate(instance, &to_bits(mask))?;
        if s.is_feasible(instance) {
            if s.total_value > max_value {
                max_value = s.total_value;
            }
            feasible_values.push((mask, s.total_value));
        }
    }
    let tol = T::value_tolerance();
    let (mask, _) = feasible_values
        .into_iter()
        .find(|&(_, v)| v >= max_value - tol)
        .expect("the empty selection is always feasible");
    Ok(OptimumCertificate::from_bits(instance, to_bits(mask)))
}
