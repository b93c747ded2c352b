//! Method-of-types utilities: type enumeration, class sizes and probabilities.

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::info::{entropy_slice, kl_slice, Distribution};

/// Empirical type of a length-`n` sequence, stored as letter counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TypeDescriptor {
    counts: Vec<u32>,
    n: u32,
}

impl TypeDescriptor {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidDistribution("empty type".into()));
        }
        let n: u32 = counts.iter().sum();
        if n == 0 {
            return Err(Error::Precondition("block length must be at least 1".into()));
        }
        Ok(Self { counts, n })
    }

    /// Type of an explicit sequence over `0..k`.
    pub fn of_sequence(seq: &[usize], k: usize) -> Result<Self> {
        let mut counts = vec![0u32; k];
        for &s in seq {
            if s >= k {
                return Err(Error::DimensionMismatch { expected: k, found: s + 1 });
            }
            counts[s] += 1;
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn distribution(&self) -> Distribution {
        Distribution::from_raw(self.counts.iter().map(|&c| c as f64 / self.n as f64).collect())
    }

    fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }
}

/// All types of length `n` over `k` letters, in lexicographic order of counts.
pub fn enumerate_types(n: u32, k: usize) -> Result<Vec<TypeDescriptor>> {
    if n == 0 || k == 0 {
        return Err(Error::Precondition("need n >= 1 and a nonempty alphabet".into()));
    }
    let mut out = Vec::new();
    let mut counts = vec![0u32; k];
    fill(&mut counts, 0, n, n, &mut out);
    Ok(out)
}

fn fill(counts: &mut Vec<u32>, pos: usize, left: u32, n: u32, out: &mut Vec<TypeDescriptor>) {
    if pos + 1 == counts.len() {
        counts[pos] = left;
        out.push(TypeDescriptor { counts: counts.clone(), n });
        return;
    }
    for c in 0..=left {
        counts[pos] = c;
        fill(counts, pos + 1, left - c, n, out);
    }
}

/// Number of types `|P_n|` of length `n` over `k` letters: `C(n+k-1, k-1)`.
pub fn type_count(n: u32, k: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..k as u128 {
        c = c * (n as u128 + i) / i;
    }
    c
}

/// Cached `ln(i!)` values built by summing logarithms.
#[derive(Debug, Clone)]
pub struct LogFactorial {
    table: Vec<f64>,
}

impl LogFactorial {
    pub fn new(max: usize) -> Self {
        let mut table = Vec::with_capacity(max + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for i in 1..=max {
            acc += (i as f64).ln();
            table.push(acc);
        }
        Self { table }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.table[i]
    }

    /// `ln` of the multinomial coefficient for the given counts.
    pub fn log_multinomial(&self, counts: &[u32]) -> f64 {
        let n: u32 = counts.iter().sum();
        self.get(n as usize) - counts.iter().map(|&c| self.get(c as usize)).sum::<f64>()
    }
}

/// Exact `|T_n(Q)|`, or `None` when it does not fit in 128 bits.
pub fn type_class_size(t: &TypeDescriptor) -> Option<u128> {
    let mut acc: u128 = 1;
    let mut placed: u128 = 0;
    for &c in &t.counts {
        for j in 1..=c as u128 {
            placed += 1;
            // acc * placed is divisible by j: the quotient is the next binomial step.
            acc = acc.checked_mul(placed)? / j;
        }
    }
    Some(acc)
}

/// `ln |T_n(Q)|`, always available.
pub fn type_class_log_size(t: &TypeDescriptor) -> f64 {
    LogFactorial::new(t.n as usize).log_multinomial(&t.counts)
}

/// `ln P^n(x)` for any `x` of type `t`: `-n [D(Q||P) + H(Q)]`.
pub fn type_class_log_prob(t: &TypeDescriptor, p: &Distribution) -> Result<f64> {
    check_dim(p.len(), t.alphabet_size())?;
    let q = t.frequencies();
    let d = kl_slice(&q, p.probs());
    Ok(-(t.n as f64) * (d + entropy_slice(&q)))
}

/// `ln P^n(T_n(Q))`: log-probability of the whole type class.
pub fn type_class_log_mass(t: &TypeDescriptor, p: &Distribution, lf: &LogFactorial) -> Result<f64> {
    check_dim(p.len(), t.alphabet_size())?;
    let mut acc = lf.log_multinomial(&t.counts);
    for (&c, &pi) in t.counts.iter().zip(p.probs()) {
        if c > 0 {
            if pi <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            acc += c as f64 * pi.ln();
        }
    }
    Ok(acc)
}
