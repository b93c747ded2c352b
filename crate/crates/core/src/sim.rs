//! Monte Carlo simulation of Slepian-Wolf coding at small block lengths.
//!
//! Sequences over `{0..k}` of length `n` are indexed by their base-`k`
//! value with the first letter most significant, so integer order is
//! lexicographic order.

use std::collections::HashMap;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::JointSource;
use crate::types::{enumerate_types, type_count, LogFactorial, TypeDescriptor};

/// Largest exhaustively enumerable sequence space, `2^24`.
pub const ENUMERATION_LIMIT: u64 = 1 << 24;

/// Extra rate above `H(X|Y)` used for the bins of protected type classes.
pub const PROTECTED_RATE_MARGIN: f64 = 0.05;

const CHUNK: u64 = 2048;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimMode {
    FixedRandomBinning,
    VariableExact,
    VariableMassAccounting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub source: JointSource,
    pub n: u32,
    /// Nats per source letter.
    pub rate: f64,
    pub trials: u64,
    pub seed: u64,
    pub mode: SimMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    /// Average description length in nats per letter.
    pub empirical_rate: f64,
    pub p_error: f64,
    pub p_correct: f64,
    /// Half-width of the 95% Wilson interval for `p_error`.
    pub ci_halfwidth: f64,
    pub trials_run: u64,
    /// Number of bins per coded class.
    pub bins: u64,
    pub wallclock_ms: u64,
}

impl SimResult {
    /// 95% Wilson interval for the error probability.
    pub fn error_interval(&self) -> (f64, f64) {
        let (c, h) = wilson(self.p_error, self.trials_run);
        (c - h, c + h)
    }

    /// 95% Wilson interval for the correct-decoding probability.
    pub fn correct_interval(&self) -> (f64, f64) {
        let (lo, hi) = self.error_interval();
        (1.0 - hi, 1.0 - lo)
    }
}

/// Center and half-width of the 95% Wilson score interval.
pub fn wilson(p_hat: f64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (p_hat, 0.0);
    }
    let n = trials as f64;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt();
    (center, half)
}

/// MAP decoding: the candidate minimizing `-sum_i ln P_XY(x_i, y_i)`, ties
/// going to the lexicographically smallest candidate.
pub fn map_decode(src: &JointSource, candidates: &[Vec<usize>], y: &[usize]) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(Error::Precondition("candidate set is empty".into()));
    }
    let (nx, ny) = (src.nx(), src.ny());
    if let Some(&b) = y.iter().find(|&&b| b >= ny) {
        return Err(Error::DimensionMismatch { expected: ny, found: b + 1 });
    }
    let mut best: Option<(f64, &Vec<usize>)> = None;
    for c in candidates {
        if c.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: y.len(), found: c.len() });
        }
        let mut counts = vec![0u32; nx * ny];
        for (&a, &b) in c.iter().zip(y) {
            if a >= nx {
                return Err(Error::DimensionMismatch { expected: nx, found: a + 1 });
            }
            counts[a * ny + b] += 1;
        }
        let mut score = 0.0;
        for (idx, &k) in counts.iter().enumerate() {
            if k > 0 {
                score -= k as f64 * src.get(idx / ny, idx % ny).ln();
            }
        }
        let better = match best {
            None => true,
            Some((s, b)) if s.is_finite() => {
                let tol = 1e-12 * (1.0 + s.abs());
                score < s - tol || ((score - s).abs() <= tol && c < b)
            }
            Some((s, b)) => score < s || (score == s && c < b),
        };
        if better {
            best = Some((score, c));
        }
    }
    Ok(best.expect("nonempty").1.clone())
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d1_049b_b133_111b);
    z ^ (z >> 31)
}

/// Seeded uniform bin of sequence `x` among `bins`.
fn bin_of(seed: u64, x: u64, bins: u64) -> u64 {
    splitmix(splitmix(seed) ^ x) % bins
}

fn sequence_space(k: usize, n: u32) -> Result<u64> {
    (k as u64)
        .checked_pow(n)
        .filter(|&s| s <= ENUMERATION_LIMIT)
        .ok_or_else(|| Error::EnumerationLimit(format!("{k}^{n} sequences exceed the exhaustive limit of 2^24")))
}

fn bins_for(n: u32, rate: f64) -> Result<u64> {
    let b = (n as f64 * rate).exp().ceil();
    if !(b.is_finite() && b < 1e18) {
        return Err(Error::Precondition(format!("bin count e^(n R) too large for rate {rate}")));
    }
    Ok((b as u64).max(1))
}

fn bits_for(count: u64) -> u64 {
    if count <= 1 {
        0
    } else {
        64 - (count - 1).leading_zeros() as u64
    }
}

/// Candidate lists grouped by a key, each list in ascending sequence order.
struct Groups {
    ranges: HashMap<u64, (usize, usize)>,
    members: Vec<u32>,
}

impl Groups {
    fn build(space: u64, key: impl Fn(u64) -> u64 + Sync) -> Self {
        let keys: Vec<u64> = (0..space).into_par_iter().map(&key).collect();
        let mut members: Vec<u32> = (0..space as u32).collect();
        members.par_sort_by_key(|&x| (keys[x as usize], x));
        let mut ranges = HashMap::new();
        let mut start = 0;
        for i in 1..=members.len() {
            if i == members.len() || keys[members[i] as usize] != keys[members[start] as usize] {
                ranges.insert(keys[members[start] as usize], (start, i));
                start = i;
            }
        }
        Self { ranges, members }
    }

    fn get(&self, key: u64) -> &[u32] {
        let (a, b) = self.ranges[&key];
        &self.members[a..b]
    }
}

/// Per-trial score tables over blocks of consecutive letters.
struct Scorer {
    k: u64,
    n: usize,
    /// `(shift, width)` per block: the block value is `(x / k^shift) % k^width`.
    blocks: Vec<(u32, u32)>,
    /// `(k^shift, k^width)` per block.
    radix: Vec<(u64, u64)>,
    /// `log2 k` when `k` is a power of two.
    pow2_bits: Option<u32>,
    neg_log: Vec<f64>,
    ny: usize,
}

impl Scorer {
    fn new(src: &JointSource, n: u32) -> Self {
        let k = src.nx() as u64;
        let mut width = 1;
        while k.pow(width + 1) <= 256 && width < n {
            width += 1;
        }
        let mut blocks = Vec::new();
        let mut shift = 0;
        while shift < n {
            let w = width.min(n - shift);
            blocks.push((shift, w));
            shift += w;
        }
        let ny = src.ny();
        let neg_log = (0..src.nx() * ny)
            .map(|i| {
                let p = src.get(i / ny, i % ny);
                if p > 0.0 {
                    -p.ln()
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let radix = blocks.iter().map(|&(sh, w)| (k.pow(sh), k.pow(w))).collect();
        let pow2_bits = k.is_power_of_two().then(|| k.trailing_zeros());
        Self { k, n: n as usize, blocks, radix, pow2_bits, neg_log, ny }
    }

    /// Fills one table per block; entry `v` is the score of the block's
    /// letters spelled by the base-`k` digits of `v`.
    fn fill_tables(&self, y: &[usize], tables: &mut Vec<Vec<f64>>) {
        tables.resize(self.blocks.len(), Vec::new());
        let k = self.k as usize;
        for (&(shift, w), t) in self.blocks.iter().zip(tables.iter_mut()) {
            t.clear();
            t.push(0.0);
            // Extend by one digit at a time, most significant first.
            for j in (0..w).rev() {
                let pos = self.n - 1 - (shift + j) as usize;
                let len = t.len();
                t.resize(len * k, 0.0);
                for u in (0..len).rev() {
                    let base = t[u];
                    for d in 0..k {
                        t[u * k + d] = base + self.neg_log[d * self.ny + y[pos]];
                    }
                }
            }
        }
    }

    #[cfg(test)]
    fn tables(&self, y: &[usize]) -> Vec<Vec<f64>> {
        let mut t = Vec::new();
        self.fill_tables(y, &mut t);
        t
    }

    fn score(&self, tables: &[Vec<f64>], x: u64) -> f64 {
        match self.pow2_bits {
            Some(b) => self
                .blocks
                .iter()
                .zip(tables)
                .map(|(&(sh, w), t)| t[((x >> (sh * b)) & ((1u64 << (w * b)) - 1)) as usize])
                .sum(),
            None => self.radix.iter().zip(tables).map(|(&(d, m), t)| t[((x / d) % m) as usize]).sum(),
        }
    }

    fn decode(&self, tables: &[Vec<f64>], candidates: &[u32]) -> u64 {
        let mut best = (f64::INFINITY, u64::MAX);
        for &c in candidates {
            let s = self.score(tables, c as u64);
            if best.1 == u64::MAX || s < best.0 - 1e-9 * (1.0 + best.0.abs()) {
                best = (s, c as u64);
            }
        }
        best.1
    }
}

/// Draws `(x, y)` letter pairs from `P_XY`; returns the sequence index of `x`.
fn sample_pair(rng: &mut ChaCha8Rng, cdf: &[f64], ny: usize, k: u64, y: &mut [usize]) -> u64 {
    let mut x = 0u64;
    for slot in y.iter_mut() {
        let u: f64 = rng.random();
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        x = x * k + (idx / ny) as u64;
        *slot = idx % ny;
    }
    x
}

fn joint_cdf(src: &JointSource) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = src.joint().iter().flatten().map(|p| {
        acc += p;
        acc
    })
    .collect();
    *cdf.last_mut().expect("nonempty joint") = 1.0;
    cdf
}

/// Runs `trials` independent trials in fixed chunks, each with its own
/// ChaCha stream, and returns the number of errors.
fn count_errors(
    cfg: &SimConfig,
    trial: impl Fn(&mut ChaCha8Rng, &mut Vec<usize>, &mut Vec<Vec<f64>>) -> bool + Sync,
) -> Result<u64> {
    let chunks = cfg.trials.div_ceil(CHUNK);
    let n = cfg.n as usize;
    crate::parallel::install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(c);
                let todo = CHUNK.min(cfg.trials - c * CHUNK);
                let mut y = vec![0usize; n];
                let mut tables = Vec::new();
                (0..todo).filter(|_| !trial(&mut rng, &mut y, &mut tables)).count() as u64
            })
            .sum()
    })
}

fn type_key(x: u64, k: u64, n: u32) -> Vec<u32> {
    let mut counts = vec![0u32; k as usize];
    let mut v = x;
    for _ in 0..n {
        counts[(v % k) as usize] += 1;
        v /= k;
    }
    counts
}

/// Protected types: the shortest prefix, in order of `l1` distance of the
/// type from `P_X` and then lexicographic order, whose total probability
/// reaches `target`.
fn protected_types(src: &JointSource, n: u32, target: f64) -> Result<(Vec<TypeDescriptor>, Vec<f64>, Vec<bool>)> {
    let types = enumerate_types(n, src.nx())?;
    let lf = LogFactorial::new(n as usize);
    let px = src.marginal_x();
    let mass: Vec<f64> = types
        .iter()
        .map(|t| crate::types::type_class_log_mass(t, px, &lf).map(f64::exp))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..types.len()).collect();
    let dist = |t: &TypeDescriptor| -> f64 {
        t.counts().iter().zip(px.probs()).map(|(&c, &p)| (c as f64 / n as f64 - p).abs()).sum()
    };
    order.sort_by(|&a, &b| dist(&types[a]).total_cmp(&dist(&types[b])).then(a.cmp(&b)));
    let mut protected = vec![false; types.len()];
    let mut acc = 0.0;
    for &i in &order {
        if acc >= target {
            break;
        }
        protected[i] = true;
        acc += mass[i];
    }
    Ok((types, mass, protected))
}

fn header_bits(src: &JointSource, n: u32) -> u64 {
    bits_for(type_count(n, src.nx()) as u64)
}

fn validate(cfg: &SimConfig) -> Result<()> {
    if !(cfg.rate.is_finite() && cfg.rate > 0.0) {
        return Err(Error::InvalidRate(cfg.rate));
    }
    if cfg.n == 0 {
        return Err(Error::Precondition("block length must be at least 1".into()));
    }
    match cfg.mode {
        SimMode::FixedRandomBinning | SimMode::VariableExact => {
            sequence_space(cfg.source.nx(), cfg.n)?;
            if cfg.trials == 0 {
                return Err(Error::Precondition("at least one trial is required".into()));
            }
        }
        SimMode::VariableMassAccounting => {
            if cfg.source.nx() != 2 {
                return Err(Error::Unsupported("mass accounting needs a binary source alphabet".into()));
            }
        }
    }
    Ok(())
}

pub fn run(cfg: &SimConfig) -> Result<SimResult> {
    validate(cfg)?;
    let start = Instant::now();
    let (empirical_rate, p_error, trials_run, bins) = match cfg.mode {
        SimMode::FixedRandomBinning => run_fixed(cfg)?,
        SimMode::VariableExact => run_variable(cfg)?,
        SimMode::VariableMassAccounting => run_mass(cfg)?,
    };
    let ci_halfwidth = if trials_run > 0 { wilson(p_error, trials_run).1 } else { 0.0 };
    Ok(SimResult {
        config: cfg.clone(),
        empirical_rate,
        p_error,
        p_correct: 1.0 - p_error,
        ci_halfwidth,
        trials_run,
        bins,
        wallclock_ms: start.elapsed().as_millis() as u64,
    })
}

fn run_fixed(cfg: &SimConfig) -> Result<(f64, f64, u64, u64)> {
    let src = &cfg.source;
    let space = sequence_space(src.nx(), cfg.n)?;
    let bins = bins_for(cfg.n, cfg.rate)?;
    let k = src.nx() as u64;
    let groups = Groups::build(space, |x| bin_of(cfg.seed, x, bins));
    let scorer = Scorer::new(src, cfg.n);
    let cdf = joint_cdf(src);
    let errors = count_errors(cfg, |rng, y, tables| {
        let x = sample_pair(rng, &cdf, src.ny(), k, y);
        scorer.fill_tables(y, tables);
        scorer.decode(tables, groups.get(bin_of(cfg.seed, x, bins))) == x
    })?;
    let rate = (bins as f64).ln() / cfg.n as f64;
    Ok((rate, errors as f64 / cfg.trials as f64, cfg.trials, bins))
}

fn run_variable(cfg: &SimConfig) -> Result<(f64, f64, u64, u64)> {
    let src = &cfg.source;
    let n = cfg.n;
    let space = sequence_space(src.nx(), n)?;
    let k = src.nx() as u64;
    let h = src.conditional_entropy();
    let (types, mass, protected) = protected_types(src, n, (cfg.rate / h).min(1.0))?;
    let index: HashMap<Vec<u32>, usize> = types.iter().enumerate().map(|(i, t)| (t.counts().to_vec(), i)).collect();
    let bins = bins_for(n, h + PROTECTED_RATE_MARGIN)?;
    // Group key: type index times (bins + 1), plus the bin for protected
    // classes or `bins` for uncoded ones.
    let key = |x: u64| -> u64 {
        let t = index[&type_key(x, k, n)];
        let slot = if protected[t] { bin_of(cfg.seed, x, bins) } else { bins };
        t as u64 * (bins + 1) + slot
    };
    let groups = Groups::build(space, key);
    let scorer = Scorer::new(src, n);
    let cdf = joint_cdf(src);
    let errors = count_errors(cfg, |rng, y, tables| {
        let x = sample_pair(rng, &cdf, src.ny(), k, y);
        scorer.fill_tables(y, tables);
        scorer.decode(tables, groups.get(key(x))) == x
    })?;
    let header = header_bits(src, n) as f64;
    let p_protected: f64 = mass.iter().zip(&protected).filter(|(_, &p)| p).map(|(m, _)| m).sum();
    let mean_bits = header + p_protected * bits_for(bins) as f64;
    let rate = mean_bits * 2f64.ln() / n as f64;
    Ok((rate, errors as f64 / cfg.trials as f64, cfg.trials, bins))
}

fn run_mass(cfg: &SimConfig) -> Result<(f64, f64, u64, u64)> {
    let src = &cfg.source;
    let n = cfg.n;
    let h = src.conditional_entropy();
    let (_, mass, protected) = protected_types(src, n, (cfg.rate / h).min(1.0))?;
    let p_correct: f64 = mass.iter().zip(&protected).filter(|(_, &p)| p).map(|(m, _)| m).sum::<f64>().min(1.0);
    let coded_bits = (n as f64 * (h + PROTECTED_RATE_MARGIN) / 2f64.ln()).ceil();
    let mean_bits = header_bits(src, n) as f64 + p_correct * coded_bits;
    let rate = mean_bits * 2f64.ln() / n as f64;
    let bins = (coded_bits.min(63.0).exp2()) as u64;
    Ok((rate, 1.0 - p_correct, 0, bins))
}
