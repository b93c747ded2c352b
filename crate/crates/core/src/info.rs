//! Probability containers and information measures (natural log throughout).

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::ext::ExtReal;

/// Tolerance on stochasticity when constructing containers.
pub const STOCH_TOL: f64 = 1e-12;

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates and renormalizes. Zero entries are allowed.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {bad} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > STOCH_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
        }
        Ok(Self {
            probs: probs.into_iter().map(|p| p / total).collect(),
        })
    }

    /// Like [`Distribution::new`] but rejects zero entries and alphabets
    /// smaller than two; used for source marginals.
    pub fn new_positive(probs: Vec<f64>) -> Result<Self> {
        let d = Self::new(probs)?;
        if d.len() < 2 {
            return Err(Error::InvalidDistribution("alphabet must have at least two letters".into()));
        }
        if d.probs.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidDistribution("zero entry in a marginal".into()));
        }
        Ok(d)
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0);
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(k: usize, at: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        Self { probs }
    }

    /// Builds from a vector that is already a probability vector up to
    /// round-off; used internally by solvers.
    pub(crate) fn from_raw(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            *p = p.max(0.0);
        }
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, _)| i)
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// A row-stochastic matrix `W(y|x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    rows: Vec<Vec<f64>>,
    out_size: usize,
}

impl Channel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidChannel("no input letters".into()));
        }
        let out_size = rows[0].len();
        let mut out = Vec::with_capacity(rows.len());
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != out_size {
                return Err(Error::InvalidChannel(format!("row {x} has {} entries, expected {out_size}", row.len())));
            }
            let d = Distribution::new(row).map_err(|e| Error::InvalidChannel(format!("row {x}: {e}")))?;
            out.push(d.probs);
        }
        Ok(Self { rows: out, out_size })
    }

    pub(crate) fn from_raw(rows: Vec<Vec<f64>>) -> Self {
        let out_size = rows[0].len();
        Self {
            rows: rows.into_iter().map(|r| Distribution::from_raw(r).probs).collect(),
            out_size,
        }
    }

    /// Noiseless channel on `k` letters.
    pub fn identity(k: usize) -> Self {
        Self {
            rows: (0..k).map(|x| Distribution::point_mass(k, x).probs).collect(),
            out_size: k,
        }
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Self {
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]]).expect("crossover in [0, 1]")
    }

    pub fn in_size(&self) -> usize {
        self.rows.len()
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.rows[x][y]
    }

    /// Output distribution induced by input `q`.
    pub fn output(&self, q: &Distribution) -> Result<Distribution> {
        check_dim(self.in_size(), q.len())?;
        Ok(Distribution::from_raw(output_marginal(q.probs(), &self.rows)))
    }
}

/// A joint distribution `P_XY` with strictly positive marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SourceDoc", into = "SourceDoc")]
pub struct JointSource {
    joint: Vec<Vec<f64>>,
    marginal_x: Distribution,
    marginal_y: Distribution,
    forward: Channel,
    backward: Channel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SourceDoc {
    alphabet_x: usize,
    alphabet_y: usize,
    joint: Vec<Vec<f64>>,
}

impl TryFrom<SourceDoc> for JointSource {
    type Error = Error;

    fn try_from(doc: SourceDoc) -> Result<Self> {
        if doc.joint.len() != doc.alphabet_x {
            return Err(Error::Parse(format!("alphabet_x = {} but joint has {} rows", doc.alphabet_x, doc.joint.len())));
        }
        if let Some(row) = doc.joint.iter().find(|r| r.len() != doc.alphabet_y) {
            return Err(Error::Parse(format!("alphabet_y = {} but a row has {} entries", doc.alphabet_y, row.len())));
        }
        Self::new(doc.joint)
    }
}

impl From<JointSource> for SourceDoc {
    fn from(src: JointSource) -> Self {
        SourceDoc {
            alphabet_x: src.nx(),
            alphabet_y: src.ny(),
            joint: src.joint,
        }
    }
}

impl JointSource {
    pub fn new(joint: Vec<Vec<f64>>) -> Result<Self> {
        let nx = joint.len();
        if nx < 2 {
            return Err(Error::InvalidSource("need at least two source letters".into()));
        }
        let ny = joint[0].len();
        if ny == 0 || joint.iter().any(|r| r.len() != ny) {
            return Err(Error::InvalidSource("joint matrix is ragged or empty".into()));
        }
        let flat: Vec<f64> = joint.iter().flatten().copied().collect();
        let flat = Distribution::new(flat).map_err(|e| Error::InvalidSource(e.to_string()))?;
        let joint: Vec<Vec<f64>> = flat.probs().chunks(ny).map(|c| c.to_vec()).collect();

        let px: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
        let py: Vec<f64> = (0..ny).map(|y| joint.iter().map(|r| r[y]).sum()).collect();
        let marginal_x = Distribution::new_positive(px.clone()).map_err(|e| Error::InvalidSource(format!("X marginal: {e}")))?;
        if py.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidSource("Y marginal has a zero entry".into()));
        }
        let marginal_y = Distribution::from_raw(py.clone());
        let forward = Channel::from_raw(joint.iter().zip(&px).map(|(r, &p)| r.iter().map(|v| v / p).collect()).collect());
        let backward = Channel::from_raw((0..ny).map(|y| joint.iter().map(|r| r[y] / py[y]).collect()).collect());
        let src = Self {
            joint,
            marginal_x,
            marginal_y,
            forward,
            backward,
        };
        if src.conditional_entropy() <= 0.0 {
            return Err(Error::InvalidSource("H(X|Y) must be positive".into()));
        }
        Ok(src)
    }

    /// Builds `P_XY = P_X × P_{Y|X}`.
    pub fn from_parts(px: &Distribution, w: &Channel) -> Result<Self> {
        check_dim(w.in_size(), px.len())?;
        Self::new(w.rows().iter().zip(px.probs()).map(|(r, &p)| r.iter().map(|v| v * p).collect()).collect())
    }

    /// Parses `{"alphabet_x": n, "alphabet_y": m, "joint": [[...]]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SourceDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::try_from(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain numeric document")
    }

    pub fn nx(&self) -> usize {
        self.joint.len()
    }

    pub fn ny(&self) -> usize {
        self.joint[0].len()
    }

    pub fn joint(&self) -> &[Vec<f64>] {
        &self.joint
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.joint[x][y]
    }

    pub fn marginal_x(&self) -> &Distribution {
        &self.marginal_x
    }

    pub fn marginal_y(&self) -> &Distribution {
        &self.marginal_y
    }

    /// `P_{Y|X}`.
    pub fn forward(&self) -> &Channel {
        &self.forward
    }

    /// `P_{X|Y}`.
    pub fn backward(&self) -> &Channel {
        &self.backward
    }

    /// `H(X|Y)` in nats.
    pub fn conditional_entropy(&self) -> f64 {
        self.marginal_y
            .probs()
            .iter()
            .zip(self.backward.rows())
            .map(|(&p, row)| p * entropy_slice(row))
            .sum()
    }

    pub fn entropy_x(&self) -> f64 {
        entropy(&self.marginal_x)
    }
}

/// `(1+u)ln(1+u) - u`, accurate for small `|u|`.
pub(crate) fn phi(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        // Alternating series sum_{k>=2} (-1)^k u^k / (k(k-1)).
        let mut term = u * u;
        let mut acc = 0.0;
        for k in 2..9 {
            let kf = k as f64;
            acc += term / (kf * (kf - 1.0));
            term *= -u;
        }
        acc
    } else if u == -1.0 {
        1.0
    } else {
        (1.0 + u) * u.ln_1p() - u
    }
}

pub(crate) fn entropy_slice(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// `D(a||b)` for two probability vectors; `f64::INFINITY` on support violation.
/// Evaluated as `sum b * phi(a/b - 1)`, which is a sum of nonnegative terms.
pub(crate) fn kl_slice(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&ai, &bi) in a.iter().zip(b) {
        if bi <= 0.0 {
            if ai > 0.0 {
                return f64::INFINITY;
            }
        } else {
            acc += bi * phi(ai / bi - 1.0);
        }
    }
    acc
}

pub(crate) fn output_marginal(q: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows[0].len();
    let mut out = vec![0.0; m];
    for (&qx, row) in q.iter().zip(rows) {
        if qx > 0.0 {
            for (o, &w) in out.iter_mut().zip(row) {
                *o += qx * w;
            }
        }
    }
    out
}

pub(crate) fn mutual_information_raw(q: &[f64], rows: &[Vec<f64>]) -> f64 {
    let out = output_marginal(q, rows);
    q.iter()
        .zip(rows)
        .filter(|(&qx, _)| qx > 0.0)
        .map(|(&qx, row)| qx * kl_slice(row, &out))
        .sum()
}

pub(crate) fn cond_kl_raw(v: &[Vec<f64>], w: &[Vec<f64>], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((&qx, vr), wr) in q.iter().zip(v).zip(w) {
        if qx > 0.0 {
            let d = kl_slice(vr, wr);
            if d.is_infinite() {
                return f64::INFINITY;
            }
            acc += qx * d;
        }
    }
    acc
}

/// Binary entropy `H_b(p)` in nats.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_slice(&[p, 1.0 - p])
}

/// Shannon entropy in nats.
pub fn entropy(p: &Distribution) -> f64 {
    entropy_slice(p.probs())
}

/// `I(q, W)` in nats.
pub fn mutual_information(q: &Distribution, w: &Channel) -> Result<f64> {
    check_dim(w.in_size(), q.len())?;
    Ok(mutual_information_raw(q.probs(), w.rows()))
}

/// `D(q || p)`.
pub fn kl_divergence(q: &Distribution, p: &Distribution) -> Result<ExtReal> {
    check_dim(p.len(), q.len())?;
    Ok(ExtReal::from(kl_slice(q.probs(), p.probs())))
}

/// `D(V || W | q) = sum_x q(x) D(V(.|x) || W(.|x))`; rows with `q(x) = 0` are ignored.
pub fn cond_kl_divergence(v: &Channel, w: &Channel, q: &Distribution) -> Result<ExtReal> {
    check_dim(w.in_size(), v.in_size())?;
    check_dim(w.out_size(), v.out_size())?;
    check_dim(w.in_size(), q.len())?;
    Ok(ExtReal::from(cond_kl_raw(v.rows(), w.rows(), q.probs())))
}
