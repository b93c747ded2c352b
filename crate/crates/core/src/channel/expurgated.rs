//! Expurgated program over joint input pairs with fixed marginals.
//!
//! For `beta ∈ (0, 1]` the Lagrangian minimizer of
//! `E d + I - R + mu (I - R)`, `beta = 1/(1+mu)`, is the entropic transport
//! plan `J_beta = diag(u) [q q^T exp(-beta d)] diag(v)` with both marginals
//! equal to `q`. Its mutual information increases with `beta`; at `beta -> 0`
//! the kernel becomes the finite-distance mask and `I(J_0)` is the smallest
//! rate with a finite exponent.

use crate::info::kl_slice;
use crate::optim::brent_root;

#[derive(Debug, Clone)]
pub(crate) struct Expurgated {
    n: usize,
    q: Vec<f64>,
    /// Row-major distances; `f64::INFINITY` where rows have disjoint support.
    d: Vec<f64>,
    product: Vec<f64>,
    r_inf: f64,
    ed_inf: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Plan {
    pub info: f64,
    pub mean_d: f64,
}

impl Expurgated {
    pub fn new(q: &[f64], rows: &[Vec<f64>]) -> Self {
        let xs: Vec<usize> = (0..q.len()).filter(|&x| q[x] > 0.0).collect();
        let n = xs.len();
        let total: f64 = xs.iter().map(|&x| q[x]).sum();
        let q: Vec<f64> = xs.iter().map(|&x| q[x] / total).collect();
        let mut d = vec![0.0; n * n];
        for (i, &a) in xs.iter().enumerate() {
            for (j, &b) in xs.iter().enumerate() {
                d[i * n + j] = bhattacharyya_raw(&rows[a], &rows[b]);
            }
        }
        let product = (0..n * n).map(|k| q[k / n] * q[k % n]).collect();
        let mut ex = Self {
            n,
            q,
            d,
            product,
            r_inf: 0.0,
            ed_inf: 0.0,
        };
        let p = ex.plan(0.0);
        ex.r_inf = p.info;
        ex.ed_inf = p.mean_d;
        ex
    }

    pub fn r_inf(&self) -> f64 {
        self.r_inf
    }

    /// `E_{q×q} d`, infinite if some pair in the support has disjoint rows.
    pub fn zero_rate_product(&self) -> Option<f64> {
        let mut acc = 0.0;
        for k in 0..self.n * self.n {
            if self.d[k].is_infinite() {
                return None;
            }
            acc += self.product[k] * self.d[k];
        }
        Some(acc)
    }

    /// Sinkhorn scaling of the kernel `q q^T exp(-beta d)`.
    pub fn plan(&self, beta: f64) -> Plan {
        let n = self.n;
        let k: Vec<f64> = (0..n * n)
            .map(|i| if self.d[i].is_infinite() { 0.0 } else { self.product[i] * (-beta * self.d[i]).exp() })
            .collect();
        let mut u = vec![1.0; n];
        let mut v = vec![1.0; n];
        let mut best_err = f64::INFINITY;
        let mut stalled = 0;
        for _ in 0..100_000 {
            for i in 0..n {
                let s: f64 = (0..n).map(|j| k[i * n + j] * v[j]).sum();
                u[i] = self.q[i] / s;
            }
            let mut err = 0.0f64;
            for j in 0..n {
                let s: f64 = (0..n).map(|i| k[i * n + j] * u[i]).sum();
                v[j] = self.q[j] / s;
            }
            for i in 0..n {
                let row: f64 = (0..n).map(|j| u[i] * k[i * n + j] * v[j]).sum();
                err = err.max((row - self.q[i]).abs());
            }
            if err < 1e-16 {
                break;
            }
            // Stop once round-off dominates the marginal error.
            if err < 0.5 * best_err {
                best_err = err;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled > 20 && err < 1e-13 {
                    break;
                }
            }
        }
        let j: Vec<f64> = (0..n * n).map(|idx| u[idx / n] * k[idx] * v[idx % n]).collect();
        let total: f64 = j.iter().sum();
        let j: Vec<f64> = j.iter().map(|x| x / total).collect();
        let mean_d = j.iter().zip(&self.d).filter(|(&p, _)| p > 0.0).map(|(p, d)| p * d).sum();
        Plan {
            info: kl_slice(&j, &self.product),
            mean_d,
        }
    }

    /// Raw expurgated value at rate `r` (may be negative); `None` is `+∞`.
    pub fn value(&self, r: f64) -> Option<f64> {
        if r < self.r_inf - 1e-10 {
            return None;
        }
        if r <= self.r_inf {
            return Some(self.ed_inf);
        }
        let top = self.plan(1.0);
        if top.info <= r {
            return Some(top.mean_d + top.info - r);
        }
        let beta = brent_root(|b| self.plan(b).info - r, 0.0, 1.0, self.r_inf - r, top.info - r, 1e-13);
        if beta <= 0.0 {
            return Some(self.ed_inf);
        }
        let p = self.plan(beta);
        Some(p.mean_d + (p.info - r) / beta)
    }
}

/// `-ln sum_y sqrt(a(y) b(y))`; infinite for disjoint supports.
pub(crate) fn bhattacharyya_raw(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x * y).sqrt()).sum();
    if s <= 0.0 {
        f64::INFINITY
    } else {
        (-s.ln()).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over the single free parameter of a binary joint with
    /// both marginals `q`: `J = [[q0 - t, t], [t, q1 - t]]`.
    fn brute_binary(q0: f64, d: f64, r: f64) -> Option<f64> {
        let q1 = 1.0 - q0;
        let mut best: Option<f64> = None;
        let steps = 200_000;
        for k in 0..=steps {
            let t = q0.min(q1) * k as f64 / steps as f64;
            let j = [q0 - t, t, t, q1 - t];
            let prod = [q0 * q0, q0 * q1, q1 * q0, q1 * q1];
            let info = kl_slice(&j, &prod);
            if info <= r + 1e-12 {
                let v = 2.0 * t * d + info - r;
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        best
    }

    #[test]
    fn binary_matches_brute_force() {
        let rows = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let d = bhattacharyya_raw(&rows[0], &rows[1]);
        for &q0 in &[0.5, 0.3] {
            let ex = Expurgated::new(&[q0, 1.0 - q0], &rows);
            for &r in &[0.0, 0.01, 0.05, 0.1, 0.2, 0.4] {
                let got = ex.value(r).unwrap();
                let want = brute_binary(q0, d, r).unwrap();
                assert!((got - want).abs() < 2e-4, "q0 {q0} r {r}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn zero_rate_is_product_average() {
        let rows = vec![vec![0.95, 0.05], vec![0.05, 0.95]];
        let ex = Expurgated::new(&[0.5, 0.5], &rows);
        let d = -(2.0 * (0.05f64 * 0.95).sqrt()).ln();
        assert!((ex.value(0.0).unwrap() - 0.5 * d).abs() < 1e-12);
        assert_eq!(ex.r_inf(), 0.0);
    }

    #[test]
    fn disjoint_rows_give_infinite_low_rate() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let ex = Expurgated::new(&[0.5, 0.5], &rows);
        assert!((ex.r_inf() - 2f64.ln()).abs() < 1e-12);
        assert!(ex.value(0.5).is_none());
        assert!(ex.zero_rate_product().is_none());
    }
}
