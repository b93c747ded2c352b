//! Closed forms for the doubly binary source with `P_{X|Y}(1|0) = P_{X|Y}(0|1) = p`
//! and `P_Y(0) = tau`.

use serde::{Deserialize, Serialize};

use crate::channel::bhattacharyya_raw;
use crate::error::{Error, Result};
use crate::info::{binary_entropy, kl_slice, Channel, Distribution, JointSource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryExample {
    pub p: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClosedFormKind {
    FixedSp,
    FixedCorrect,
    ExZero,
    VarSpAtHPX,
}

fn d_b(a: f64, b: f64) -> f64 {
    kl_slice(&[a, 1.0 - a], &[b, 1.0 - b])
}

impl BinaryExample {
    pub fn new(p: f64, tau: f64) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::Precondition(format!("p must lie in (0, 0.5), got {p}")));
        }
        if !(tau > 0.0 && tau <= 0.5) {
            return Err(Error::Precondition(format!("tau must lie in (0, 0.5], got {tau}")));
        }
        Ok(Self { p, tau })
    }

    pub fn source(&self) -> JointSource {
        let (p, t) = (self.p, self.tau);
        JointSource::new(vec![vec![t * (1.0 - p), (1.0 - t) * p], vec![t * p, (1.0 - t) * (1.0 - p)]])
            .expect("valid parameters give a valid joint")
    }

    /// `P_X(0) = tau (1-p) + (1-tau) p`.
    pub fn px0(&self) -> f64 {
        self.tau * (1.0 - self.p) + (1.0 - self.tau) * self.p
    }

    /// `P_{Y|X}` from the closed-form identities.
    pub fn forward(&self) -> Channel {
        let (p, t) = (self.p, self.tau);
        let a = (1.0 - t) * p / (t * (1.0 - p) + (1.0 - t) * p);
        let b = t * p / (t * p + (1.0 - t) * (1.0 - p));
        Channel::from_raw(vec![vec![1.0 - a, a], vec![b, 1.0 - b]])
    }

    /// Minimizer `Q*_Y(y) ∝ prod_x P_{Y|X}(y|x)^{P_X(x)}` of the zero-rate
    /// sphere-packing program at input `P_X`.
    pub fn q_star_y(&self) -> Distribution {
        let w = self.forward();
        let px = [self.px0(), 1.0 - self.px0()];
        let un: Vec<f64> = (0..2).map(|y| (0..2).map(|x| w.get(x, y).powf(px[x])).product()).collect();
        let z: f64 = un.iter().sum();
        Distribution::from_raw(un.into_iter().map(|v| v / z).collect())
    }

    pub fn closed_form(&self, kind: ClosedFormKind, r: Option<f64>, q: Option<&Distribution>) -> Result<f64> {
        let hp = binary_entropy(self.p);
        let need_r = || r.ok_or_else(|| Error::Precondition("rate required".into()));
        let out_of_domain = |r: f64| Error::InvalidRate(r);
        match kind {
            ClosedFormKind::FixedSp => {
                let r = need_r()?;
                if r < hp - 1e-12 || r > 2f64.ln() + 1e-12 {
                    return Err(out_of_domain(r));
                }
                Ok(d_b(h_binary_inverse(r)?, self.p))
            }
            ClosedFormKind::FixedCorrect => {
                let r = need_r()?;
                if !(-1e-12..=hp + 1e-12).contains(&r) {
                    return Err(out_of_domain(r));
                }
                Ok(d_b(h_binary_inverse(r.max(0.0))?, self.p))
            }
            ClosedFormKind::ExZero => {
                let q = q.ok_or_else(|| Error::Precondition("input distribution required".into()))?;
                if q.len() != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, found: q.len() });
                }
                let w = self.forward();
                Ok(2.0 * q[0] * q[1] * bhattacharyya_raw(w.row(0), w.row(1)))
            }
            ClosedFormKind::VarSpAtHPX => {
                let w = self.forward();
                let qs = self.q_star_y();
                let px = [self.px0(), 1.0 - self.px0()];
                Ok((0..2).map(|x| px[x] * kl_slice(qs.probs(), w.row(x))).sum())
            }
        }
    }
}

/// The `q <= 1/2` solving `H_b(q) = r`, by bisection.
pub fn h_binary_inverse(r: f64) -> Result<f64> {
    let top = 2f64.ln();
    if !(r >= -1e-12 && r <= top + 1e-12) {
        return Err(Error::InvalidRate(r));
    }
    if r <= 0.0 {
        return Ok(0.0);
    }
    if r >= top {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if binary_entropy(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if r - binary_entropy(lo) <= binary_entropy(hi) - r { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::CcSolver;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn derived_source_matches_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let ex = BinaryExample::new(rng.random_range(0.01..0.49), rng.random_range(0.01..=0.5)).unwrap();
            let src = ex.source();
            assert!((src.conditional_entropy() - binary_entropy(ex.p)).abs() < 1e-12);
            assert!((src.marginal_x()[0] - ex.px0()).abs() < 1e-12);
            let f = ex.forward();
            for x in 0..2 {
                for y in 0..2 {
                    assert!((src.forward().get(x, y) - f.get(x, y)).abs() < 1e-12);
                }
            }
            assert!((src.backward().get(0, 1) - ex.p).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_on_dense_grid() {
        let top = 2f64.ln();
        let mut last = 0.0;
        for k in 0..=1000 {
            let r = top * k as f64 / 1000.0;
            let q = h_binary_inverse(r).unwrap();
            assert!((binary_entropy(q) - r).abs() < 1e-12, "r {r}");
            assert!(q >= last && q <= 0.5);
            last = q;
        }
        assert_eq!(h_binary_inverse(0.0).unwrap(), 0.0);
        assert_eq!(h_binary_inverse(top).unwrap(), 0.5);
        assert!((h_binary_inverse(binary_entropy(0.05)).unwrap() - 0.05).abs() < 1e-12);
        assert!((binary_entropy(0.05) - 0.198515).abs() < 1e-6);
        assert!(h_binary_inverse(1.0).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let ex = BinaryExample::new(0.05, 0.5).unwrap();
        let v = ex.closed_form(ClosedFormKind::FixedSp, Some(2f64.ln()), None).unwrap();
        assert!((v - 0.830366).abs() < 1e-6);
        let hp = binary_entropy(0.05);
        assert!(ex.closed_form(ClosedFormKind::FixedCorrect, Some(hp), None).unwrap().abs() < 1e-12);
        assert!(ex.closed_form(ClosedFormKind::FixedSp, Some(0.1), None).is_err());
        assert!(ex.closed_form(ClosedFormKind::FixedCorrect, Some(0.5), None).is_err());
        assert!(ex.closed_form(ClosedFormKind::ExZero, None, None).is_err());
        let ez = ex.closed_form(ClosedFormKind::ExZero, None, Some(&Distribution::uniform(2))).unwrap();
        assert!((ez - 0.415183).abs() < 1e-6);
    }

    #[test]
    fn var_sp_at_hpx_matches_numeric_solver() {
        for &(p, tau) in &[(0.05, 0.5), (0.05, 0.12), (0.2, 0.35)] {
            let ex = BinaryExample::new(p, tau).unwrap();
            let src = ex.source();
            let mut cc = CcSolver::new(src.marginal_x(), src.forward()).unwrap();
            let num = cc.sphere_packing(0.0).value.to_f64();
            let cf = ex.closed_form(ClosedFormKind::VarSpAtHPX, None, None).unwrap();
            assert!((num - cf).abs() < 1e-6, "p {p} tau {tau}: {num} vs {cf}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BinaryExample::new(0.5, 0.3).is_err());
        assert!(BinaryExample::new(0.1, 0.0).is_err());
        assert!(BinaryExample::new(0.1, 0.6).is_err());
    }
}
