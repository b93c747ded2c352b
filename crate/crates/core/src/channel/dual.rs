//! Tilted dual of the test-channel programs.
//!
//! For `s = 1/(1+rho)` define
//! `Phi(rho, Q) = -(1+rho) sum_x q(x) ln sum_y W(y|x)^s Q(y)^(1-s)`.
//! `F(rho)` is the minimum of `Phi` over output distributions `Q` when
//! `rho >= 0` and the maximum when `-1 < rho < 0`. The optimal tilted channel
//! `V(y|x) ∝ W^s Q^(1-s)` has `Q` as its output marginal and `F'(rho) = I(q, V)`.

use nalgebra::{DMatrix, DVector};

use crate::info::kl_slice;
use crate::optim::golden_min;

/// Largest multiplier tried before a rate is treated as sitting on the
/// sphere-packing floor.
pub(crate) const RHO_MAX: f64 = 1e7;

/// A solved tilt: `F(rho)`, the optimal output law and the induced channel.
#[derive(Debug, Clone)]
pub(crate) struct TiltPoint {
    pub f: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub q_out: Vec<f64>,
    /// Row-major `nx × m` tilted channel over relevant outputs.
    #[cfg_attr(not(test), allow(dead_code))]
    pub v: Vec<f64>,
    /// `I(q, V)`.
    pub info: f64,
    /// `D(V || W | q)`.
    pub div: f64,
}

/// `(q, W)` restricted to the support of `q` and to outputs reachable from it.
#[derive(Debug, Clone)]
pub(crate) struct Tilt {
    pub nx: usize,
    pub m: usize,
    pub qx: Vec<f64>,
    pub w: Vec<f64>,
    logw: Vec<f64>,
    /// Output law under `W`; the tilt at `rho = 0`.
    pub pw: Vec<f64>,
    warm_pos: Vec<f64>,
    warm_neg: Vec<f64>,
    scratch_v: Vec<f64>,
    scratch_m: Vec<f64>,
}

impl Tilt {
    pub fn new(q: &[f64], rows: &[Vec<f64>]) -> Self {
        let xs: Vec<usize> = (0..q.len()).filter(|&x| q[x] > 0.0).collect();
        let total: f64 = xs.iter().map(|&x| q[x]).sum();
        let qx: Vec<f64> = xs.iter().map(|&x| q[x] / total).collect();
        let ys: Vec<usize> = (0..rows[0].len()).filter(|&y| xs.iter().any(|&x| rows[x][y] > 0.0)).collect();
        let m = ys.len();
        let mut w = Vec::with_capacity(xs.len() * m);
        for &x in &xs {
            for &y in &ys {
                w.push(rows[x][y]);
            }
        }
        let logw = w.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
        let mut pw = vec![0.0; m];
        for (i, &qi) in qx.iter().enumerate() {
            for y in 0..m {
                pw[y] += qi * w[i * m + y];
            }
        }
        Self {
            nx: xs.len(),
            m,
            qx,
            w,
            logw,
            warm_pos: pw.clone(),
            warm_neg: pw.clone(),
            pw,
            scratch_v: vec![0.0; xs.len() * m],
            scratch_m: vec![0.0; m],
        }
    }

    pub fn w_row(&self, i: usize) -> &[f64] {
        &self.w[i * self.m..(i + 1) * self.m]
    }

    /// Support indicator of row `i`.
    pub fn supports(&self, i: usize, y: usize) -> bool {
        self.w[i * self.m + y] > 0.0
    }

    pub fn mutual_information(&self) -> f64 {
        (0..self.nx).map(|i| self.qx[i] * kl_slice(self.w_row(i), &self.pw)).sum()
    }

    /// `f(Q) = sum_x q ln Z_x`; fills `scratch_v` with the tilted rows and
    /// `scratch_m` with their `q`-mixture.
    fn eval(&mut self, s: f64, lq: &[f64]) -> f64 {
        let m = self.m;
        let mut f = 0.0;
        self.scratch_m.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.nx {
            let row = &self.logw[i * m..(i + 1) * m];
            let out = &mut self.scratch_v[i * m..(i + 1) * m];
            let mut mx = f64::NEG_INFINITY;
            for y in 0..m {
                let t = if row[y] == f64::NEG_INFINITY { f64::NEG_INFINITY } else { s * row[y] + (1.0 - s) * lq[y] };
                out[y] = t;
                mx = mx.max(t);
            }
            let mut z = 0.0;
            for t in out.iter_mut() {
                *t = (*t - mx).exp();
                z += *t;
            }
            for t in out.iter_mut() {
                *t /= z;
            }
            let qi = self.qx[i];
            for y in 0..m {
                self.scratch_m[y] += qi * out[y];
            }
            f += qi * (mx + z.ln());
        }
        f
    }

    /// Solves the inner program at `rho`, warm-started from the last solve
    /// on the same side of zero.
    pub fn solve(&mut self, rho: f64) -> TiltPoint {
        assert!(rho > -1.0, "rho must exceed -1");
        if rho == 0.0 || self.m == 1 {
            let q_out = if self.m == 1 { vec![1.0] } else { self.pw.clone() };
            return self.finish(rho, 1.0, q_out);
        }
        let s = 1.0 / (1.0 + rho);
        let start = if rho > 0.0 { self.warm_pos.clone() } else { self.warm_neg.clone() };
        let q_out = if self.m == 2 { self.newton_1d(s, rho, start) } else { self.newton_nd(s, rho, start) };
        if rho > 0.0 {
            self.warm_pos.clone_from(&q_out);
        } else {
            self.warm_neg.clone_from(&q_out);
        }
        self.finish(rho, s, q_out)
    }

    fn finish(&mut self, rho: f64, s: f64, q_out: Vec<f64>) -> TiltPoint {
        let lq: Vec<f64> = q_out.iter().map(|v| v.ln()).collect();
        let f = if s == 1.0 { 0.0 } else { self.eval(s, &lq) };
        let v = if s == 1.0 { self.w.clone() } else { self.scratch_v.clone() };
        let m = self.m;
        let mut mix = vec![0.0; m];
        for i in 0..self.nx {
            for y in 0..m {
                mix[y] += self.qx[i] * v[i * m + y];
            }
        }
        let mut info = 0.0;
        let mut div = 0.0;
        for i in 0..self.nx {
            let row = &v[i * m..(i + 1) * m];
            info += self.qx[i] * kl_slice(row, &mix);
            div += self.qx[i] * kl_slice(row, self.w_row(i));
        }
        TiltPoint {
            f: -(1.0 + rho) * f,
            q_out,
            v,
            info,
            div,
        }
    }

    /// Sign so that `kappa * f` is convex in `Q`.
    fn kappa(rho: f64) -> f64 {
        if rho > 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Derivative of `kappa * f` along `e_0 - e_1` and its second derivative.
    fn deriv_1d(&mut self, s: f64, q0: f64, kappa: f64) -> (f64, f64, f64) {
        let q = [q0, 1.0 - q0];
        let lq = [q[0].ln(), q[1].ln()];
        let f = self.eval(s, &lq);
        let a = 1.0 - s;
        let mm = [self.scratch_m[0], self.scratch_m[1]];
        let g = a * (mm[0] / q[0] - mm[1] / q[1]);
        // Hessian along (1, -1): a^2 [M0/q0^2 + M1/q1^2 - sum_x q (V0/q0 - V1/q1)^2] - a (M0/q0^2 + M1/q1^2).
        let mut cov = 0.0;
        for i in 0..self.nx {
            let t = self.scratch_v[2 * i] / q[0] - self.scratch_v[2 * i + 1] / q[1];
            cov += self.qx[i] * t * t;
        }
        let diag = mm[0] / (q[0] * q[0]) + mm[1] / (q[1] * q[1]);
        let h = a * a * (diag - cov) - a * diag;
        (kappa * f, kappa * g, kappa * h)
    }

    /// Safeguarded Newton on the monotone derivative over `Q(0) ∈ (0, 1)`.
    /// The derivative is unbounded with opposite signs at the two ends, so
    /// the optimum is interior and `[lo, hi]` always brackets it.
    fn newton_1d(&mut self, s: f64, rho: f64, start: Vec<f64>) -> Vec<f64> {
        let kappa = Self::kappa(rho);
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut x = start[0].clamp(1e-300, 1.0 - 1e-16);
        for _ in 0..400 {
            let (_, g, h) = self.deriv_1d(s, x, kappa);
            if g == 0.0 || !g.is_finite() {
                break;
            }
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - g / h;
            let next = if h > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            let step = (next - x).abs();
            x = next;
            if step <= 1e-15 * x.min(1.0 - x) || hi - lo <= 1e-15 * x.min(1.0 - x) {
                break;
            }
        }
        self.eval(s, &[x.ln(), (1.0 - x).ln()]);
        vec![x, 1.0 - x]
    }

    /// Damped Newton on the simplex (tangent-space parametrization).
    fn newton_nd(&mut self, s: f64, rho: f64, start: Vec<f64>) -> Vec<f64> {
        let kappa = Self::kappa(rho);
        let m = self.m;
        let a = 1.0 - s;
        let mut q = start;
        let mut lq: Vec<f64> = q.iter().map(|v| v.ln()).collect();
        let mut fval = kappa * self.eval(s, &lq);
        for _ in 0..300 {
            let mm = self.scratch_m.clone();
            let g: Vec<f64> = (0..m).map(|y| kappa * a * mm[y] / q[y]).collect();
            let mut h = DMatrix::<f64>::zeros(m, m);
            for y in 0..m {
                for z in 0..m {
                    let mut cov = 0.0;
                    for i in 0..self.nx {
                        cov += self.qx[i] * self.scratch_v[i * m + y] * self.scratch_v[i * m + z];
                    }
                    let d = if y == z { mm[y] } else { 0.0 };
                    let mut v = a * a * (d - cov) / (q[y] * q[z]);
                    if y == z {
                        v -= a * mm[y] / (q[y] * q[y]);
                    }
                    h[(y, z)] = kappa * v;
                }
            }
            let k = m - 1;
            let l = m - 1;
            let gr = DVector::from_fn(k, |i, _| g[i] - g[l]);
            let hr = DMatrix::from_fn(k, k, |i, j| h[(i, j)] - h[(i, l)] - h[(l, j)] + h[(l, l)]);
            let z = match hr.clone().cholesky() {
                Some(ch) => ch.solve(&(-&gr)),
                None => {
                    // Fall back to a scaled gradient step if curvature is lost to round-off.
                    let scale = hr.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
                    -&gr / scale
                }
            };
            let mut d = vec![0.0; m];
            for i in 0..k {
                d[i] = z[i];
                d[l] -= z[i];
            }
            let dec = -gr.dot(&z);
            if !(dec > 1e-24) {
                break;
            }
            let mut tmax = f64::INFINITY;
            for y in 0..m {
                if d[y] < 0.0 {
                    tmax = tmax.min(-q[y] / d[y]);
                }
            }
            let mut t = 1.0f64.min(0.95 * tmax);
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = q.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let tl: Vec<f64> = trial.iter().map(|v| v.ln()).collect();
                let ft = kappa * self.eval(s, &tl);
                if ft <= fval - 0.25 * t * dec || (dec < 1e-14 && ft <= fval + 1e-15 * fval.abs()) {
                    q = trial;
                    lq = tl;
                    fval = ft;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
            if dec < 1e-22 {
                break;
            }
        }
        // Leave scratch buffers consistent with the returned point.
        self.eval(s, &lq);
        let total: f64 = q.iter().sum();
        q.iter().map(|v| v / total).collect()
    }

    /// `F(-1) = -min_Q sum_x q max_{y in supp W_x} ln(W(y|x)/Q(y))`, the
    /// limit of the correct-decoding dual. Exact for up to three outputs.
    pub fn f_minus_one(&self) -> Option<f64> {
        let obj = |q: &[f64]| -> f64 {
            let mut acc = 0.0;
            for i in 0..self.nx {
                let mut best = f64::NEG_INFINITY;
                for y in 0..self.m {
                    if self.supports(i, y) {
                        best = best.max(self.logw[i * self.m + y] - q[y].ln());
                    }
                }
                acc += self.qx[i] * best;
            }
            acc
        };
        let v = match self.m {
            1 => obj(&[1.0]),
            2 => golden_min(|a| obj(&[a, 1.0 - a]), 0.0, 1.0, 1e-13).1,
            3 => {
                golden_min(
                    |a| golden_min(|b| obj(&[a, (1.0 - a) * b, (1.0 - a) * (1.0 - b)]), 0.0, 1.0, 1e-12).1,
                    0.0,
                    1.0,
                    1e-12,
                )
                .1
            }
            _ => return None,
        };
        Some(-v)
    }

    /// `min_Q -sum_x q ln Q(S_x)` with `S_x` the support of row `x`: the
    /// smallest mutual information among channels supported inside `W`.
    pub fn r_sp_inf(&self) -> f64 {
        let obj = |q: &[f64]| -> f64 {
            let mut acc = 0.0;
            for i in 0..self.nx {
                let mass: f64 = (0..self.m).filter(|&y| self.supports(i, y)).map(|y| q[y]).sum();
                if mass <= 0.0 {
                    return f64::INFINITY;
                }
                acc -= self.qx[i] * mass.min(1.0).ln();
            }
            acc
        };
        if (0..self.m).any(|y| (0..self.nx).all(|i| self.supports(i, y))) {
            return 0.0;
        }
        let v = match self.m {
            1 => 0.0,
            2 => golden_min(|a| obj(&[a, 1.0 - a]), 0.0, 1.0, 1e-14).1,
            3 => {
                golden_min(
                    |a| golden_min(|b| obj(&[a, (1.0 - a) * b, (1.0 - a) * (1.0 - b)]), 0.0, 1.0, 1e-13).1,
                    0.0,
                    1.0,
                    1e-13,
                )
                .1
            }
            _ => {
                // Multiplicative (EM) updates for a log-optimal mixture; monotone.
                let mut q = vec![1.0 / self.m as f64; self.m];
                for _ in 0..200_000 {
                    let mut next = vec![0.0; self.m];
                    for i in 0..self.nx {
                        let mass: f64 = (0..self.m).filter(|&y| self.supports(i, y)).map(|y| q[y]).sum();
                        for y in 0..self.m {
                            if self.supports(i, y) {
                                next[y] += self.qx[i] * q[y] / mass;
                            }
                        }
                    }
                    let change = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    q = next;
                    if change < 1e-15 {
                        break;
                    }
                }
                obj(&q)
            }
        };
        v.max(0.0)
    }

    /// Mutual information of the limiting tilt `rho -> infinity` is the
    /// floor above; this evaluates the sphere-packing value there by
    /// Richardson extrapolation of `F(rho) - rho R` in `s = 1/(1+rho)`.
    pub fn sp_floor_value(&mut self, r: f64) -> f64 {
        let g = |t: &mut Self, s: f64| {
            let rho = 1.0 / s - 1.0;
            let p = t.solve(rho);
            p.f - rho * r
        };
        let s0 = 4e-5;
        let g1 = g(self, s0);
        let g2 = g(self, s0 / 2.0);
        let g3 = g(self, s0 / 4.0);
        let r1 = 2.0 * g2 - g1;
        let r2 = 2.0 * g3 - g2;
        (4.0 * r2 - r1) / 3.0
    }
}
