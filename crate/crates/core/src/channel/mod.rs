//! Constant-composition and general channel exponents, rate thresholds and
//! the degeneracy predicate for the critical rate.

mod dual;
mod expurgated;

use serde::Serialize;

use crate::error::{check_dim, check_rate, Error, Result};
use crate::ext::ExtReal;
use crate::info::{mutual_information_raw, output_marginal, Channel, Distribution};
use crate::optim::{brent_root, simplex_grid, simplex_min, BINARY_GRID, TERNARY_GRID};

pub(crate) use dual::{Tilt, RHO_MAX};
pub(crate) use expurgated::{bhattacharyya_raw, Expurgated};

/// Which exponent program to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ExponentKind {
    SpherePacking,
    RandomCoding,
    Expurgated,
    CorrectDecoding,
}

impl ExponentKind {
    pub const ALL: [ExponentKind; 4] = [
        ExponentKind::SpherePacking,
        ExponentKind::RandomCoding,
        ExponentKind::Expurgated,
        ExponentKind::CorrectDecoding,
    ];

    pub fn is_error_kind(self) -> bool {
        self != ExponentKind::CorrectDecoding
    }
}

/// Rate thresholds of an input distribution on a channel (nats).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateThresholds {
    pub r_sp_inf: f64,
    pub r_ex_inf: f64,
    pub r_cr: f64,
    pub r_star: f64,
    pub capacity_at_q: f64,
}

/// Sphere-packing value together with its optimal multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpSolution {
    pub value: ExtReal,
    /// Minus the slope of the curve at this rate; infinite on the floor.
    pub rho: f64,
}

/// Solver state for one `(q, W)` pair. Reusing it across a rate sweep keeps
/// warm starts and cached thresholds.
#[derive(Debug, Clone)]
pub struct CcSolver {
    tilt: Tilt,
    iw: f64,
    ex: Option<Expurgated>,
    rows: Vec<Vec<f64>>,
    q: Vec<f64>,
    r_sp_inf: Option<f64>,
    rho_one: Option<(f64, f64)>,
    f_minus_one: Option<Option<f64>>,
}

impl CcSolver {
    pub fn new(q: &Distribution, w: &Channel) -> Result<Self> {
        check_dim(w.in_size(), q.len())?;
        Ok(Self::from_raw(q.probs(), w.rows()))
    }

    pub(crate) fn from_raw(q: &[f64], rows: &[Vec<f64>]) -> Self {
        let tilt = Tilt::new(q, rows);
        let iw = tilt.mutual_information();
        Self {
            tilt,
            iw,
            ex: None,
            rows: rows.to_vec(),
            q: q.to_vec(),
            r_sp_inf: None,
            rho_one: None,
            f_minus_one: None,
        }
    }

    /// `I(q, W)`.
    pub fn capacity_at_q(&self) -> f64 {
        self.iw
    }

    /// Smallest rate with a finite sphere-packing exponent.
    pub fn r_sp_inf(&mut self) -> f64 {
        if self.r_sp_inf.is_none() {
            self.r_sp_inf = Some(self.tilt.r_sp_inf().min(self.iw));
        }
        self.r_sp_inf.unwrap()
    }

    fn expurgated(&mut self) -> &Expurgated {
        if self.ex.is_none() {
            self.ex = Some(Expurgated::new(&self.q, &self.rows));
        }
        self.ex.as_ref().unwrap()
    }

    /// Smallest rate with a finite expurgated exponent.
    pub fn r_ex_inf(&mut self) -> f64 {
        self.expurgated().r_inf()
    }

    /// `(I(q, V_1), F(1))` at unit slope.
    fn rho_one(&mut self) -> (f64, f64) {
        if self.rho_one.is_none() {
            let p = self.tilt.solve(1.0);
            self.rho_one = Some((p.info.min(self.iw), p.f));
        }
        self.rho_one.unwrap()
    }

    /// Critical rate: where the sphere-packing curve has slope -1.
    pub fn r_cr(&mut self) -> f64 {
        let rcr = self.rho_one().0;
        rcr.max(self.r_sp_inf())
    }

    /// Sphere-packing exponent at any real rate (negative rates are infeasible).
    pub fn sphere_packing(&mut self, r: f64) -> SpSolution {
        if r < 0.0 {
            return SpSolution { value: ExtReal::Infinite, rho: f64::INFINITY };
        }
        if r >= self.iw {
            return SpSolution { value: ExtReal::ZERO, rho: 0.0 };
        }
        let floor = self.r_sp_inf();
        if r < floor - 1e-10 {
            return SpSolution { value: ExtReal::Infinite, rho: f64::INFINITY };
        }
        if r <= floor + 1e-12 {
            let v = self.tilt.sp_floor_value(floor);
            return SpSolution { value: ExtReal::from(v.max(0.0)), rho: f64::INFINITY };
        }
        let (mut lo, mut f_lo) = (0.0, self.iw - r);
        let mut hi = 1.0;
        let f_hi;
        loop {
            let p = self.tilt.solve(hi);
            if p.info - r <= 0.0 {
                f_hi = p.info - r;
                break;
            }
            if hi >= RHO_MAX {
                return SpSolution { value: ExtReal::from((p.f - hi * r).max(0.0)), rho: hi };
            }
            lo = hi;
            f_lo = p.info - r;
            hi = (hi * 4.0).min(RHO_MAX);
        }
        let tilt = &mut self.tilt;
        let rho = brent_root(|rho| tilt.solve(rho).info - r, lo, hi, f_lo, f_hi, 1e-11 * (1.0 + hi));
        let p = self.tilt.solve(rho);
        SpSolution {
            value: ExtReal::from((p.f - rho * r).max(0.0)),
            rho,
        }
    }

    /// Random-coding exponent; finite at every real rate.
    pub fn random_coding(&mut self, r: f64) -> f64 {
        if r >= self.iw {
            return 0.0;
        }
        let (rcr, f1) = self.rho_one();
        if r >= rcr {
            return self.sphere_packing(r).value.value().expect("finite above the critical rate");
        }
        (f1 - r).max(0.0)
    }

    /// Expurgated program value before clamping at zero; `None` is `+∞`.
    pub fn expurgated_raw(&mut self, r: f64) -> Option<f64> {
        if r < 0.0 {
            return None;
        }
        self.expurgated().value(r)
    }

    /// Correct-decoding exponent; zero exactly when `r <= I(q, W)`.
    pub fn correct_decoding(&mut self, r: f64) -> f64 {
        if r <= self.iw {
            return 0.0;
        }
        let cap = if self.tilt.m <= 2 { 1.0 - 1e-8 } else { 1.0 - 1e-6 };
        let at_cap = self.tilt.solve(-cap);
        let dual = |p: &dual::TiltPoint, lam: f64| lam * r + p.f;
        let primal = |p: &dual::TiltPoint| p.div + (r - p.info).max(0.0);
        if r - at_cap.info > 0.0 {
            let mut best = dual(&at_cap, cap);
            if self.f_minus_one.is_none() {
                self.f_minus_one = Some(self.tilt.f_minus_one());
            }
            if let Some(fm1) = self.f_minus_one.unwrap() {
                best = best.max(r + fm1);
            }
            return if best > 0.0 { best } else { primal(&at_cap) };
        }
        let tilt = &mut self.tilt;
        let lam = brent_root(|lam| r - tilt.solve(-lam).info, 0.0, cap, r - self.iw, r - at_cap.info, 1e-13);
        let p = self.tilt.solve(-lam);
        let v = dual(&p, lam);
        if v > 0.0 {
            v
        } else {
            primal(&p)
        }
    }

    /// Exponent of `kind` at any real rate, with the literal program
    /// semantics at negative rates (sphere packing and expurgated infinite,
    /// random coding `F(1) - r`, correct decoding zero).
    pub fn value_signed(&mut self, kind: ExponentKind, r: f64) -> ExtReal {
        match kind {
            ExponentKind::SpherePacking => self.sphere_packing(r).value,
            ExponentKind::RandomCoding => ExtReal::from(self.random_coding(r)),
            ExponentKind::Expurgated => self.expurgated_raw(r).map_or(ExtReal::Infinite, ExtReal::from),
            ExponentKind::CorrectDecoding => ExtReal::from(self.correct_decoding(r)),
        }
    }

    pub fn exponent(&mut self, kind: ExponentKind, r: f64) -> Result<ExtReal> {
        check_rate(r)?;
        Ok(self.value_signed(kind, r))
    }

    /// Rate where `max{ex, rc}` switches from the expurgated to the random
    /// coding branch, found by bisection on the unclamped difference.
    pub fn r_star(&mut self) -> f64 {
        let iw = self.iw;
        let ex_wins = |s: &mut Self, r: f64| match s.expurgated_raw(r) {
            None => true,
            Some(e) => e >= s.random_coding(r) - 1e-12,
        };
        if ex_wins(self, iw) {
            return iw;
        }
        if !ex_wins(self, 0.0) {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, iw);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if ex_wins(self, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn thresholds(&mut self) -> RateThresholds {
        RateThresholds {
            r_sp_inf: self.r_sp_inf(),
            r_ex_inf: self.r_ex_inf(),
            r_cr: self.r_cr(),
            r_star: self.r_star(),
            capacity_at_q: self.iw,
        }
    }
}

/// `d_W(x, x~) = -ln sum_y sqrt(W(y|x) W(y|x~))`.
pub fn bhattacharyya_distance(w: &Channel, x: usize, x2: usize) -> Result<ExtReal> {
    for &v in &[x, x2] {
        if v >= w.in_size() {
            return Err(Error::DimensionMismatch {
                expected: w.in_size(),
                found: v + 1,
            });
        }
    }
    Ok(ExtReal::from(bhattacharyya_raw(w.row(x), w.row(x2))))
}

/// Constant-composition exponent of `kind` at rate `r >= 0`.
pub fn cc_exponent(kind: ExponentKind, q: &Distribution, w: &Channel, r: f64) -> Result<ExtReal> {
    check_rate(r)?;
    CcSolver::new(q, w)?.exponent(kind, r)
}

pub fn rate_thresholds(q: &Distribution, w: &Channel) -> Result<RateThresholds> {
    Ok(CcSolver::new(q, w)?.thresholds())
}

/// Both readings of the critical-rate degeneracy condition: the log-ratio
/// `ln W(y|x) / sum_x' q(x') W(y|x')` constant in `y` for each `x`
/// separately, and one constant shared by every `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Degeneracy {
    pub per_input: bool,
    pub global: bool,
}

impl Degeneracy {
    /// The predicate used throughout: the per-input reading, which is the
    /// one equivalent to `R_cr = I(q, W)`.
    pub fn holds(self) -> bool {
        self.per_input
    }

    pub fn readings_disagree(self) -> bool {
        self.per_input != self.global
    }
}

pub fn degeneracy(q: &Distribution, w: &Channel) -> Result<Degeneracy> {
    check_dim(w.in_size(), q.len())?;
    let out = output_marginal(q.probs(), w.rows());
    let tol = 1e-9;
    let mut per_input = true;
    let mut global: Option<f64> = None;
    let mut global_ok = true;
    for x in q.support() {
        let mut first: Option<f64> = None;
        for y in 0..w.out_size() {
            let wy = w.get(x, y);
            if wy > 0.0 {
                let v = (wy / out[y]).ln();
                match first {
                    None => first = Some(v),
                    Some(f) if (f - v).abs() > tol => per_input = false,
                    _ => {}
                }
                match global {
                    None => global = Some(v),
                    Some(g) if (g - v).abs() > tol => global_ok = false,
                    _ => {}
                }
            }
        }
    }
    Ok(Degeneracy {
        per_input,
        global: global_ok,
    })
}

pub fn degeneracy_predicate(q: &Distribution, w: &Channel) -> Result<bool> {
    Ok(degeneracy(q, w)?.holds())
}

/// Channel capacity by Blahut-Arimoto, with the capacity-achieving input.
pub fn capacity(w: &Channel) -> (f64, Distribution) {
    let k = w.in_size();
    let mut q = vec![1.0 / k as f64; k];
    let mut lower = 0.0;
    for _ in 0..100_000 {
        let out = output_marginal(&q, w.rows());
        let dx: Vec<f64> = (0..k).map(|x| crate::info::kl_slice(w.row(x), &out)).collect();
        lower = mutual_information_raw(&q, w.rows());
        let upper = dx.iter().fold(0.0f64, |a, &b| a.max(b));
        if upper - lower < 1e-13 {
            break;
        }
        let mut next: Vec<f64> = q.iter().zip(&dx).map(|(a, d)| a * d.exp()).collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        q = next;
    }
    (lower, Distribution::from_raw(q))
}

/// `R∞_sp(W) = -ln min_Q max_y sum_{x: W(y|x) > 0} Q(x)`, solved as a small LP.
pub fn r_sp_inf_channel(w: &Channel) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, 1.0));
    let qs: Vec<_> = (0..w.in_size()).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    lp.add_constraint(qs.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>().as_slice(), ComparisonOp::Eq, 1.0);
    for y in 0..w.out_size() {
        let mut terms: Vec<_> = (0..w.in_size()).filter(|&x| w.get(x, y) > 0.0).map(|x| (qs[x], 1.0)).collect();
        terms.push((t, -1.0));
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, 0.0);
    }
    let sol = lp.solve().expect("bounded feasible LP");
    (-sol.objective().min(1.0).ln()).max(0.0)
}

fn input_dim_guard(k: usize) -> Result<()> {
    if k > 3 {
        Err(Error::Unsupported(format!("optimization over inputs supports at most 3 letters, got {k}")))
    } else {
        Ok(())
    }
}

/// Optimum of `cc_exponent` over input distributions: maximum for the error
/// kinds, minimum for correct decoding. Returns the value and an optimizer.
pub fn general_exponent_with_input(kind: ExponentKind, w: &Channel, r: f64) -> Result<(ExtReal, Distribution)> {
    check_rate(r)?;
    let k = w.in_size();
    input_dim_guard(k)?;
    if kind == ExponentKind::SpherePacking && r < r_sp_inf_channel(w) - 1e-10 {
        let (_, q) = capacity(w);
        return Ok((ExtReal::Infinite, q));
    }
    let sign = if kind.is_error_kind() { -1.0 } else { 1.0 };
    let obj = |q: &[f64]| -> f64 {
        let v = CcSolver::from_raw(q, w.rows()).value_signed(kind, r);
        match v {
            ExtReal::Infinite => {
                if sign < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }
            ExtReal::Finite(x) => sign * x,
        }
    };
    let (q, v) = simplex_min(k, obj, &[]).expect("guarded dimension");
    let value = if v.is_infinite() { ExtReal::Infinite } else { ExtReal::from(sign * v) };
    Ok((value, Distribution::from_raw(q)))
}

pub fn general_exponent(kind: ExponentKind, w: &Channel, r: f64) -> Result<ExtReal> {
    Ok(general_exponent_with_input(kind, w, r)?.0)
}

/// Line through `(0, E_ex(W, 0))` tangent to the sphere-packing curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StraightLine {
    pub intercept: f64,
    pub slope: f64,
    pub r_sl: f64,
}

impl StraightLine {
    pub fn at(&self, r: f64) -> f64 {
        self.intercept + self.slope * r
    }
}

fn general_sp_with_rho(w: &Channel, r: f64) -> Result<(f64, f64)> {
    let (v, q) = general_exponent_with_input(ExponentKind::SpherePacking, w, r)?;
    let sol = CcSolver::new(&q, w)?.sphere_packing(r);
    Ok((v.value().unwrap_or(f64::INFINITY), sol.rho))
}

pub fn straight_line_exponent(w: &Channel) -> Result<StraightLine> {
    input_dim_guard(w.in_size())?;
    let e0 = match general_exponent(ExponentKind::Expurgated, w, 0.0)? {
        ExtReal::Finite(v) => v,
        ExtReal::Infinite => return Err(Error::Precondition("zero-rate expurgated exponent is infinite".into())),
    };
    let (cap, _) = capacity(w);
    let floor = r_sp_inf_channel(w);
    // Tangent intercept E(R) + R rho(R) decreases in R; match it to e0.
    let intercept_gap = |r: f64| -> Result<f64> {
        let (e, rho) = general_sp_with_rho(w, r)?;
        Ok(e + r * rho - e0)
    };
    let mut lo = floor + 1e-9;
    let hi = cap;
    if intercept_gap(lo)? <= 0.0 {
        lo = floor;
        let (e, _) = general_sp_with_rho(w, lo)?;
        let slope = if lo > 0.0 { (e - e0) / lo } else { 0.0 };
        return Ok(StraightLine { intercept: e0, slope, r_sl: lo });
    }
    let mut a = lo;
    let mut b = hi;
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if intercept_gap(mid)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-11 {
            break;
        }
    }
    let r_sl = 0.5 * (a + b);
    let (e, _) = general_sp_with_rho(w, r_sl)?;
    Ok(StraightLine {
        intercept: e0,
        slope: (e - e0) / r_sl,
        r_sl,
    })
}

/// Concave upper envelope of `Q -> E_ex(Q, W, 0)` evaluated at `q`, built
/// from lattice points (step `1/200` for two letters, `1/60` for three) and
/// `q` itself by a linear program over convex combinations.
pub fn ex_zero_rate_envelope(w: &Channel, q: &Distribution) -> Result<ExtReal> {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    check_dim(w.in_size(), q.len())?;
    let k = w.in_size();
    input_dim_guard(k)?;
    let f = |p: &[f64]| Expurgated::new(p, w.rows()).zero_rate_product();
    let Some(fq) = f(q.probs()) else {
        return Ok(ExtReal::Infinite);
    };
    let den = if k == 2 { BINARY_GRID } else { TERNARY_GRID };
    let inside = |p: &[f64]| p.iter().zip(q.probs()).all(|(&a, &b)| b > 0.0 || a == 0.0);
    let mut pts: Vec<(Vec<f64>, f64)> = vec![(q.probs().to_vec(), fq)];
    for p in simplex_grid(k, den) {
        if inside(&p) {
            if let Some(v) = f(&p) {
                pts.push((p, v));
            }
        }
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = pts.iter().map(|(_, v)| lp.add_var(*v, (0.0, f64::INFINITY))).collect();
    for x in 0..k {
        let terms: Vec<_> = pts.iter().zip(&vars).filter(|((p, _), _)| p[x] > 0.0).map(|((p, _), &v)| (v, p[x])).collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Eq, q[x]);
    }
    let sol = lp.solve().map_err(|e| Error::Precondition(format!("envelope LP failed: {e}")))?;
    Ok(ExtReal::from(sol.objective().max(fq)))
}
