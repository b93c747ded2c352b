//! Fixed-rate and variable-rate Slepian-Wolf exponents.
//!
//! A source `P_XY` is treated as the input distribution `P_X` driving the
//! channel `P_{Y|X}`; a fixed-rate exponent at rate `R` is the minimum over
//! `Q_X` of `D(Q_X || P_X)` plus the matching channel exponent at the inner
//! rate `H(Q_X) - R`.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{
    degeneracy_predicate, ex_zero_rate_envelope, straight_line_exponent, CcSolver, ExponentKind, StraightLine,
};
use crate::error::{check_rate, Error, Result};
use crate::ext::ExtReal;
use crate::info::{entropy_slice, kl_slice, Channel, Distribution, JointSource};
use crate::optim::{concave_max_halfline, golden_min, simplex_min};

const RHO_CAP: f64 = 1e7;

fn unsupported(k: usize) -> Error {
    Error::Unsupported(format!("minimization over Q_X supports at most 3 source letters, got {k}"))
}

fn to_min_objective(v: ExtReal) -> f64 {
    v.value().unwrap_or(f64::INFINITY)
}

/// Type-form fixed-rate exponent of `kind` and the minimizing `Q_X`.
pub fn fixed_exponent_with_input(kind: ExponentKind, src: &JointSource, r: f64) -> Result<(ExtReal, Distribution)> {
    check_rate(r)?;
    let rows = src.forward().rows();
    let px = src.marginal_x().probs();
    let obj = |q: &[f64]| -> f64 {
        let d = kl_slice(q, px);
        let inner = entropy_slice(q) - r;
        d + to_min_objective(CcSolver::from_raw(q, rows).value_signed(kind, inner))
    };
    let (q, v) = simplex_min(src.nx(), obj, &[px.to_vec()]).ok_or_else(|| unsupported(src.nx()))?;
    let value = if v.is_finite() { ExtReal::from(v) } else { ExtReal::Infinite };
    Ok((value, Distribution::from_raw(q)))
}

/// Type-form fixed-rate exponent of `kind` at rate `r`.
pub fn fixed_exponent(kind: ExponentKind, src: &JointSource, r: f64) -> Result<ExtReal> {
    Ok(fixed_exponent_with_input(kind, src, r)?.0)
}

/// `E_s(rho) = ln sum_y [sum_x P_XY(x,y)^{1/(1+rho)}]^{1+rho}`.
pub fn gallager_source_function(src: &JointSource, rho: f64) -> f64 {
    let s = 1.0 / (1.0 + rho);
    let mut terms = Vec::with_capacity(src.ny());
    for y in 0..src.ny() {
        let logs: Vec<f64> = (0..src.nx()).filter(|&x| src.get(x, y) > 0.0).map(|x| s * src.get(x, y).ln()).collect();
        if logs.is_empty() {
            continue;
        }
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let a = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        terms.push((1.0 + rho) * a);
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Gallager-form fixed-rate exponent: `sup_{rho >= 0}` for sphere packing,
/// `max_{0 <= rho <= 1}` for random coding, of `rho R - E_s(rho)`.
pub fn fixed_gallager(kind: ExponentKind, src: &JointSource, r: f64) -> Result<ExtReal> {
    check_rate(r)?;
    let g = |rho: f64| rho * r - gallager_source_function(src, rho);
    match kind {
        ExponentKind::RandomCoding => {
            let (_, v) = golden_min(|rho| -g(rho), 0.0, 1.0, 1e-12);
            Ok(ExtReal::from(-v))
        }
        ExponentKind::SpherePacking => {
            if r > r_f_sp_inf(src) + 1e-12 {
                return Ok(ExtReal::Infinite);
            }
            let (_, v) = concave_max_halfline(g, RHO_CAP, 1e-12);
            Ok(ExtReal::from(v))
        }
        other => Err(Error::Unsupported(format!("no Gallager form for {other:?}"))),
    }
}

/// `max_y ln |{x : P_{X|Y}(x|y) > 0}|`.
pub fn r_f_sp_inf(src: &JointSource) -> f64 {
    (0..src.ny())
        .map(|y| (0..src.nx()).filter(|&x| src.get(x, y) > 0.0).count())
        .max()
        .map_or(0.0, |c| (c as f64).ln())
}

/// A point of the tilted family `P_{X^(rho) Y^(rho)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedPair {
    pub rho: f64,
    pub y_marginal: Distribution,
    /// Rows indexed by `y`, distributions over `x`.
    pub x_given_y: Channel,
    /// `H(X^(rho) | Y^(rho))`.
    pub rate: f64,
    /// `D(P_{X^(rho) Y^(rho)} || P_XY)`.
    pub exponent: f64,
}

impl TiltedPair {
    pub fn joint(&self, x: usize, y: usize) -> f64 {
        self.y_marginal[y] * self.x_given_y.get(y, x)
    }
}

pub fn tilted_family(src: &JointSource, rho: f64) -> Result<TiltedPair> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::Precondition(format!("rho must be finite and nonnegative, got {rho}")));
    }
    let s = 1.0 / (1.0 + rho);
    let back = src.backward();
    let py = src.marginal_y();
    let mut cond = Vec::with_capacity(src.ny());
    let mut weight = Vec::with_capacity(src.ny());
    for y in 0..src.ny() {
        let powed: Vec<f64> = back.row(y).iter().map(|&p| if p > 0.0 { p.powf(s) } else { 0.0 }).collect();
        let a: f64 = powed.iter().sum();
        weight.push(py[y].ln() + (1.0 + rho) * a.ln());
        cond.push(powed.iter().map(|p| p / a).collect::<Vec<f64>>());
    }
    let m = weight.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut ym: Vec<f64> = weight.iter().map(|w| (w - m).exp()).collect();
    let z: f64 = ym.iter().sum();
    ym.iter_mut().for_each(|v| *v /= z);
    let rate: f64 = ym.iter().zip(&cond).map(|(p, row)| p * entropy_slice(row)).sum();
    let mut exponent = 0.0;
    for y in 0..src.ny() {
        for x in 0..src.nx() {
            let t = ym[y] * cond[y][x];
            if t > 0.0 {
                exponent += t * (t / src.get(x, y)).ln();
            }
        }
    }
    Ok(TiltedPair {
        rho,
        y_marginal: Distribution::from_raw(ym),
        x_given_y: Channel::from_raw(cond),
        rate,
        exponent: exponent.max(0.0),
    })
}

/// `R_f,cr`: the tilted conditional entropy at `rho = 1`.
pub fn r_f_cr(src: &JointSource) -> f64 {
    tilted_family(src, 1.0).expect("rho = 1 is valid").rate
}

/// Bounds on the variable-rate exponent at one rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariableBounds {
    pub lower: ExtReal,
    pub upper_sp: ExtReal,
    /// Straight-line bound, present only on its rate window.
    pub upper_sl: Option<ExtReal>,
    /// Zero-rate envelope bound, present for rates below `H(P_X)`.
    pub upper_env: Option<ExtReal>,
    /// Present where the lower and upper bounds provably coincide.
    pub exact: Option<ExtReal>,
    /// Inner rate `H(P_X) - R` equals the sphere-packing floor, where the
    /// upper bound is not claimed.
    pub sp_exception: bool,
}

/// Reusable state for variable-rate bounds of one source.
#[derive(Debug, Clone)]
pub struct VariableEngine {
    cc: CcSolver,
    h_px: f64,
    h_cond: f64,
    r_cr: f64,
    r_sp_inf: f64,
    line: Option<StraightLine>,
    envelope: Option<ExtReal>,
}

impl VariableEngine {
    pub fn new(src: &JointSource) -> Result<Self> {
        let mut cc = CcSolver::new(src.marginal_x(), src.forward())?;
        let r_cr = cc.r_cr();
        let r_sp_inf = cc.r_sp_inf();
        let line = straight_line_exponent(src.forward()).ok();
        let envelope = ex_zero_rate_envelope(src.forward(), src.marginal_x()).ok();
        Ok(Self {
            cc,
            h_px: src.entropy_x(),
            h_cond: src.conditional_entropy(),
            r_cr,
            r_sp_inf,
            line,
            envelope,
        })
    }

    pub fn straight_line(&self) -> Option<StraightLine> {
        self.line
    }

    pub fn bounds(&mut self, r: f64) -> Result<VariableBounds> {
        check_rate(r)?;
        let inner = self.h_px - r;
        let ex = self.cc.value_signed(ExponentKind::Expurgated, inner);
        let rc = self.cc.value_signed(ExponentKind::RandomCoding, inner);
        let lower = ex.max(rc);
        let upper_sp = self.cc.value_signed(ExponentKind::SpherePacking, inner);
        let upper_sl = self.line.and_then(|l| {
            (inner > 0.0 && inner <= l.r_sl).then(|| ExtReal::from(l.at(inner)))
        });
        let upper_env = self.envelope.filter(|_| inner > 0.0);
        let exact = (r >= self.h_cond - 1e-12 && r <= self.h_px - self.r_cr - 1e-6).then_some(upper_sp);
        Ok(VariableBounds {
            lower,
            upper_sp,
            upper_sl,
            upper_env,
            exact,
            sp_exception: (inner - self.r_sp_inf).abs() <= 1e-10,
        })
    }
}

pub fn variable_exponent_bounds(src: &JointSource, r: f64) -> Result<VariableBounds> {
    VariableEngine::new(src)?.bounds(r)
}

/// Limit of `E_v(H(X|Y) + r) / r^2` as `r -> 0`, infinite when the
/// information density is constant given `x`.
pub fn second_order_coefficient(src: &JointSource) -> Result<ExtReal> {
    if degeneracy_predicate(src.marginal_x(), src.forward())? {
        return Ok(ExtReal::Infinite);
    }
    let py = src.marginal_y();
    let w = src.forward();
    let px = src.marginal_x();
    let mut second = 0.0;
    let mut cond_sq = 0.0;
    for x in 0..src.nx() {
        let mut mean = 0.0;
        for y in 0..src.ny() {
            let p = w.get(x, y);
            if p > 0.0 {
                let tau = py[y].ln() - p.ln();
                second += src.get(x, y) * tau * tau;
                mean += p * tau;
            }
        }
        cond_sq += px[x] * mean * mean;
    }
    let var = second - cond_sq;
    if var <= 0.0 {
        return Ok(ExtReal::Infinite);
    }
    Ok(ExtReal::from(0.5 / var))
}

/// Largest achievable correct-decoding probability of variable-rate codes.
pub fn p_c_max(src: &JointSource, r: f64) -> Result<f64> {
    check_rate(r)?;
    Ok((r / src.conditional_entropy()).min(1.0))
}

/// `(H(P_X) - R_ex_inf, H(P_X) - R_sp_inf)` for `(P_X, P_{Y|X})`: above the
/// first rate the variable-rate exponent is infinite, below the second it
/// is finite.
pub fn zero_error_rate_window(src: &JointSource) -> Result<(f64, f64)> {
    let mut cc = CcSolver::new(src.marginal_x(), src.forward())?;
    let h = src.entropy_x();
    Ok(((h - cc.r_ex_inf()).max(0.0), (h - cc.r_sp_inf()).max(0.0)))
}

/// One row of a rate sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwCurvePoint {
    pub rate: f64,
    pub fixed_sp: ExtReal,
    pub fixed_rc: ExtReal,
    pub fixed_ex: ExtReal,
    pub fixed_correct: ExtReal,
    pub var_lower: ExtReal,
    pub var_upper_sp: ExtReal,
    pub var_upper_sl: Option<ExtReal>,
    pub var_upper_env: Option<ExtReal>,
    pub var_exact: Option<ExtReal>,
    /// Rate equals the fixed-rate sphere-packing floor.
    pub fixed_sp_exception: bool,
    pub var_sp_exception: bool,
}

/// Evaluates every curve column at each rate, in parallel.
pub fn sw_curve(src: &JointSource, rates: &[f64]) -> Result<Vec<SwCurvePoint>> {
    if src.nx() > 3 {
        return Err(unsupported(src.nx()));
    }
    for &r in rates {
        check_rate(r)?;
    }
    let engine = VariableEngine::new(src)?;
    let floor = r_f_sp_inf(src);
    let point = |r: f64| -> Result<SwCurvePoint> {
        let mut eng = engine.clone();
        let vb = eng.bounds(r)?;
        Ok(SwCurvePoint {
            rate: r,
            fixed_sp: fixed_exponent(ExponentKind::SpherePacking, src, r)?,
            fixed_rc: fixed_exponent(ExponentKind::RandomCoding, src, r)?,
            fixed_ex: fixed_exponent(ExponentKind::Expurgated, src, r)?,
            fixed_correct: fixed_exponent(ExponentKind::CorrectDecoding, src, r)?,
            var_lower: vb.lower,
            var_upper_sp: vb.upper_sp,
            var_upper_sl: vb.upper_sl,
            var_upper_env: vb.upper_env,
            var_exact: vb.exact,
            fixed_sp_exception: (r - floor).abs() <= 1e-10,
            var_sp_exception: vb.sp_exception,
        })
    };
    crate::parallel::install(|| rates.par_iter().map(|&r| point(r)).collect::<Result<Vec<_>>>())?
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::binary_entropy;

    fn example(p: f64, tau: f64) -> JointSource {
        JointSource::new(vec![vec![tau * (1.0 - p), (1.0 - tau) * p], vec![tau * p, (1.0 - tau) * (1.0 - p)]])
            .unwrap()
    }

    fn d_b(a: f64, b: f64) -> f64 {
        kl_slice(&[a, 1.0 - a], &[b, 1.0 - b])
    }

    #[test]
    fn fixed_sp_example() {
        let src = example(0.05, 0.5);
        let r = binary_entropy(0.3);
        let v = fixed_exponent(ExponentKind::SpherePacking, &src, r).unwrap().to_f64();
        assert!((v - d_b(0.3, 0.05)).abs() < 1e-7, "{v}");
        let g = fixed_gallager(ExponentKind::SpherePacking, &src, r).unwrap().to_f64();
        assert!((g - d_b(0.3, 0.05)).abs() < 1e-7, "{g}");
    }

    #[test]
    fn correct_decoding_vanishes_at_conditional_entropy() {
        let src = example(0.05, 0.12);
        let h = src.conditional_entropy();
        assert_eq!(fixed_exponent(ExponentKind::CorrectDecoding, &src, h).unwrap(), ExtReal::ZERO);
        assert!(fixed_exponent(ExponentKind::CorrectDecoding, &src, 0.9 * h).unwrap().to_f64() > 0.0);
    }

    #[test]
    fn gallager_zero_at_slepian_wolf_limit() {
        let src = example(0.1, 0.3);
        let h = src.conditional_entropy();
        for kind in [ExponentKind::SpherePacking, ExponentKind::RandomCoding] {
            assert!(fixed_gallager(kind, &src, h).unwrap().to_f64() < 1e-12);
        }
    }

    #[test]
    fn random_coding_affine_above_critical_rate() {
        let src = example(0.05, 0.35);
        let r = r_f_cr(&src) + 0.05;
        let want = r - gallager_source_function(&src, 1.0);
        let got = fixed_gallager(ExponentKind::RandomCoding, &src, r).unwrap().to_f64();
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn floor_counts_supports() {
        assert!((r_f_sp_inf(&example(0.05, 0.5)) - 2f64.ln()).abs() < 1e-15);
        let src = JointSource::new(vec![vec![0.2, 0.1], vec![0.2, 0.0], vec![0.3, 0.2]]).unwrap();
        assert!((r_f_sp_inf(&src) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn tilted_family_endpoints_and_curve() {
        let src = example(0.05, 0.12);
        let t0 = tilted_family(&src, 0.0).unwrap();
        assert!((t0.rate - src.conditional_entropy()).abs() < 1e-12);
        assert!(t0.exponent < 1e-14);
        for y in 0..2 {
            assert!((t0.y_marginal[y] - src.marginal_y()[y]).abs() < 1e-12);
        }
        let mut last = t0.rate;
        for k in 1..=20 {
            let rho = k as f64 * 0.05;
            let t = tilted_family(&src, rho).unwrap();
            assert!(t.rate >= last - 1e-12);
            last = t.rate;
            let g = fixed_gallager(ExponentKind::SpherePacking, &src, t.rate).unwrap().to_f64();
            assert!((g - t.exponent).abs() < 1e-6, "rho {rho}: {g} vs {}", t.exponent);
        }
        let half = tilted_family(&src, 0.5).unwrap();
        let f = fixed_exponent(ExponentKind::SpherePacking, &src, half.rate).unwrap().to_f64();
        assert!((f - half.exponent).abs() < 1e-6);
    }

    #[test]
    fn variable_bounds_examples() {
        let src = example(0.05, 0.12);
        let h = src.conditional_entropy();
        let b = variable_exponent_bounds(&src, h).unwrap();
        assert!(b.lower.to_f64() < 1e-9 && b.upper_sp.to_f64() < 1e-9);
        let mut eng = VariableEngine::new(&src).unwrap();
        let r = h + 0.01;
        let b = eng.bounds(r).unwrap();
        let exact = b.exact.expect("inside the exact region");
        assert!((b.lower.to_f64() - b.upper_sp.to_f64()).abs() < 1e-6);
        assert_eq!(exact, b.upper_sp);
        let (upper, _) = zero_error_rate_window(&src).unwrap();
        assert!(eng.bounds(upper + 1e-3).unwrap().lower.is_infinite());
    }

    #[test]
    fn second_order_degenerate_and_finite() {
        let indep = JointSource::new(vec![vec![0.12, 0.28], vec![0.18, 0.42]]).unwrap();
        assert!(second_order_coefficient(&indep).unwrap().is_infinite());
        let c = second_order_coefficient(&example(0.05, 0.12)).unwrap();
        assert!(c.is_finite() && c.to_f64() > 0.0);
    }

    #[test]
    fn p_c_max_examples() {
        let src = example(0.05, 0.5);
        let h = src.conditional_entropy();
        assert_eq!(p_c_max(&src, h).unwrap(), 1.0);
        assert_eq!(p_c_max(&src, 0.0).unwrap(), 0.0);
        assert!((p_c_max(&src, 0.5 * h).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(p_c_max(&src, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn zero_error_window_examples() {
        let src = example(0.05, 0.5);
        let (upper, lower) = zero_error_rate_window(&src).unwrap();
        assert!((lower - 2f64.ln()).abs() < 1e-12);
        assert!((0.0..=2f64.ln()).contains(&upper));
        let same_rows = JointSource::new(vec![vec![0.12, 0.28], vec![0.18, 0.42]]).unwrap();
        let (u, l) = zero_error_rate_window(&same_rows).unwrap();
        let h = same_rows.entropy_x();
        assert!((u - h).abs() < 1e-9 && (l - h).abs() < 1e-9);
    }
}
