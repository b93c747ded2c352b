//! Small scalar and low-dimensional optimizers used by the exponent solvers.
//!
//! These run millions of times inside rate sweeps, so they are plain
//! closures over `f64` with no allocation in the scalar paths.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes a unimodal `f` on `[a, b]` by golden-section search.
/// Returns the best abscissa seen and its value (endpoints included).
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for x in [a, b] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Maximizes a concave `f` over `[0, inf)` by expanding the bracket and then
/// golden-section search. Returns `(x, f(x))`; `x` is capped at `cap`.
pub fn concave_max_halfline<F: FnMut(f64) -> f64>(mut f: F, cap: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut mid, mut hi) = (0.0, 0.0, 1.0f64.min(cap));
    let mut f_mid = f(0.0);
    loop {
        let fh = f(hi);
        if fh <= f_mid || hi >= cap {
            break;
        }
        lo = mid;
        mid = hi;
        f_mid = fh;
        hi = (hi * 4.0).min(cap);
    }
    let (x, fx) = golden_min(|x| -f(x), lo, hi, tol * (1.0 + hi));
    (x, -fx)
}

/// Finds a root of `f` in `[a, b]` given values of opposite sign at the
/// endpoints (Brent's method: bisection, secant and inverse quadratic steps).
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64) -> f64 {
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(fa.signum() != fb.signum(), "root not bracketed: {fa} {fb}");
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    b
}

/// Nelder-Mead minimization from `x0` with initial simplex edge `step`.
/// Infeasible points should evaluate to `f64::INFINITY`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], step: f64, ftol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = (vals[n] - vals[0]).abs();
        let size = pts.iter().skip(1).map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
        if (vals[n].is_finite() && spread <= ftol) || size < 1e-14 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let xc = if fr < vals[n] { along(0.5) } else { along(-0.5) };
            let fc = f(&xc);
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = pts[i].iter().zip(&pts[0]).map(|(p, b)| b + 0.5 * (p - b)).collect();
                    vals[i] = f(&shrunk);
                    pts[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    (pts[best].clone(), vals[best])
}

/// All points of the probability simplex on `k` letters whose coordinates
/// are multiples of `1/den`, in lexicographic order.
pub fn simplex_grid(k: usize, den: u32) -> Vec<Vec<f64>> {
    crate::types::enumerate_types(den, k)
        .expect("den >= 1")
        .into_iter()
        .map(|t| t.counts().iter().map(|&c| c as f64 / den as f64).collect())
        .collect()
}

/// Grid resolution for searches over input distributions.
pub const BINARY_GRID: u32 = 200;
pub const TERNARY_GRID: u32 = 60;

/// Global search over the probability simplex on `k <= 3` letters: a
/// lattice scan (step `1/200` for two letters, `1/60` for three) followed by
/// local refinement around the best lattice point. `f` returns
/// `f64::INFINITY` where the objective is infinite. The first minimizer in
/// lexicographic order wins ties. `extra` points are always evaluated.
/// Returns `None` for `k > 3`.
pub fn simplex_min<F: FnMut(&[f64]) -> f64>(k: usize, mut f: F, extra: &[Vec<f64>]) -> Option<(Vec<f64>, f64)> {
    match k {
        1 => {
            let v = f(&[1.0]);
            Some((vec![1.0], v))
        }
        2 => {
            let den = BINARY_GRID as f64;
            let mut best = (f64::NAN, f64::INFINITY);
            let mut best_set = false;
            for i in 0..=BINARY_GRID {
                let a = i as f64 / den;
                let v = f(&[a, 1.0 - a]);
                if !best_set || v < best.1 {
                    best = (a, v);
                    best_set = true;
                }
            }
            for p in extra {
                let v = f(p);
                if v < best.1 {
                    best = (p[0], v);
                }
            }
            if best.1.is_finite() {
                let lo = (best.0 - 1.0 / den).max(0.0);
                let hi = (best.0 + 1.0 / den).min(1.0);
                let (a, v) = golden_min(|a| f(&[a, 1.0 - a]), lo, hi, 1e-10);
                if v < best.1 {
                    best = (a, v);
                }
            }
            Some((vec![best.0, 1.0 - best.0], best.1))
        }
        3 => {
            let mut best: Option<(Vec<f64>, f64)> = None;
            for p in simplex_grid(3, TERNARY_GRID).into_iter().chain(extra.iter().cloned()) {
                let v = f(&p);
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((p, v));
                }
            }
            let (p0, v0) = best.expect("grid is nonempty");
            if !v0.is_finite() {
                return Some((p0, v0));
            }
            let lift = |z: &[f64]| -> Option<[f64; 3]> {
                let c = 1.0 - z[0] - z[1];
                (z[0] >= 0.0 && z[1] >= 0.0 && c >= 0.0).then_some([z[0], z[1], c])
            };
            let (z, v) = nelder_mead(
                |z| match lift(z) {
                    Some(p) => f(&p),
                    None => f64::INFINITY,
                },
                &p0[..2],
                0.5 / TERNARY_GRID as f64,
                1e-13,
                2000,
            );
            if v < v0 {
                let p = lift(&z).expect("finite value implies feasible point");
                Some((p.to_vec(), v))
            } else {
                Some((p0, v0))
            }
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_min(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx < 1e-18);
    }

    #[test]
    fn golden_returns_endpoint_minimum() {
        let (x, _) = golden_min(|x| x, 0.0, 1.0, 1e-10);
        assert_eq!(x, 0.0);
    }

    #[test]
    fn brent_solves_cubic() {
        let f = |x: f64| x * x * x - 2.0;
        let r = brent_root(f, 0.0, 2.0, f(0.0), f(2.0), 1e-14);
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn halfline_maximum_beyond_initial_bracket() {
        let (x, fx) = concave_max_halfline(|x| -(x - 37.0).powi(2), 1e7, 1e-12);
        assert!((x - 37.0).abs() < 1e-5, "{x}");
        assert!(fx.abs() < 1e-9);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let (x, fx) = nelder_mead(|p| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2), &[-1.0, 1.0], 0.5, 1e-20, 5000);
        assert!(fx < 1e-12, "{fx}");
        assert!((x[0] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn simplex_min_finds_interior_optimum() {
        let target = [0.2, 0.3, 0.5];
        let (p, v) = simplex_min(3, |q| q.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum(), &[]).unwrap();
        assert!(v < 1e-12);
        assert!((p[0] - 0.2).abs() < 1e-6);
        let (p, _) = simplex_min(2, |q| (q[0] - 0.123_456).powi(2), &[]).unwrap();
        assert!((p[0] - 0.123_456).abs() < 1e-9);
        assert!(simplex_min(4, |_| 0.0, &[]).is_none());
    }

    #[test]
    fn grid_counts() {
        assert_eq!(simplex_grid(2, 200).len(), 201);
        assert_eq!(simplex_grid(3, 60).len(), 61 * 62 / 2);
    }
}
