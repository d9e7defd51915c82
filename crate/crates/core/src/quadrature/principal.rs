//! Principal-value and near-singular Cauchy integrals of real densities.

use num_complex::Complex64;

use super::gauss::adaptive_points;
use super::{QuadResult, Tolerance};
use crate::error::{Error, Result};

/// A principal-value integrand `φ(u)/(x − u)`.
pub struct PVIntegrand<'a> {
    pub numerator: &'a (dyn Fn(f64) -> f64 + Sync),
    pub pole: f64,
    /// Half-width of the subtraction window around the pole.
    pub window: f64,
}

impl<'a> PVIntegrand<'a> {
    /// Uses the default window `0.5 · min(distance to the support edge, 1)`.
    pub fn new(numerator: &'a (dyn Fn(f64) -> f64 + Sync), pole: f64, support: (f64, f64)) -> Self {
        let dist = (pole - support.0).abs().min((support.1 - pole).abs());
        PVIntegrand {
            numerator,
            pole,
            window: 0.5 * dist.min(1.0),
        }
    }
}

/// Distance below which a pole counts as sitting on the support boundary.
pub const BOUNDARY_EPS: f64 = 1e-12;

fn merge(a: QuadResult, b: QuadResult) -> QuadResult {
    QuadResult {
        value: a.value + b.value,
        abs_error_estimate: a.abs_error_estimate + b.abs_error_estimate,
        evaluations: a.evaluations + b.evaluations,
    }
}

fn checked(res: QuadResult, ok: bool, tol: Tolerance) -> Result<QuadResult> {
    if ok {
        Ok(res)
    } else {
        Err(Error::ToleranceNotMet {
            achieved: res.abs_error_estimate,
            requested: tol.abs,
            evaluations: res.evaluations,
        })
    }
}

/// `PV ∫_a^b φ(u)/(x − u) du`.
///
/// Inside the support the window `[x − h, x + h]` is folded onto `(0, h]`,
/// giving the regular integrand `(φ(x − s) − φ(x + s))/s`; the remainder is
/// integrated directly. `breakpoints` are extra interior points where φ is not
/// smooth.
pub fn pv_integral(
    p: &PVIntegrand<'_>,
    support: (f64, f64),
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    let (a, b) = support;
    let x = p.pole;
    let phi = p.numerator;
    let dist = (x - a).abs().min((x - b).abs());
    if dist < BOUNDARY_EPS {
        return Err(Error::PoleOnBoundary {
            pole: x,
            distance: dist,
        });
    }
    let outer = |lo: f64, hi: f64| -> (QuadResult, bool) {
        let mut pts = vec![lo];
        pts.extend(breakpoints.iter().copied().filter(|&c| c > lo && c < hi));
        pts.push(hi);
        adaptive_points(
            &|u: f64| Complex64::new(phi(u) / (x - u), 0.0),
            &pts,
            tol,
        )
    };
    if x <= a || x >= b {
        let (r, ok) = outer(a, b);
        return checked(r, ok, tol);
    }
    let h = p.window.min(x - a).min(b - x);
    if h <= 0.0 {
        return Err(Error::InvalidInput("principal-value window must be positive".into()));
    }
    let mut inner_pts = vec![0.0];
    inner_pts.extend(
        breakpoints
            .iter()
            .map(|&c| (c - x).abs())
            .filter(|&s| s > 0.0 && s < h),
    );
    inner_pts.push(h);
    inner_pts.sort_by(f64::total_cmp);
    inner_pts.dedup();
    let (w, ok_w) = adaptive_points(
        &|s: f64| Complex64::new((phi(x - s) - phi(x + s)) / s, 0.0),
        &inner_pts,
        tol,
    );
    let (l, ok_l) = outer(a, x - h);
    let (r, ok_r) = outer(x + h, b);
    checked(merge(merge(w, l), r), ok_w && ok_l && ok_r, tol)
}

/// `∫_a^b φ(u)/(z − u) du` for complex `z` off the real segment.
///
/// When `z` is close to the segment the first-order Taylor polynomial of φ at
/// `Re z` is subtracted and integrated in closed form, leaving a bounded integrand.
pub fn cauchy_integral<F, D>(
    phi: &F,
    dphi: &D,
    z: Complex64,
    support: (f64, f64),
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<QuadResult>
where
    F: Fn(f64) -> f64 + ?Sized,
    D: Fn(f64) -> f64 + ?Sized,
{
    let (a, b) = support;
    let x = z.re;
    let y = z.im;
    let width = b - a;
    let near = x > a && x < b && y.abs() < 0.25 * width.min(1.0);
    let mut pts = vec![a];
    pts.extend(breakpoints.iter().copied().filter(|&c| c > a && c < b));
    if x > a && x < b {
        pts.push(x);
    }
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if !near {
        let (r, ok) = adaptive_points(&|u: f64| phi(u) / (z - u), &pts, tol);
        return checked(r, ok, tol);
    }
    let p0 = phi(x);
    let p1 = dphi(x);
    let (r, ok) = adaptive_points(
        &|u: f64| (phi(u) - p0 - p1 * (u - x)) / (z - u),
        &pts,
        tol,
    );
    let log_term = (z - a).ln() - (z - b).ln();
    let linear = -width + Complex64::new(0.0, y) * log_term;
    let value = r.value + p0 * log_term + p1 * linear;
    checked(
        QuadResult {
            value,
            abs_error_estimate: r.abs_error_estimate,
            evaluations: r.evaluations + 2,
        },
        ok,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(u: f64) -> f64 {
        (-u * u).exp()
    }

    #[test]
    fn even_numerator_at_zero_vanishes() {
        let f: &(dyn Fn(f64) -> f64 + Sync) = &gauss;
        let p = PVIntegrand::new(f, 0.0, (-8.0, 8.0));
        let r = pv_integral(&p, (-8.0, 8.0), &[], Tolerance::new(1e-12)).unwrap();
        assert!(r.value.norm() < 1e-12);
    }

    #[test]
    fn gaussian_pv_against_symmetric_pair_sum() {
        // PV ∫ e^{-u²}/(1-u) du; oracle: midpoint pairs symmetric around the pole
        let f: &(dyn Fn(f64) -> f64 + Sync) = &gauss;
        let p = PVIntegrand::new(f, 1.0, (-9.0, 11.0));
        let r = pv_integral(&p, (-9.0, 11.0), &[], Tolerance::new(1e-12)).unwrap();
        let n = 1_000_000;
        let half = 10.0;
        let h = half / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let d = (i as f64 + 0.5) * h;
            s += (gauss(1.0 - d) - gauss(1.0 + d)) / d;
        }
        s *= h;
        assert!((r.value.re - s).abs() < 1e-8, "{} vs {}", r.value.re, s);
    }

    #[test]
    fn outside_pole_is_plain_integral() {
        let f: &(dyn Fn(f64) -> f64 + Sync) = &gauss;
        let p = PVIntegrand::new(f, 3.0, (-1.0, 1.0));
        let r = pv_integral(&p, (-1.0, 1.0), &[], Tolerance::new(1e-12)).unwrap();
        let plain = crate::quadrature::integrate(|u| gauss(u) / (3.0 - u), -1.0, 1.0, Tolerance::new(1e-12)).unwrap();
        assert!((r.value - plain.value).norm() < 1e-12);
    }

    #[test]
    fn boundary_pole_is_rejected() {
        let f: &(dyn Fn(f64) -> f64 + Sync) = &gauss;
        let p = PVIntegrand {
            numerator: f,
            pole: 1.0,
            window: 0.1,
        };
        let e = pv_integral(&p, (-1.0, 1.0), &[], Tolerance::default()).unwrap_err();
        assert!(matches!(e, Error::PoleOnBoundary { .. }));
    }

    #[test]
    fn cauchy_approaches_plemelj_limit() {
        // H(x - i0) = PV ∫ φ/(x-u) + iπ φ(x)
        let f: &(dyn Fn(f64) -> f64 + Sync) = &gauss;
        let x = 0.7;
        let pv = pv_integral(&PVIntegrand::new(f, x, (-9.0, 9.0)), (-9.0, 9.0), &[], Tolerance::new(1e-12)).unwrap();
        let dphi = |u: f64| -2.0 * u * gauss(u);
        let h = cauchy_integral(&gauss, &dphi, Complex64::new(x, -1e-9), (-9.0, 9.0), &[], Tolerance::new(1e-12)).unwrap();
        let expect = Complex64::new(pv.value.re, std::f64::consts::PI * gauss(x));
        assert!((h.value - expect).norm() < 1e-7, "{} vs {}", h.value, expect);
    }

    #[test]
    fn cauchy_far_from_axis() {
        // midpoint oracle; the integrand is smooth this far from the axis
        let z = Complex64::new(0.3, 2.0);
        let dphi = |u: f64| -2.0 * u * gauss(u);
        let h = cauchy_integral(&gauss, &dphi, z, (-9.0, 9.0), &[], Tolerance::new(1e-12)).unwrap();
        let n = 200_000;
        let dx = 18.0 / n as f64;
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let u = -9.0 + (i as f64 + 0.5) * dx;
            s += gauss(u) / (z - u);
        }
        s *= dx;
        assert!((h.value - s).norm() < 1e-9);
    }
}
