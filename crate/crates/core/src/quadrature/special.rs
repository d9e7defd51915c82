//! Sine and cosine integrals, and the cosine/sine tail integrals built on them.

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Returns (Si(x), Ci(x)) for x > 0.
pub fn si_ci(x: f64) -> (f64, f64) {
    assert!(x > 0.0, "si_ci needs x > 0");
    if x <= 2.0 {
        let mut si = 0.0;
        let mut ci = 0.0;
        // term = (-1)^k x^n / n!
        let mut term = 1.0;
        let mut n = 0usize;
        loop {
            n += 1;
            term *= x / n as f64;
            let s = if n % 2 == 1 {
                let k = (n - 1) / 2;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let c = sign * term / n as f64;
                si += c;
                c
            } else {
                let k = n / 2;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let c = sign * term / n as f64;
                ci += c;
                c
            };
            if s.abs() < 1e-17 * (1.0 + si.abs() + ci.abs()) && n > 3 {
                break;
            }
            if n > 200 {
                break;
            }
        }
        (si, EULER_GAMMA + x.ln() + ci)
    } else {
        // modified Lentz on the continued fraction of E1(ix)
        let tiny = 1e-300;
        let mut b = Complex64::new(1.0, x);
        let mut c = Complex64::new(1.0 / tiny, 0.0);
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 2..10_000 {
            let a = -((i - 1) * (i - 1)) as f64;
            b += 2.0;
            d = 1.0 / (d * a + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).norm() < 1e-16 {
                break;
            }
        }
        h *= Complex64::new(x.cos(), -x.sin());
        (std::f64::consts::FRAC_PI_2 + h.im, -h.re)
    }
}

/// `∫_T^∞ e^{iτt} τ^{−n} dτ` for n = 1..=n_max (index 0 unused), T > 0.
///
/// For t = 0 only n ≥ 2 is finite; the n = 1 entry is then NaN.
pub fn oscillatory_tail_moments(big_t: f64, t: f64, n_max: usize) -> Vec<Complex64> {
    assert!(big_t > 0.0);
    let mut out = vec![Complex64::new(0.0, 0.0); n_max + 1];
    if t == 0.0 {
        if n_max >= 1 {
            out[1] = Complex64::new(f64::NAN, 0.0);
        }
        for (n, o) in out.iter_mut().enumerate().skip(2) {
            *o = Complex64::new(big_t.powi(1 - n as i32) / (n as f64 - 1.0), 0.0);
        }
        return out;
    }
    let sign = t.signum();
    let ta = t.abs();
    let x = big_t * ta;
    if x > n_max as f64 + 40.0 {
        // upward recurrence amplifies rounding by x/(n−1) per step; recur
        // downward from the asymptotic series for I_{n_max} instead
        return tail_moments_downward(big_t, ta, n_max)
            .into_iter()
            .map(|z| Complex64::new(z.re, sign * z.im))
            .collect();
    }
    let (si, ci) = si_ci(x);
    let mut c = -ci;
    let mut s = std::f64::consts::FRAC_PI_2 - si;
    if n_max >= 1 {
        out[1] = Complex64::new(c, sign * s);
    }
    let (st, ct) = x.sin_cos();
    for (n, o) in out.iter_mut().enumerate().skip(2) {
        let nf = n as f64 - 1.0;
        let p = big_t.powi(1 - n as i32);
        let c_new = (ct * p - ta * s) / nf;
        let s_new = (st * p + ta * c) / nf;
        c = c_new;
        s = s_new;
        *o = Complex64::new(c, sign * s);
    }
    out
}

/// Moments for t > 0 and Tt ≫ n_max via
/// I_N ~ −e^{iTt}T^{−N}/(it) Σ_m (N)_m (iTt)^{−m} and I_{n−1} = ((n−1)I_n − T^{1−n}e^{iTt})/(it).
fn tail_moments_downward(big_t: f64, t: f64, n_max: usize) -> Vec<Complex64> {
    let x = big_t * t;
    let e = Complex64::from_polar(1.0, x);
    let it = Complex64::new(0.0, t);
    let ix = Complex64::new(0.0, x);
    let n = n_max.max(1);
    let mut sum = Complex64::new(1.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    // asymptotic: stop at the smallest term
    for m in 0..200 {
        let next = term * ((n + m) as f64 / ix);
        if next.norm() >= term.norm() {
            break;
        }
        term = next;
        sum += term;
        if term.norm() < 1e-18 {
            break;
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n_max + 1];
    let mut cur = -e * big_t.powi(-(n as i32)) / it * sum;
    if n_max >= 1 {
        out[n] = cur;
    }
    for k in (2..=n).rev() {
        cur = ((k as f64 - 1.0) * cur - big_t.powi(1 - k as i32) * e) / it;
        out[k - 1] = cur;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};

    #[test]
    fn known_values() {
        // Si(1) = 0.946083070367183, Ci(1) = 0.337403922900968
        let (si, ci) = si_ci(1.0);
        assert!((si - 0.946_083_070_367_183).abs() < 1e-14);
        assert!((ci - 0.337_403_922_900_968).abs() < 1e-14);
        // Si(10) = 1.658347594218874, Ci(10) = -0.045456433004455
        let (si, ci) = si_ci(10.0);
        assert!((si - 1.658_347_594_218_874).abs() < 1e-13);
        assert!((ci + 0.045_456_433_004_455).abs() < 1e-13);
    }

    #[test]
    fn branches_are_continuous() {
        let (a, b) = si_ci(2.0 - 1e-12);
        let (c, d) = si_ci(2.0 + 1e-12);
        assert!((a - c).abs() < 1e-11 && (b - d).abs() < 1e-11);
    }

    #[test]
    fn downward_branch_matches_upward_at_the_switch() {
        // both branches are valid near x = n_max + 40; the upward one loses a few digits there
        let big_t = 10.0;
        let lo = oscillatory_tail_moments(big_t, 4.39, 4);
        let hi = tail_moments_downward(big_t, 4.39, 4);
        for n in 1..=4 {
            assert!((lo[n] - hi[n]).norm() < 1e-10 * lo[n].norm().max(1e-300) + 1e-16, "{n}: {} {}", lo[n], hi[n]);
        }
    }

    #[test]
    fn tail_moments_match_quadrature() {
        let (big_t, t) = (3.0, 1.7);
        let m = oscillatory_tail_moments(big_t, t, 4);
        // ∫_T^∞ cos(τt)/τ^3 dτ computed on a long but finite interval
        let tol = Tolerance::new(1e-12);
        let upper = 4000.0;
        let r = integrate(|x| (x * t).cos() / (x * x * x), big_t, upper, tol).unwrap();
        assert!((r.value.re - m[3].re).abs() < 1e-7);
        let r = integrate(|x| (x * t).sin() / (x * x * x * x), big_t, upper, tol).unwrap();
        assert!((r.value.re - m[4].im).abs() < 1e-9);
        let neg = oscillatory_tail_moments(big_t, -t, 4);
        assert!((neg[3] - m[3].conj()).norm() < 1e-15);
    }
}
