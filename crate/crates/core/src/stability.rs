//! Spectral stability of the linearized problem: the criterion integral, the
//! Φ curve, imaginary-axis floors, zero location on the real branch, winding
//! numbers, and a sampled certificate for `inf |D̃| > 0`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{endpoint_exponent, DispersionEvaluator};
use crate::error::{Error, Result};
use crate::profiles::{Marginal, Potential};
use crate::quadrature::{integrate, integrate_points, Tolerance};

/// Value of `1 − (ŵ(0)/2)∫ φ(u)/(Υ − u)² du`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriterionValue {
    Value { value: f64 },
    /// The integral diverges at u = Υ (local exponent α ≤ 1); the criterion fails.
    Divergent { exponent: f64 },
    /// Υ = ∞: nothing to check.
    VacuouslyTrue,
}

impl CriterionValue {
    pub fn holds(&self) -> bool {
        match self {
            CriterionValue::Value { value } => *value > 0.0,
            CriterionValue::Divergent { .. } => false,
            CriterionValue::VacuouslyTrue => true,
        }
    }

    /// Numerical value, with −∞ for divergence and NaN when vacuous.
    pub fn as_f64(&self) -> f64 {
        match self {
            CriterionValue::Value { value } => *value,
            CriterionValue::Divergent { .. } => f64::NEG_INFINITY,
            CriterionValue::VacuouslyTrue => f64::NAN,
        }
    }
}

fn tol() -> Tolerance {
    Tolerance::new(1e-12).with_rel(1e-12)
}

/// Φ(k) = 1 − (ŵ(k)/2)∫_{|u|<Υ} φ(u)/[(Υ − u)(Υ + k − u)] du, equal to D̃(i(2Υ + k), k).
pub fn phi_value(m: &Marginal, w: &Potential, k: f64) -> Result<CriterionValue> {
    let ups = m.upsilon;
    if !ups.is_finite() {
        return Ok(CriterionValue::VacuouslyTrue);
    }
    let wk = w.w_hat(k);
    if wk == 0.0 {
        return Ok(CriterionValue::Value { value: 1.0 });
    }
    let singular_factors = if k == 0.0 { 2.0 } else { 1.0 };
    let alpha = endpoint_exponent(m);
    if alpha <= singular_factors - 1.0 + 1e-3 {
        return Ok(CriterionValue::Divergent { exponent: alpha });
    }
    let r = integrate_points(
        |u| m.phi(u) / ((ups - u) * (ups + k - u)),
        &[-ups, 0.0, ups],
        tol(),
    )?;
    Ok(CriterionValue::Value {
        value: 1.0 - 0.5 * wk * r.value.re,
    })
}

/// The criterion integral (Φ at k = 0).
pub fn criterion_integral(m: &Marginal, w: &Potential) -> Result<CriterionValue> {
    phi_value(m, w, 0.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiCurve {
    pub samples: Vec<(f64, f64)>,
    pub phi_at_zero: CriterionValue,
    pub phi_at_infinity: f64,
    /// Whether the samples came out nondecreasing in k.
    pub monotone: bool,
}

pub fn phi_curve(m: &Marginal, w: &Potential, k_grid: &[f64]) -> Result<PhiCurve> {
    if !m.upsilon.is_finite() {
        return Err(Error::InvalidInput("Φ needs a compactly supported marginal".into()));
    }
    let mut samples = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let v = phi_value(m, w, k)?.as_f64();
        samples.push((k, v));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = samples
        .windows(2)
        .all(|p| p[1].1 >= p[0].1 - 1e-10 || p[0].1 == f64::NEG_INFINITY);
    Ok(PhiCurve {
        samples,
        phi_at_zero: criterion_integral(m, w)?,
        phi_at_infinity: 1.0,
        monotone,
    })
}

/// D̃(iτ̃, k) on the imaginary axis for any k ≥ 0 (boundary, real branch, or k = 0 limit).
fn axis_value(ev: &DispersionEvaluator<'_>, tau: f64, k: f64) -> Result<Complex64> {
    Ok(ev.d_tilde(Complex64::new(0.0, tau), k)?.value)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AxisFloor {
    pub k: f64,
    pub min_modulus: f64,
    pub argmin_tau: f64,
    /// (πŵ(k)/(2k))|φ((τ̃+k)/2) − φ((τ̃−k)/2)| at the argmin.
    pub imag_lower_bound: f64,
    /// |D̃(0, k)| if τ̃ = 0 was on the grid.
    pub value_at_origin: Option<f64>,
}

/// Minimum of |D̃(iτ̃, k)| over `tau_grid`.
pub fn imaginary_axis_floor(m: &Marginal, w: &Potential, k: f64, tau_grid: &[f64]) -> Result<AxisFloor> {
    let ev = DispersionEvaluator::new(m, w);
    let values: Vec<Result<Complex64>> = tau_grid.par_iter().map(|&t| axis_value(&ev, t, k)).collect();
    let mut best = (f64::INFINITY, f64::NAN);
    let mut origin = None;
    for (&t, v) in tau_grid.iter().zip(values) {
        let v = v?;
        if t == 0.0 {
            origin = Some(v.norm());
        }
        if v.norm() < best.0 {
            best = (v.norm(), t);
        }
    }
    let t = best.1;
    let imag_lower_bound = if k > 0.0 && t.is_finite() {
        std::f64::consts::PI * w.w_hat(k) / (2.0 * k) * (m.phi((t + k) / 2.0) - m.phi((t - k) / 2.0)).abs()
    } else {
        f64::NAN
    };
    Ok(AxisFloor {
        k,
        min_modulus: best.0,
        argmin_tau: t,
        imag_lower_bound,
        value_at_origin: origin,
    })
}

/// The zero τ̃* > 2Υ + k of D̃(iτ̃, k) on the real branch, when Φ(k) < 0.
pub fn find_imaginary_zero(m: &Marginal, w: &Potential, k: f64) -> Result<f64> {
    let ups = m.upsilon;
    if !ups.is_finite() {
        return Err(Error::NoRoot("Υ = ∞: the real branch is empty".into()));
    }
    let phi_k = phi_value(m, w, k)?;
    let start_divergent = matches!(phi_k, CriterionValue::Divergent { .. });
    if let CriterionValue::Value { value } = phi_k {
        if value >= 0.0 {
            return Err(Error::NoRoot(format!("Φ({k}) = {value} ≥ 0")));
        }
    }
    let ev = DispersionEvaluator::new(m, w);
    let edge = 2.0 * ups + k;
    let real = |t: f64| -> Result<f64> { Ok(axis_value(&ev, t, k)?.re) };
    let mut lo = if start_divergent {
        let mut eps = 1e-9 * edge.max(1.0);
        let mut x = edge + eps;
        while real(x)? >= 0.0 {
            eps *= 0.1;
            if eps < 1e-16 * edge {
                return Err(Error::NoRoot("no sign change next to the divergent endpoint".into()));
            }
            x = edge + eps;
        }
        x
    } else {
        edge
    };
    if real(lo)? >= 0.0 {
        return Err(Error::NoRoot("D̃ nonnegative at the branch start".into()));
    }
    let mut hi = edge + 1.0;
    while real(hi)? <= 0.0 {
        hi = edge + 2.0 * (hi - edge);
        if hi > 1e8 {
            return Err(Error::NoRoot("no sign change up to τ̃ = 1e8".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-13 * hi {
            break;
        }
        if real(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (real(lo)?, real(hi)?);
    Ok(if flo.abs() < fhi.abs() { lo } else { hi })
}

/// Rectangle `[re_min, re_max] × [im_min, im_max]` in the λ̃ plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WindingCheck {
    pub k: f64,
    pub contour: Rect,
    pub winding: i64,
    /// Unrounded total phase change over 2π.
    pub raw: f64,
    pub min_modulus: f64,
    pub evaluations: usize,
}

/// Winding number of D̃(·, k) along the positively oriented rectangle.
///
/// Segments whose phase increment exceeds π/4 are bisected (up to 16 levels);
/// an increment above π/2 after that is reported as `ContourTooCoarse`.
pub fn winding_number(
    m: &Marginal,
    w: &Potential,
    k: f64,
    contour: Rect,
    nodes_per_side: usize,
) -> Result<WindingCheck> {
    if !(contour.re_min > 0.0) || contour.re_max <= contour.re_min || contour.im_max <= contour.im_min {
        return Err(Error::InvalidInput("contour must be a proper rectangle in Re λ̃ > 0".into()));
    }
    let ev = DispersionEvaluator::new(m, w);
    let corners = [
        Complex64::new(contour.re_min, contour.im_min),
        Complex64::new(contour.re_max, contour.im_min),
        Complex64::new(contour.re_max, contour.im_max),
        Complex64::new(contour.re_min, contour.im_max),
    ];
    let n = nodes_per_side.max(4);
    let mut pts = Vec::with_capacity(4 * n);
    for s in 0..4 {
        let a = corners[s];
        let b = corners[(s + 1) % 4];
        for j in 0..n {
            pts.push(a + (b - a) * (j as f64 / n as f64));
        }
    }
    let eval = |z: Complex64| -> Result<Complex64> { Ok(ev.d_tilde(z, k)?.value) };
    let vals: Vec<Result<Complex64>> = pts.par_iter().map(|&z| eval(z)).collect();
    let vals: Vec<Complex64> = vals.into_iter().collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut min_mod = f64::INFINITY;
    let mut evaluations = vals.len();
    for i in 0..pts.len() {
        let j = (i + 1) % pts.len();
        let (za, zb) = (pts[i], pts[j]);
        let (fa, fb) = (vals[i], vals[j]);
        min_mod = min_mod.min(fa.norm());
        total += refine_phase(&eval, za, zb, fa, fb, 0, i, &mut evaluations, &mut min_mod)?;
    }
    if min_mod < 1e-12 {
        return Err(Error::ZeroOnContour { modulus: min_mod });
    }
    let raw = total / (2.0 * std::f64::consts::PI);
    Ok(WindingCheck {
        k,
        contour,
        winding: raw.round() as i64,
        raw,
        min_modulus: min_mod,
        evaluations,
    })
}

#[allow(clippy::too_many_arguments)]
fn refine_phase(
    eval: &dyn Fn(Complex64) -> Result<Complex64>,
    za: Complex64,
    zb: Complex64,
    fa: Complex64,
    fb: Complex64,
    depth: usize,
    node: usize,
    evaluations: &mut usize,
    min_mod: &mut f64,
) -> Result<f64> {
    let dphase = (fb / fa).arg();
    if dphase.abs() <= std::f64::consts::FRAC_PI_4 {
        return Ok(dphase);
    }
    if depth >= 16 {
        if dphase.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::ContourTooCoarse { jump: dphase.abs(), node });
        }
        return Ok(dphase);
    }
    let zm = 0.5 * (za + zb);
    let fm = eval(zm)?;
    *evaluations += 1;
    *min_mod = min_mod.min(fm.norm());
    Ok(refine_phase(eval, za, zm, fa, fm, depth + 1, node, evaluations, min_mod)?
        + refine_phase(eval, zm, zb, fm, fb, depth + 1, node, evaluations, min_mod)?)
}

/// ∫_0^∞ |φ̂(t)| dt and ∫_0^∞ t|φ̂′(t)| dt, which bound |D̃ − 1| for large k and large |λ̃|.
pub fn tail_constants(m: &Marginal) -> (f64, f64) {
    let a = halfline_abs(&|t| m.phi_hat(t).abs(), m);
    let b = halfline_abs(&|t| t * m.dphi_hat(t).abs(), m);
    (a, b)
}

fn halfline_abs(g: &(dyn Fn(f64) -> f64 + Sync), m: &Marginal) -> f64 {
    let t = Tolerance::new(1e-10).with_rel(1e-8);
    let first = m.phi_hat_decay_radius().unwrap_or(64.0 / m.upsilon.max(1e-3));
    let piece = |a: f64, b: f64| integrate(g, a, b, t).map(|r| r.value.re).unwrap_or(f64::NAN);
    let mut total = piece(0.0, first);
    if m.phi_hat_decay_radius().is_some() {
        return total;
    }
    let mut lo = first;
    let mut prev = f64::NAN;
    for _ in 0..12 {
        let p = piece(lo, 2.0 * lo);
        total += p;
        if prev.is_finite() && p > 0.0 {
            let r = p / prev;
            if r < 0.9 && p * r / (1.0 - r) < 1e-6 * total {
                return total + p * r / (1.0 - r);
            }
        }
        prev = p;
        lo *= 2.0;
    }
    if prev.is_finite() && total.is_finite() {
        let r = prev / (total - prev).max(f64::MIN_POSITIVE);
        if r < 0.5 {
            return total;
        }
    }
    f64::INFINITY
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanConfig {
    pub k_min: f64,
    pub n_k: usize,
    pub n_tau: usize,
    /// Upper bound on the scanned |λ̃| when the tail bound gives nothing smaller.
    pub tau_cap: f64,
    /// Upper bound on the scanned k.
    pub k_cap: f64,
    /// Interior sample count per direction per k (sanity only).
    pub interior: usize,
    pub winding_ks: Vec<f64>,
    pub winding_re_min: f64,
    pub winding_extent: f64,
    pub winding_nodes: usize,
    pub zero_tolerance: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            k_min: 1e-3,
            n_k: 80,
            n_tau: 800,
            tau_cap: 200.0,
            k_cap: 100.0,
            interior: 6,
            winding_ks: vec![0.1, 1.0, 10.0],
            winding_re_min: 0.01,
            winding_extent: 50.0,
            winding_nodes: 200,
            zero_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Stable {
        theta0: f64,
    },
    Unstable {
        tau_tilde: f64,
        k: f64,
        modulus: f64,
    },
    CriterionDiverges {
        exponent: f64,
        /// An imaginary-axis zero located next to the divergence, if found.
        zero: Option<(f64, f64)>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanSummary {
    pub min_modulus: f64,
    pub argmin_tau: f64,
    pub argmin_k: f64,
    /// Sampled minimum less θ₀.
    pub margin: f64,
    pub k_star: f64,
    pub lambda_star: f64,
    pub k_range: (f64, f64),
    pub tau_range: (f64, f64),
    pub nodes: usize,
    /// min over scanned k of Re D̃(0, k).
    pub min_re_at_origin: f64,
    pub interior_min_modulus: f64,
    /// Per-k minima over the imaginary axis.
    pub per_k: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub verdict: Verdict,
    pub phi0: CriterionValue,
    pub scan_summary: Option<ScanSummary>,
    pub winding_checks: Vec<WindingCheck>,
    pub note: String,
}

impl StabilityCertificate {
    pub fn is_stable(&self) -> bool {
        matches!(self.verdict, Verdict::Stable { .. })
    }

    pub fn theta0(&self) -> Option<f64> {
        match self.verdict {
            Verdict::Stable { theta0 } => Some(theta0),
            _ => None,
        }
    }
}

const NOTE: &str = "sampled, not rigorous: θ₀ is the smallest per-edge bound min(|D̃_a|, |D̃_b|) − |D̃_a − D̃_b|/2 over the scan grid";

/// Runs the criterion, then either locates an imaginary-axis zero or scans
/// |D̃| over the compact region left by the tail bounds.
pub fn certify(m: &Marginal, w: &Potential, cfg: &ScanConfig) -> Result<StabilityCertificate> {
    let phi0 = criterion_integral(m, w)?;
    match phi0 {
        CriterionValue::Divergent { exponent } => {
            let zero = [0.05, 0.1, 0.2]
                .iter()
                .find_map(|&k| find_imaginary_zero(m, w, k).ok().map(|t| (t, k)));
            return Ok(StabilityCertificate {
                verdict: Verdict::CriterionDiverges { exponent, zero },
                phi0,
                scan_summary: None,
                winding_checks: vec![],
                note: "criterion integral diverges at u = Υ".into(),
            });
        }
        CriterionValue::Value { value } if value <= 0.0 => {
            let ks = k_grid(cfg.k_min, 10.0, cfg.n_k);
            let ev = DispersionEvaluator::new(m, w);
            for &k in &ks {
                if let Ok(t) = find_imaginary_zero(m, w, k) {
                    let modulus = axis_value(&ev, t, k)?.norm();
                    return Ok(StabilityCertificate {
                        verdict: Verdict::Unstable {
                            tau_tilde: t,
                            k,
                            modulus,
                        },
                        phi0,
                        scan_summary: None,
                        winding_checks: vec![],
                        note: "zero located on the real branch of the imaginary axis".into(),
                    });
                }
            }
            return Err(Error::NoRoot("criterion fails but no zero was located".into()));
        }
        _ => {}
    }
    scan(m, w, cfg, phi0)
}

fn k_grid(k_min: f64, k_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let mut ks = vec![0.0];
    let (a, b) = (k_min.ln(), k_max.max(k_min * 1.01).ln());
    for i in 0..n {
        ks.push((a + (b - a) * i as f64 / (n - 1) as f64).exp());
    }
    ks
}

fn scan(m: &Marginal, w: &Potential, cfg: &ScanConfig, phi0: CriterionValue) -> Result<StabilityCertificate> {
    let (a, b) = tail_constants(m);
    // |D̃ − 1| ≤ ŵ(k)A/k  and  |D̃ − 1| ≤ ŵ(0)(A + B)/|λ̃|
    let mut k_star = cfg.k_min.max(1e-3);
    while w.w_hat(k_star) * a / k_star > 0.5 && k_star < cfg.k_cap {
        k_star *= 1.1;
    }
    let k_star = k_star.min(cfg.k_cap);
    let lambda_star = (2.0 * w.w_hat_zero * (a + b)).min(cfg.tau_cap).max(1.0);
    let ks = k_grid(cfg.k_min, k_star, cfg.n_k);
    let ups = m.upsilon;
    let ev = DispersionEvaluator::new(m, w);

    struct Row {
        k: f64,
        taus: Vec<f64>,
        vals: Vec<Complex64>,
        interior_min: f64,
    }
    let rows: Vec<Result<Row>> = ks
        .par_iter()
        .map(|&k| {
            let top = if ups.is_finite() {
                (2.0 * ups + k).min(lambda_star)
            } else {
                lambda_star
            };
            let n = cfg.n_tau.max(8);
            let mut taus: Vec<f64> = (0..=n).map(|i| top * i as f64 / n as f64).collect();
            if ups.is_finite() && top == 2.0 * ups + k {
                // the real branch starts at the edge, where D̃ = Φ(k)
                taus.pop();
            }
            let vals = taus
                .iter()
                .map(|&t| axis_value(&ev, t, k))
                .collect::<Result<Vec<_>>>()?;
            let mut interior_min = f64::INFINITY;
            if k > 0.0 {
                for i in 1..=cfg.interior {
                    for j in 0..=cfg.interior {
                        let re = lambda_star * i as f64 / cfg.interior as f64 * 0.5;
                        let im = top * j as f64 / cfg.interior as f64;
                        let v = ev.d_tilde(Complex64::new(re, im), k)?.value;
                        interior_min = interior_min.min(v.norm());
                    }
                }
            }
            Ok(Row {
                k,
                taus,
                vals,
                interior_min,
            })
        })
        .collect();
    let rows: Vec<Row> = rows.into_iter().collect::<Result<_>>()?;

    // Each grid edge contributes min(|D̃_a|, |D̃_b|) − |D̃_a − D̃_b|/2 as its lower bound.
    let edge = |a: Complex64, b: Complex64| a.norm().min(b.norm()) - 0.5 * (a - b).norm();
    let mut min_modulus = f64::INFINITY;
    let mut floor = f64::INFINITY;
    let mut arg = (f64::NAN, f64::NAN);
    let mut min_re0 = f64::INFINITY;
    let mut interior_min = f64::INFINITY;
    let mut per_k = Vec::new();
    let mut nodes = 0;
    for (ri, row) in rows.iter().enumerate() {
        let mut row_min = f64::INFINITY;
        for (i, v) in row.vals.iter().enumerate() {
            nodes += 1;
            if v.norm() < min_modulus {
                min_modulus = v.norm();
                arg = (row.taus[i], row.k);
            }
            row_min = row_min.min(v.norm());
            if i > 0 {
                floor = floor.min(edge(*v, row.vals[i - 1]));
            }
        }
        if ri > 0 {
            let prev = &rows[ri - 1];
            for (a, b) in row.vals.iter().zip(&prev.vals) {
                floor = floor.min(edge(*a, *b));
            }
        }
        min_re0 = min_re0.min(row.vals[0].re);
        interior_min = interior_min.min(row.interior_min);
        per_k.push((row.k, row_min));
    }
    // outside the scanned region |D̃| ≥ 1/2 by the tail bounds
    let mut theta0 = floor.min(0.5);
    min_modulus = min_modulus.min(0.5);
    // beyond 2Υ + k the branch is real and increasing from Φ(k) ≥ Φ(0) > 0
    if ups.is_finite() {
        if let CriterionValue::Value { value } = phi0 {
            if value < min_modulus {
                min_modulus = value;
                arg = (2.0 * ups, 0.0);
            }
            theta0 = theta0.min(value);
        }
    }
    let margin = min_modulus - theta0;

    let winding_checks = cfg
        .winding_ks
        .iter()
        .map(|&k| {
            let e = cfg.winding_extent;
            winding_number(
                m,
                w,
                k,
                Rect {
                    re_min: cfg.winding_re_min,
                    re_max: e,
                    im_min: -e,
                    im_max: e,
                },
                cfg.winding_nodes,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = ScanSummary {
        min_modulus,
        argmin_tau: arg.0,
        argmin_k: arg.1,
        margin,
        k_star,
        lambda_star,
        k_range: (0.0, k_star),
        tau_range: (0.0, lambda_star),
        nodes,
        min_re_at_origin: min_re0,
        interior_min_modulus: interior_min,
        per_k,
    };
    if theta0 <= 0.0 {
        return Err(Error::Inconclusive {
            minimum: min_modulus,
            margin,
        });
    }
    if winding_checks.iter().any(|c| c.winding != 0) {
        return Err(Error::Inconclusive {
            minimum: min_modulus,
            margin,
        });
    }
    Ok(StabilityCertificate {
        verdict: Verdict::Stable { theta0 },
        phi0,
        scan_summary: Some(summary),
        winding_checks,
        note: NOTE.into(),
    })
}
