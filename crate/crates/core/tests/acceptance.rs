//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failures are reported but only turn into a nonzero exit status when
//! `ACCEPTANCE_STRICT=1` is set.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use hartree_mix::dispersion::DispersionEvaluator;
use hartree_mix::dynamics::{
    free_trajectory, log_grid, reconstruct_sup_norm, uniform_grid, volterra_march, volterra_solve_with, InitialKernel,
    TimeRule, TrajectoryMeta,
};
use hartree_mix::green::{convolve_green_with, envelope_fit, GreenTable};
use hartree_mix::nonlinear::{
    density_from_state, lattice_kernel, normalize_kernel, scattering_diagnostic, solve_selfconsistent, KernelState,
    NonlinearConfig,
};
use hartree_mix::pipeline::fit_decay;
use hartree_mix::profiles::{build_marginal, shifted_l2_difference, EquilibriumProfile, Marginal, Potential, ProfileKind};
use hartree_mix::stability::{certify, criterion_integral, find_imaginary_zero, CriterionValue, ScanConfig, Verdict};

type Outcome = Result<(bool, Vec<String>), String>;

struct Line {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: Vec<String>,
    elapsed: Duration,
    budget: Duration,
}

fn run(id: usize, name: &'static str, budget_s: u64, f: impl FnOnce() -> Outcome) -> Line {
    let t0 = Instant::now();
    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = t0.elapsed();
    let budget = Duration::from_secs(budget_s);
    let (pass, detail) = match r {
        Ok((p, d)) => (p, d),
        Err(e) => (false, vec![format!("error: {e}")]),
    };
    let line = Line {
        id,
        name,
        pass: pass && elapsed <= budget,
        detail,
        elapsed,
        budget,
    };
    print_line(&line);
    line
}

fn print_line(l: &Line) {
    let tag = if l.pass { "PASS" } else { "FAIL" };
    println!(
        "{tag} [{}] {} ({:.1}s, budget {}s)",
        l.id,
        l.name,
        l.elapsed.as_secs_f64(),
        l.budget.as_secs()
    );
    for d in &l.detail {
        println!("       {d}");
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn gaussian_marginal(d: usize) -> Marginal {
    build_marginal(&EquilibriumProfile::gaussian(d)).unwrap()
}

// 1. Hilbert, time-integral and Plemelj routes agree.
fn dispersion_routes() -> Outcome {
    let m = gaussian_marginal(3);
    let w = Potential::screened_coulomb();
    let ev = DispersionEvaluator::new(&m, &w);
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut notes = Vec::new();

    // interior: Hilbert vs time integral
    for _ in 0..60 {
        let k = 10f64.powf(rng.gen_range(-1.3..0.8));
        let l = Complex64::new(rng.gen_range(0.02..3.0), rng.gen_range(-6.0..6.0)) * k;
        let a = ev.hilbert_form(l, k).map_err(e2s)?.value;
        let b = ev.time_integral_form(l, k).map_err(e2s)?.value;
        worst = worst.max((a - b).norm());
        count += 1;
    }
    notes.push(format!("interior Hilbert vs time-integral: 60 samples, max diff {worst:.2e}"));

    // boundary: Plemelj vs time integral on the axis
    let mut worst_axis = 0.0f64;
    for _ in 0..20 {
        let k = 10f64.powf(rng.gen_range(-1.3..0.8));
        let tt = rng.gen_range(-5.0..5.0);
        let a = ev.plemelj(tt, k).map_err(e2s)?.value;
        let b = ev.time_integral_form(Complex64::new(0.0, tt * k), k).map_err(e2s)?.value;
        worst_axis = worst_axis.max((a - b).norm());
        count += 1;
    }
    notes.push(format!("axis Plemelj vs time-integral: 20 samples, max diff {worst_axis:.2e}"));

    // γ ↓ 0 ladder: all three routes along Re λ̃ = γ → 0
    let mut worst_ladder = 0.0f64;
    let mut limit_gap = 0.0f64;
    for &(tt, k) in &[(0.7, 0.5), (-1.9, 1.5), (2.6, 0.2), (0.1, 3.0)] {
        let p = ev.plemelj(tt, k).map_err(e2s)?.value;
        let mut prev = f64::INFINITY;
        for j in 1..=5 {
            let g = 10f64.powi(-2 * j);
            let l = Complex64::new(g, tt) * k;
            let a = ev.hilbert_form(l, k).map_err(e2s)?.value;
            let b = ev.time_integral_form(l, k).map_err(e2s)?.value;
            worst_ladder = worst_ladder.max((a - b).norm());
            let gap = (a - p).norm();
            if gap > prev * 1.01 + 1e-12 {
                notes.push(format!("ladder at τ̃={tt}, k={k}: gap to boundary grew at γ={g:.0e}"));
                limit_gap = f64::INFINITY;
            }
            prev = gap;
            count += 1;
        }
        limit_gap = limit_gap.max(prev);
    }
    notes.push(format!(
        "γ ladder 1e-2..1e-10: Hilbert vs time-integral max diff {worst_ladder:.2e}, last rung vs Plemelj {limit_gap:.2e}"
    ));
    notes.push(format!("{count} (λ, k) samples in total"));
    let pass = worst < 1e-6 && worst_axis < 1e-6 && worst_ladder < 1e-6 && limit_gap < 1e-6 && count >= 100;
    Ok((pass, notes))
}

// 2. Stability verdicts follow the criterion.
fn stability_verdicts() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let m = gaussian_marginal(3);
    let c = certify(&m, &Potential::screened_coulomb(), &ScanConfig::default()).map_err(e2s)?;
    let windings: Vec<i64> = c.winding_checks.iter().map(|w| w.winding).collect();
    let ok = matches!(c.verdict, Verdict::Stable { theta0 } if theta0 > 0.0) && windings.iter().all(|&w| w == 0);
    notes.push(format!("Gaussian d=3 + screened Coulomb: {:?}, windings {windings:?}", c.verdict));
    pass &= ok;

    let m3 = build_marginal(&EquilibriumProfile::fermi(3, 1.0)).map_err(e2s)?;
    let c3 = certify(&m3, &Potential::delta(0.1), &ScanConfig::default()).map_err(e2s)?;
    let ok = matches!(c3.verdict, Verdict::CriterionDiverges { .. });
    notes.push(format!("Fermi d=3: {:?}", c3.verdict));
    pass &= ok;

    let m5 = build_marginal(&EquilibriumProfile::fermi(5, 1.0)).map_err(e2s)?;
    let g_crit = 3.0 / (2.0 * PI * PI);
    for g in [0.9 * g_crit, 0.98 * g_crit, 1.02 * g_crit, 1.1 * g_crit] {
        let c = certify(&m5, &Potential::delta(g), &ScanConfig::default()).map_err(e2s)?;
        let stable = c.is_stable();
        let ok = stable == (g < g_crit);
        notes.push(format!("Fermi d=5, g = {g:.5} (g/g_c = {:.2}): stable = {stable}", g / g_crit));
        pass &= ok;
    }
    let c = certify(&m5, &Potential::delta(0.2), &ScanConfig::default()).map_err(e2s)?;
    match c.verdict {
        Verdict::Unstable { tau_tilde, k, modulus } => {
            notes.push(format!("Fermi d=5, g = 0.2: zero at τ̃ = {tau_tilde:.12}, k = {k:.3e}, |D̃| = {modulus:.2e}"));
            pass &= modulus < 1e-8;
        }
        other => {
            notes.push(format!("Fermi d=5, g = 0.2: expected Unstable, got {other:?}"));
            pass = false;
        }
    }
    // a zero at positive k as well
    let strong = Potential::delta(0.2);
    let ev = DispersionEvaluator::new(&m5, &strong);
    let k = 0.02;
    let t = find_imaginary_zero(&m5, &strong, k).map_err(e2s)?;
    let v = ev.d_tilde(Complex64::new(0.0, t), k).map_err(e2s)?.value.norm();
    notes.push(format!("Fermi d=5, g = 0.2, k = {k}: zero at τ̃ = {t:.12}, |D̃| = {v:.2e}"));
    pass &= v < 1e-8;
    Ok((pass, notes))
}

// 3. D̃(0, k) ≥ 1 and the real branch is real and even.
fn exact_properties() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let ks = log_grid(1e-3, 20.0, 60);
    let cases: Vec<(&str, Marginal, Potential)> = vec![
        ("Gaussian d=3 / screened Coulomb", gaussian_marginal(3), Potential::screened_coulomb()),
        (
            "Fermi d=5 / delta 0.1",
            build_marginal(&EquilibriumProfile::fermi(5, 1.0)).map_err(e2s)?,
            Potential::delta(0.1),
        ),
        (
            "smooth bump d=3 / Gaussian ŵ",
            build_marginal(
                &EquilibriumProfile::new(
                    ProfileKind::SmoothBump {
                        upsilon: 1.0,
                        smoothness: 3.0,
                    },
                    3,
                )
                .map_err(e2s)?,
            )
            .map_err(e2s)?,
            Potential::gaussian_hat(1.0),
        ),
    ];
    for (name, m, w) in &cases {
        let ev = DispersionEvaluator::new(m, w);
        let mut min_re = f64::INFINITY;
        let mut max_im = 0.0f64;
        for &k in &ks {
            let v = ev.d_tilde(Complex64::new(0.0, 0.0), k).map_err(e2s)?.value;
            min_re = min_re.min(v.re);
            max_im = max_im.max(v.im.abs());
        }
        let ok = min_re >= 1.0 && max_im < 1e-12;
        notes.push(format!("{name}: min D̃(0,k) = {min_re:.6}, max |Im| = {max_im:.1e} over {} k", ks.len()));
        pass &= ok;
        if m.upsilon.is_finite() {
            let mut worst_even = 0.0f64;
            let mut worst_im = 0.0f64;
            let mut n = 0;
            for &k in &[0.05, 0.3, 1.0, 4.0] {
                let edge = 2.0 * m.upsilon + k;
                for s in [1.0, 1.001, 1.2, 2.0, 7.0] {
                    let t = edge * s;
                    let a = ev.d_tilde(Complex64::new(0.0, t), k).map_err(e2s)?.value;
                    let b = ev.d_tilde(Complex64::new(0.0, -t), k).map_err(e2s)?.value;
                    worst_even = worst_even.max((a - b).norm());
                    worst_im = worst_im.max(a.im.abs()).max(b.im.abs());
                    n += 1;
                }
            }
            let ok = worst_even == 0.0 && worst_im == 0.0;
            notes.push(format!(
                "{name}: real branch {n} points, max |D̃(iτ̃) − D̃(−iτ̃)| = {worst_even:.1e}, max |Im| = {worst_im:.1e}"
            ));
            pass &= ok;
        }
    }
    Ok((pass, notes))
}

// 4. Green envelope decay.
fn green_decay() -> Outcome {
    let m = gaussian_marginal(3);
    let w = Potential::screened_coulomb();
    let c = certify(&m, &w, &ScanConfig::default()).map_err(e2s)?;
    let th = c.theta0().ok_or("not certified")?;
    let t_grid = uniform_grid(0.05, 100.0);
    let ladder = [5.0, 2.0, 1.0, 0.5, 0.2, 0.1, 0.05];
    let table = GreenTable::build(&m, &w, &ladder, &t_grid, th).map_err(e2s)?;
    let mut notes = Vec::new();
    let mut pass = true;
    let mut maxima = Vec::new();
    for (k, row) in ladder.iter().zip(&table.values) {
        let fit = envelope_fit(*k, &t_grid, row, (2.0, 100.0)).map_err(e2s)?;
        maxima.push(fit.max_abs);
        if [0.2, 1.0, 5.0].contains(k) {
            let ok = fit.fit.slope <= -3.0;
            notes.push(format!(
                "k = {k}: slope {:.3} (floor limited: {}), required ≤ −3: {}",
                fit.fit.slope,
                fit.floor_limited,
                if ok { "ok" } else { "no" }
            ));
            pass &= ok;
        }
    }
    // the |k|⟨kt⟩^{−N} bound governs k → 0; above k ≈ 1 the decay of ŵ(k) dominates
    let small: Vec<f64> = ladder.iter().zip(&maxima).filter(|p| *p.0 <= 1.0).map(|p| *p.1).collect();
    let mono_small = small.windows(2).all(|p| p[1] < p[0]);
    let mono_all = maxima.windows(2).all(|p| p[1] < p[0]);
    notes.push(format!(
        "max_t |G| for k = {ladder:?}: [{}]",
        maxima.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
    ));
    notes.push(format!("decreasing as k ↓ for k ≤ 1: {mono_small}; over the whole ladder: {mono_all}"));
    pass &= mono_small;
    Ok((pass, notes))
}

// 5. Free and linear sup-norm decay exponents, d = 3.
fn phase_mixing_exponents() -> Outcome {
    let d = 3;
    let m = gaussian_marginal(d);
    let w = Potential::screened_coulomb();
    let g0 = InitialKernel::gaussian(d, 1.0, 1.0);
    let meta = TrajectoryMeta {
        d,
        n1: 4.0,
        n2: 4.0,
    };
    let ks = log_grid(1e-4, 20.0, 160);
    let ts = uniform_grid(0.05, 100.0);
    let free = free_trajectory(&g0, &ks, &ts, meta).map_err(e2s)?;
    let lin = volterra_solve_with(&m, &w, &free, TimeRule::Gregory).map_err(e2s)?;
    let targets = [(-3.0, 0.3), (-4.0, 0.3), (-5.0, 0.4)];
    let mut notes = Vec::new();
    let mut pass = true;
    for (n, &(target, tol)) in targets.iter().enumerate() {
        let sf = fit_decay(&reconstruct_sup_norm(&free, n).map_err(e2s)?, (5.0, 50.0)).map_err(e2s)?.slope;
        let sl = fit_decay(&reconstruct_sup_norm(&lin, n).map_err(e2s)?, (5.0, 50.0)).map_err(e2s)?.slope;
        let ok_f = (sf - target).abs() <= tol;
        let ok_l = (sl - target).abs() <= tol;
        let ok_same = (sf - sl).abs() <= tol;
        notes.push(format!(
            "n = {n}: free {sf:.3}, linear {sl:.3}, target {target} ± {tol}: free {}, linear {}, free ≈ linear {}",
            ok_f, ok_l, ok_same
        ));
        pass &= ok_f && ok_l && ok_same;
    }
    Ok((pass, notes))
}

// 6. Volterra and Green routes agree.
fn two_solver_oracle() -> Outcome {
    let d = 3;
    let m = gaussian_marginal(d);
    let w = Potential::screened_coulomb();
    let th = certify(&m, &w, &ScanConfig::default())
        .map_err(e2s)?
        .theta0()
        .ok_or("not certified")?;
    let g0 = InitialKernel::gaussian(d, 1.0, 1.0);
    let meta = TrajectoryMeta {
        d,
        n1: 4.0,
        n2: 4.0,
    };
    let ks = log_grid(0.01, 10.0, 24);
    let ts = uniform_grid(0.0125, 40.0);
    let s = free_trajectory(&g0, &ks, &ts, meta).map_err(e2s)?;
    let a = volterra_solve_with(&m, &w, &s, TimeRule::Gregory).map_err(e2s)?;
    let g = GreenTable::build(&m, &w, &ks, &ts, th).map_err(e2s)?;
    let b = convolve_green_with(&g, &s, TimeRule::Gregory).map_err(e2s)?;
    let diff = a.max_diff(&b).map_err(e2s)?;
    let scale = s.sup_abs();
    let rel = diff / scale;
    Ok((
        rel < 1e-6,
        vec![
            format!("{} k × {} t nodes (dt = 0.0125, t ≤ 40), Gregory weights", ks.len(), ts.len()),
            format!("max |ρ_Volterra − ρ_Green| = {diff:.3e}, sup |S| = {scale:.3e}, ratio {rel:.3e} (required < 1e-6)"),
        ],
    ))
}

// 7. Nonlinear structural suite, d = 1.
fn nonlinear_suite() -> Outcome {
    let d = 1;
    let f = EquilibriumProfile::gaussian(d);
    let w = Potential::screened_coulomb();
    let cfg = NonlinearConfig::for_dimension(d);
    let eps = 1e-2;
    let base = InitialKernel::gaussian(d, 1.0, 0.25);
    let g0 = normalize_kernel(&base, eps, &cfg);
    let run = solve_selfconsistent(&g0, &f, &w, &cfg).map_err(e2s)?;
    let mut notes = Vec::new();
    let mut pass = true;

    let worst_factor = run.contraction_factors.iter().copied().fold(0.0, f64::max);
    let ok = run.converged && worst_factor < 0.5;
    notes.push(format!(
        "Picard: {} iterations, converged {}, contraction factors {:?}",
        run.iterations,
        run.converged,
        run.contraction_factors.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>()
    ));
    pass &= ok;

    // linear lattice solution through the generic Volterra marcher
    let state0 = KernelState::initial(&g0, cfg.lattice(d).map_err(e2s)?, run.state.t_grid.clone()).map_err(e2s)?;
    let grid = &state0.grid;
    let h = cfg.dt;
    let n_t = state0.t_grid.len();
    let free: Vec<Vec<Complex64>> = (0..n_t).map(|it| density_from_state(&state0, it)).collect();
    let mut worst_lin = 0.0f64;
    let mut max_imag_kernel = 0.0f64;
    for j in 0..grid.radial_len() {
        let kern = lattice_kernel(grid, &w, &f, j, &state0.t_grid);
        max_imag_kernel = max_imag_kernel.max(kern.iter().map(|z| z.im.abs()).fold(0.0, f64::max));
        let kre: Vec<f64> = kern.iter().map(|z| z.re).collect();
        let src: Vec<Complex64> = free.iter().map(|row| row[j]).collect();
        let lin = volterra_march(&kre, &src, h, cfg.rule).map_err(e2s)?;
        for (it, v) in lin.iter().enumerate() {
            worst_lin = worst_lin.max((run.density.rho_hat[j][it] - v).norm());
        }
    }
    let ok = worst_lin <= 10.0 * eps * eps;
    notes.push(format!(
        "max |ρ* − ρ_lin| = {worst_lin:.3e} (10ε² = {:.1e}); sup |ρ*| = {:.3e}; lattice kernel max |Im| = {max_imag_kernel:.1e}",
        10.0 * eps * eps,
        run.density.sup_abs()
    ));
    pass &= ok;

    let ok = run.hermitian_error <= 1e-10;
    notes.push(format!("Hermitian error {:.2e}", run.hermitian_error));
    pass &= ok;

    let run0 = solve_selfconsistent(&g0, &f, &Potential::zero(), &cfg).map_err(e2s)?;
    let hs = run0.state.hs_norms();
    let hs0 = hs[0].1;
    let drift = hs.iter().map(|p| (p.1 - hs0).abs()).fold(0.0, f64::max);
    let ok = drift == 0.0;
    notes.push(format!("ŵ = 0: HS norm {hs0:.6e}, max drift {drift:.1e}"));
    pass &= ok;

    let sc = scattering_diagnostic(&run.state, cfg.fit_window);
    notes.push(format!(
        "scattering on [{}, {}): decreasing {}, {} non-decreasing nodes, max relative rise {:.2e}, fit slope {}",
        cfg.fit_window.0,
        cfg.t_max,
        sc.decreasing,
        sc.increases,
        sc.max_relative_increase,
        sc.fit.map_or("n/a".into(), |f| format!("{:.3}", f.slope))
    ));
    pass &= sc.decreasing;

    let g_half = normalize_kernel(&base, eps / 2.0, &cfg);
    let run_half = solve_selfconsistent(&g_half, &f, &w, &cfg).map_err(e2s)?;
    let sc_half = scattering_diagnostic(&run_half.state, cfg.fit_window);
    let pick = |s: &[(f64, f64)]| s.iter().find(|p| p.0 >= cfg.fit_window.0).map(|p| p.1).unwrap_or(f64::NAN);
    let ratio = pick(&sc_half.distances) / pick(&sc.distances);
    notes.push(format!("ε-scaling: distance ratio at t = {} for ε/2 vs ε: {ratio:.3} (expected in [0.3, 0.7])", cfg.fit_window.0));
    pass &= (0.3..=0.7).contains(&ratio);
    Ok((pass, notes))
}

// 8. Marginal properties.
fn marginal_suite() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let profiles = vec![
        EquilibriumProfile::gaussian(3),
        EquilibriumProfile::fermi(5, 1.0),
        EquilibriumProfile::new(
            ProfileKind::SmoothBump {
                upsilon: 1.0,
                smoothness: 3.0,
            },
            3,
        )
        .map_err(e2s)?,
    ];
    for f in &profiles {
        let m = build_marginal(f).map_err(e2s)?;
        let l = if m.upsilon.is_finite() { m.upsilon } else { m.support_radius };
        let us: Vec<f64> = (1..400).map(|i| l * i as f64 / 400.0).collect();
        let even = us.iter().map(|&u| (m.phi(u) - m.phi(-u)).abs()).fold(0.0, f64::max);
        // φ′ < 0 while φ is above roundoff
        let tiny = 1e-13 * m.phi(0.0);
        let bad = us.iter().filter(|&&u| m.phi(u) > tiny && !(m.dphi(u) < 0.0)).count();
        let ok = even == 0.0 && bad == 0;
        notes.push(format!("{} d={}: evenness error {even:.1e}, points with φ′ ≥ 0: {bad}", f.name(), f.d));
        pass &= ok;
    }

    // Gaussian f(e) = e^{−e}: φ(u) = π^{(d−1)/2}e^{−u²}, φ̂(t) = π^{d/2}e^{−t²/4}
    for d in [1usize, 3, 5] {
        let m = gaussian_marginal(d);
        let mut e_phi = 0.0f64;
        let mut e_hat = 0.0f64;
        for i in 0..200 {
            let u = 4.0 * i as f64 / 200.0;
            e_phi = e_phi.max((m.phi(u) - PI.powf((d as f64 - 1.0) / 2.0) * (-u * u).exp()).abs());
            let t = 12.0 * i as f64 / 200.0;
            e_hat = e_hat.max((m.phi_hat(t) - PI.powf(d as f64 / 2.0) * (-t * t / 4.0).exp()).abs());
        }
        let ok = e_phi < 1e-10 && e_hat < 1e-10;
        notes.push(format!("Gaussian d={d}: max |φ − closed form| {e_phi:.1e}, max |φ̂ − closed form| {e_hat:.1e}"));
        pass &= ok;
    }

    // ‖g(·−k) − g(·+k)‖² / k², g(p) = f(|p|²/4); Gaussian closed form 2(2π)^{d/2}(1 − e^{−k²/2})
    let ladder = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0];
    for f in [&profiles[0], &profiles[2]] {
        let mut ratios = Vec::new();
        let mut worst_exact = 0.0f64;
        for &k in &ladder {
            let s = shifted_l2_difference(f, k).map_err(e2s)?;
            ratios.push(s.value / (k * k));
            if matches!(f.kind, ProfileKind::Gaussian { .. }) {
                let exact = 2.0 * (2.0 * PI).powf(f.d as f64 / 2.0) * (1.0 - (-k * k / 2.0f64).exp());
                worst_exact = worst_exact.max((s.value - exact).abs() / exact);
            }
        }
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let small_k_stable = (ratios[0] / ratios[1] - 1.0).abs() < 1e-2;
        let ok = hi.is_finite() && lo > 0.0 && small_k_stable && worst_exact < 1e-6;
        notes.push(format!(
            "{}: shifted-L² ratio over k ∈ {ladder:?} in [{lo:.4}, {hi:.4}]; ratio(1e−3)/ratio(1e−2) − 1 = {:.1e}{}",
            f.name(),
            ratios[0] / ratios[1] - 1.0,
            if matches!(f.kind, ProfileKind::Gaussian { .. }) {
                format!("; max rel. error vs closed form {worst_exact:.1e}")
            } else {
                String::new()
            }
        ));
        pass &= ok;
    }

    let m5 = build_marginal(&EquilibriumProfile::fermi(5, 1.0)).map_err(e2s)?;
    let ok = matches!(criterion_integral(&m5, &Potential::delta(0.1)).map_err(e2s)?, CriterionValue::Value { .. });
    pass &= ok;
    Ok((pass, notes))
}

fn main() {
    // `cargo test` passes harness flags such as `--quiet` or a filter; a
    // filter that names no criterion skips the suite
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    if let Some(f) = &filter {
        if !"acceptance".contains(f.as_str()) {
            return;
        }
    }
    println!("acceptance suite");
    let lines = vec![
        run(1, "cross-route dispersion agreement", 60, dispersion_routes),
        run(2, "stability iff criterion", 300, stability_verdicts),
        run(3, "D̃(0,k) ≥ 1, real branch real and even", 60, exact_properties),
        run(4, "Green envelope decay", 300, green_decay),
        run(5, "free/linear phase-mixing exponents", 300, phase_mixing_exponents),
        run(6, "Volterra vs Green two-solver oracle", 120, two_solver_oracle),
        run(7, "nonlinear structural suite", 900, nonlinear_suite),
        run(8, "marginal property suite", 60, marginal_suite),
    ];
    let failed: Vec<usize> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    println!(
        "acceptance: {} passed, {} failed {:?}",
        lines.len() - failed.len(),
        failed.len(),
        failed
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
