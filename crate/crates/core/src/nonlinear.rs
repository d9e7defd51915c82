//! Coarse-grid Picard iteration for the profile μ̂(t, k, p) = e^{it(|k|²−|p|²)}γ̂(t, k, p)
//! and the self-consistent density, with the X/Y/Z norm diagnostics and the
//! Hilbert–Schmidt scattering diagnostic.
//!
//! All momenta live on the lattice `h·ℤ^d` restricted to the box `[−ch, ch]^d`,
//! so shifts `k − ℓ` by lattice vectors stay on the lattice and the density is
//! sampled at `k = j·h·e₁`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{quadrature_weights, uniform_grid, uniform_step, DensityTrajectory, InitialKernel, TimeRule, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::pipeline::fit::{fit_decay, y_norm, DecayFit};
use crate::profiles::{EquilibriumProfile, Potential};

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);
const MAX_D: usize = 3;

/// Cartesian momentum lattice for one variable: `n_pts` odd nodes per axis on
/// `[−box_half_width, box_half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub d: usize,
    pub n_pts: usize,
    pub box_half_width: f64,
    pub h: f64,
}

impl Lattice {
    pub fn new(d: usize, n_pts: usize, box_half_width: f64) -> Result<Self> {
        if d == 0 || d > MAX_D {
            return Err(Error::InvalidInput(format!("nonlinear lattice supports 1 ≤ d ≤ {MAX_D}, got {d}")));
        }
        if n_pts < 3 || n_pts % 2 == 0 {
            return Err(Error::InvalidInput(format!("points per axis must be odd and ≥ 3, got {n_pts}")));
        }
        if !(box_half_width > 0.0) {
            return Err(Error::InvalidInput("box half-width must be positive".into()));
        }
        let c = (n_pts - 1) / 2;
        Ok(Lattice {
            d,
            n_pts,
            box_half_width,
            h: box_half_width / c as f64,
        })
    }

    /// Index of the origin along one axis; coordinates run over `−c..=c`.
    pub fn c(&self) -> i64 {
        ((self.n_pts - 1) / 2) as i64
    }

    /// Nodes per momentum variable, `n^d`.
    pub fn side(&self) -> usize {
        self.n_pts.pow(self.d as u32)
    }

    /// Nodes of the state `(k, p)`, `n^{2d}`.
    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest radial density node, `j = 2c`.
    pub fn radial_len(&self) -> usize {
        2 * self.c() as usize + 1
    }

    pub fn radial_grid(&self) -> Vec<f64> {
        (0..self.radial_len()).map(|j| j as f64 * self.h).collect()
    }

    /// Integer coordinates of a flat node index of one variable.
    pub fn decode(&self, mut f: usize) -> [i64; MAX_D] {
        let mut v = [0i64; MAX_D];
        let c = self.c();
        for x in v.iter_mut().take(self.d) {
            *x = (f % self.n_pts) as i64 - c;
            f /= self.n_pts;
        }
        v
    }

    pub fn encode(&self, v: &[i64; MAX_D]) -> Option<usize> {
        let c = self.c();
        let mut f = 0usize;
        let mut m = 1usize;
        for &x in v.iter().take(self.d) {
            if x < -c || x > c {
                return None;
            }
            f += (x + c) as usize * m;
            m *= self.n_pts;
        }
        Some(f)
    }

    /// Physical coordinates of a node of one variable.
    pub fn coords(&self, f: usize) -> Vec<f64> {
        self.decode(f).iter().take(self.d).map(|&x| x as f64 * self.h).collect()
    }
}

fn norm2(v: &[i64; MAX_D]) -> i64 {
    v.iter().map(|x| x * x).sum()
}

fn sub(a: &[i64; MAX_D], b: &[i64; MAX_D]) -> [i64; MAX_D] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: &[i64; MAX_D], b: &[i64; MAX_D]) -> [i64; MAX_D] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn dot(a: &[i64; MAX_D], b: &[i64; MAX_D]) -> i64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// μ̂(t, k, p) on the lattice, `mu_hat[it][kf · side + pf]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelState {
    pub grid: Lattice,
    pub d: usize,
    pub dt: f64,
    pub t_max: f64,
    pub t_grid: Vec<f64>,
    pub mu_hat: Vec<Vec<C>>,
}

impl KernelState {
    /// μ̂ ≡ γ̂₀ at every time node.
    pub fn initial(g0: &InitialKernel, grid: Lattice, t_grid: Vec<f64>) -> Result<Self> {
        if g0.d != grid.d {
            return Err(Error::GridMismatch(format!("kernel has d = {}, lattice d = {}", g0.d, grid.d)));
        }
        let dt = uniform_step(&t_grid)?;
        let side = grid.side();
        let row: Vec<C> = (0..grid.len())
            .into_par_iter()
            .map(|idx| g0.gamma0_hat(&grid.coords(idx / side), &grid.coords(idx % side)))
            .collect();
        Ok(KernelState {
            grid,
            d: grid.d,
            dt,
            t_max: *t_grid.last().expect("nonempty"),
            mu_hat: vec![row; t_grid.len()],
            t_grid,
        })
    }

    /// Discrete ‖μ(t)‖_HS = (2π)^{−d}(Σ h^{2d}|μ̂|²)^{1/2}.
    pub fn hs_norm(&self, it: usize) -> f64 {
        hs(&self.grid, &self.mu_hat[it])
    }

    pub fn hs_norms(&self) -> Vec<(f64, f64)> {
        self.t_grid.iter().enumerate().map(|(i, &t)| (t, self.hs_norm(i))).collect()
    }

    /// max |μ̂(t, k, p) − conj μ̂(t, −p, −k)| over all nodes.
    pub fn hermitian_error(&self) -> f64 {
        let g = &self.grid;
        let side = g.side();
        let neg = |v: [i64; MAX_D]| [-v[0], -v[1], -v[2]];
        self.mu_hat
            .par_iter()
            .map(|row| {
                let mut worst = 0.0f64;
                for kf in 0..side {
                    let k = g.decode(kf);
                    let pm = g.encode(&neg(k)).expect("box is symmetric");
                    for pf in 0..side {
                        let km = g.encode(&neg(g.decode(pf))).expect("box is symmetric");
                        worst = worst.max((row[kf * side + pf] - row[km * side + pm].conj()).norm());
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.mu_hat
            .iter()
            .flat_map(|r| r.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

fn hs(g: &Lattice, row: &[C]) -> f64 {
    let h2d = g.h.powi(2 * g.d as i32);
    (row.iter().map(|z| z.norm_sqr()).sum::<f64>() * h2d).sqrt() / (2.0 * PI).powi(g.d as i32)
}

/// Shifted arguments `k − ℓ`, `p − ℓ` that left the box; their contributions
/// are dropped (μ̂ = 0 outside). The size of a dropped term is estimated with
/// μ̂ at the nearest in-box node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Leakage {
    /// Dropped terms whose estimate exceeds 1e−12 of max|ŵρ̂| · max|μ̂|.
    pub dropped: usize,
    pub evaluated: usize,
    pub dropped_weight: f64,
    pub total_weight: f64,
}

impl Leakage {
    /// Estimated dropped share of `Σ|ŵ(ℓ)ρ̂(s, ℓ)μ̂|`.
    pub fn fraction(&self) -> f64 {
        if self.total_weight == 0.0 {
            0.0
        } else {
            self.dropped_weight / self.total_weight
        }
    }

    fn add(self, o: Leakage) -> Leakage {
        Leakage {
            dropped: self.dropped + o.dropped,
            evaluated: self.evaluated + o.evaluated,
            dropped_weight: self.dropped_weight + o.dropped_weight,
            total_weight: self.total_weight + o.total_weight,
        }
    }
}

/// ρ̂ on radial nodes `j·h` with local cubic interpolation, even in r;
/// `rows[j][it]`.
struct RadialRho<'a> {
    rows: Vec<&'a [C]>,
}

impl<'a> RadialRho<'a> {
    fn new(rho: &'a DensityTrajectory, g: &Lattice, n_t: usize) -> Result<Self> {
        if rho.t_grid.len() != n_t {
            return Err(Error::GridMismatch(format!(
                "density has {} time nodes, state has {n_t}",
                rho.t_grid.len()
            )));
        }
        let nodes = g.radial_grid();
        if rho.k_grid.len() != nodes.len() || rho.k_grid.iter().zip(&nodes).any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + b)) {
            return Err(Error::GridMismatch("density must live on the radial nodes j·h, j = 0..=2c".into()));
        }
        Ok(RadialRho {
            rows: rho.rho_hat.iter().map(|r| r.as_slice()).collect(),
        })
    }

    fn node(&self, j: i64, it: usize) -> C {
        let j = j.unsigned_abs() as usize;
        if j < self.rows.len() {
            self.rows[j][it]
        } else {
            ZERO
        }
    }

    /// ρ̂(t_it, x·h) for x ≥ 0 in lattice units.
    fn eval(&self, x: f64, it: usize) -> C {
        let j = x.floor();
        let frac = x - j;
        let j = j as i64;
        if frac < 1e-12 {
            return self.node(j, it);
        }
        if j >= self.rows.len() as i64 {
            return ZERO;
        }
        let mut acc = ZERO;
        for a in -1..=2i64 {
            let mut l = 1.0;
            for b in -1..=2i64 {
                if a != b {
                    l *= (frac - b as f64) / (a - b) as f64;
                }
            }
            acc += l * self.node(j + a, it);
        }
        acc
    }
}

/// The two Duhamel corrections, already multiplied by −i and integrated in time:
/// `μ̂ = γ̂₀ + linear + nonlinear`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuhamelParts {
    pub linear: Vec<Vec<C>>,
    pub nonlinear: Vec<Vec<C>>,
    pub leakage: Leakage,
}

/// `out[n] = h Σ_j w_j^{(n)} g[j]` for every n, with the weights of
/// [`quadrature_weights`].
pub fn cumulative_integral(g: &[Vec<C>], h: f64, rule: TimeRule) -> Vec<Vec<C>> {
    let n_t = g.len();
    if n_t == 0 {
        return vec![];
    }
    let m = g[0].len();
    let mut prefix = vec![ZERO; m];
    let mut out = Vec::with_capacity(n_t);
    for n in 0..n_t {
        prefix.iter_mut().zip(&g[n]).for_each(|(p, x)| *p += x);
        let row: Vec<C> = if rule == TimeRule::Gregory && n >= 5 {
            (0..m)
                .map(|i| {
                    h * (prefix[i] - 5.0 / 8.0 * (g[0][i] + g[n][i]) + (g[1][i] + g[n - 1][i]) / 6.0
                        - (g[2][i] + g[n - 2][i]) / 24.0)
                })
                .collect()
        } else if rule == TimeRule::Trapezoid && n >= 1 {
            (0..m).map(|i| h * (prefix[i] - 0.5 * (g[0][i] + g[n][i]))).collect()
        } else {
            let w = quadrature_weights(n, rule);
            (0..m)
                .map(|i| h * w.iter().enumerate().map(|(j, wj)| *wj * g[j][i]).sum::<C>())
                .collect()
        };
        out.push(row);
    }
    out
}

/// Both Duhamel corrections for the given μ̂ history and density.
pub fn duhamel_parts(state: &KernelState, rho: &DensityTrajectory, w: &Potential, f: &EquilibriumProfile, rule: TimeRule) -> Result<DuhamelParts> {
    parts_impl(state, rho, w, f, rule, true)
}

fn parts_impl(
    state: &KernelState,
    rho: &DensityTrajectory,
    w: &Potential,
    f: &EquilibriumProfile,
    rule: TimeRule,
    with_nonlinear: bool,
) -> Result<DuhamelParts> {
    let g = state.grid;
    let n_t = state.t_grid.len();
    let radial = RadialRho::new(rho, &g, n_t)?;
    let side = g.side();
    let h = g.h;
    let h2 = h * h;
    let hd = h.powi(g.d as i32);
    let c2 = 2 * g.c();

    // ℓ = q·h with |q_i| ≤ 2c: weights h^d ŵ(|ℓ|) ρ̂(s, |ℓ|)
    let mut qs: Vec<[i64; MAX_D]> = Vec::new();
    let span = (2 * c2 + 1) as usize;
    for f_ in 0..span.pow(g.d as u32) {
        let mut q = [0i64; MAX_D];
        let mut r = f_;
        for x in q.iter_mut().take(g.d) {
            *x = (r % span) as i64 - c2;
            r /= span;
        }
        qs.push(q);
    }
    let q_w: Vec<f64> = qs.iter().map(|q| w.w_hat(h * (norm2(q) as f64).sqrt())).collect();
    let weights: Vec<Vec<C>> = (0..n_t)
        .map(|it| {
            qs.iter()
                .zip(&q_w)
                .map(|(q, wq)| if *wq == 0.0 { ZERO } else { hd * wq * radial.eval((norm2(q) as f64).sqrt(), it) })
                .collect()
        })
        .collect();
    let w_max = weights.iter().flat_map(|r| r.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    let significant = 1e-12 * w_max * state.max_abs();
    let c = g.c();
    let clamp = |v: [i64; MAX_D]| -> usize {
        let mut out = [0i64; MAX_D];
        for i in 0..g.d {
            out[i] = v[i].clamp(-c, c);
        }
        g.encode(&out).expect("clamped into the box")
    };

    let f_of: Vec<f64> = (0..side).map(|pf| f.f(h2 * norm2(&g.decode(pf)) as f64)).collect();
    let decoded: Vec<[i64; MAX_D]> = (0..side).map(|i| g.decode(i)).collect();

    let mut lin_integrand = Vec::with_capacity(n_t);
    let mut nl_integrand = Vec::with_capacity(n_t);
    let mut leakage = Leakage::default();
    for (it, &s) in state.t_grid.iter().enumerate() {
        let mu = &state.mu_hat[it];
        let wts = &weights[it];
        let active: Vec<usize> = if with_nonlinear {
            (0..qs.len()).filter(|&i| wts[i] != ZERO).collect()
        } else {
            vec![]
        };
        let res: Vec<(C, C, Leakage)> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let (kf, pf) = (idx / side, idx % side);
                let k = &decoded[kf];
                let p = &decoded[pf];
                let kp = add(k, p);
                let kp_r = (norm2(&kp) as f64).sqrt();
                let wkp = w.w_hat(h * kp_r);
                let lin = if wkp == 0.0 {
                    ZERO
                } else {
                    let phase = C::from_polar(1.0, s * h2 * (norm2(k) - norm2(p)) as f64);
                    phase * wkp * radial.eval(kp_r, it) * (f_of[pf] - f_of[kf])
                };
                let mut nl = ZERO;
                let mut leak = Leakage::default();
                for &qi in &active {
                    let q = &qs[qi];
                    let wq = wts[qi];
                    leak.evaluated += 2;
                    let k2 = sub(k, q);
                    match g.encode(&k2) {
                        Some(kf2) => {
                            let v = mu[kf2 * side + pf];
                            let m = dot(q, &sub(&[2 * k[0], 2 * k[1], 2 * k[2]], q));
                            nl += wq * C::from_polar(1.0, s * h2 * m as f64) * v;
                            leak.total_weight += wq.norm() * v.norm();
                        }
                        None => {
                            let est = wq.norm() * mu[clamp(k2) * side + pf].norm();
                            leak.total_weight += est;
                            leak.dropped_weight += est;
                            if est > significant {
                                leak.dropped += 1;
                            }
                        }
                    }
                    let p2 = sub(p, q);
                    match g.encode(&p2) {
                        Some(pf2) => {
                            let v = mu[kf * side + pf2];
                            let m = dot(q, &sub(&[2 * p[0], 2 * p[1], 2 * p[2]], q));
                            nl -= wq * C::from_polar(1.0, -s * h2 * m as f64) * v;
                            leak.total_weight += wq.norm() * v.norm();
                        }
                        None => {
                            let est = wq.norm() * mu[kf * side + clamp(p2)].norm();
                            leak.total_weight += est;
                            leak.dropped_weight += est;
                            if est > significant {
                                leak.dropped += 1;
                            }
                        }
                    }
                }
                (lin, nl, leak)
            })
            .collect();
        let mut lin_row = Vec::with_capacity(res.len());
        let mut nl_row = Vec::with_capacity(res.len());
        for (a, b, l) in res {
            lin_row.push(a);
            nl_row.push(b);
            leakage = leakage.add(l);
        }
        lin_integrand.push(lin_row);
        nl_integrand.push(nl_row);
    }
    let mi = C::new(0.0, -1.0);
    let scale = |v: Vec<Vec<C>>| -> Vec<Vec<C>> { v.into_iter().map(|r| r.into_iter().map(|z| mi * z).collect()).collect() };
    Ok(DuhamelParts {
        linear: scale(cumulative_integral(&lin_integrand, state.dt, rule)),
        nonlinear: scale(cumulative_integral(&nl_integrand, state.dt, rule)),
        leakage,
    })
}

/// One Picard update `μ̂ ← γ̂₀ + 𝓡^L[ρ̂] + 𝓡^{NL}[ρ̂, μ̂]`.
pub fn picard_step(
    state: &KernelState,
    rho: &DensityTrajectory,
    g0: &InitialKernel,
    w: &Potential,
    f: &EquilibriumProfile,
    rule: TimeRule,
) -> Result<(KernelState, Leakage)> {
    let parts = duhamel_parts(state, rho, w, f, rule)?;
    let base = KernelState::initial(g0, state.grid, state.t_grid.clone())?;
    Ok((assemble(base, &parts), parts.leakage))
}

fn assemble(mut base: KernelState, parts: &DuhamelParts) -> KernelState {
    for ((row, l), n) in base.mu_hat.iter_mut().zip(&parts.linear).zip(&parts.nonlinear) {
        for ((z, a), b) in row.iter_mut().zip(l).zip(n) {
            *z += a + b;
        }
    }
    base
}

/// ρ̂(t, j·h·e₁) = Σ_p h^d e^{−it(|k−p|²−|p|²)} field(k − p, p) on the radial nodes.
fn density_of(g: &Lattice, t: f64, field: &[C]) -> Vec<C> {
    let side = g.side();
    let h2 = g.h * g.h;
    let hd = g.h.powi(g.d as i32);
    (0..g.radial_len())
        .map(|j| {
            let k = [j as i64, 0, 0];
            let mut acc = ZERO;
            for pf in 0..side {
                let p = g.decode(pf);
                if let Some(af) = g.encode(&sub(&k, &p)) {
                    let a = sub(&k, &p);
                    let phase = C::from_polar(1.0, -t * h2 * (norm2(&a) - norm2(&p)) as f64);
                    acc += phase * field[af * side + pf];
                }
            }
            hd * acc
        })
        .collect()
}

/// Density row at time node `it`, on [`Lattice::radial_grid`].
pub fn density_from_state(state: &KernelState, it: usize) -> Vec<C> {
    density_of(&state.grid, state.t_grid[it], &state.mu_hat[it])
}

fn fields_to_density(g: &Lattice, t_grid: &[f64], fields: &[Vec<C>], meta: TrajectoryMeta) -> DensityTrajectory {
    let rows: Vec<Vec<C>> = t_grid
        .par_iter()
        .zip(fields)
        .map(|(&t, f)| density_of(g, t, f))
        .collect();
    let mut out = DensityTrajectory::zeros(g.radial_grid(), t_grid.to_vec(), meta);
    for (it, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out.rho_hat[j][it] = *v;
        }
    }
    out
}

/// Full density trajectory of a state.
pub fn density_trajectory(state: &KernelState, meta: TrajectoryMeta) -> DensityTrajectory {
    fields_to_density(&state.grid, &state.t_grid, &state.mu_hat, meta)
}

/// Lattice form of the Volterra kernel, `K(τ, jh) = iŵ Σ_p h^d e^{−iτ(|k−p|²−|p|²)}(f(|p|²) − f(|k−p|²))`,
/// so that the density of the linear Duhamel term is exactly `−K ⊛ ρ̂`.
pub fn lattice_kernel(g: &Lattice, w: &Potential, f: &EquilibriumProfile, j: usize, tau: &[f64]) -> Vec<C> {
    let side = g.side();
    let h2 = g.h * g.h;
    let hd = g.h.powi(g.d as i32);
    let wk = w.w_hat(j as f64 * g.h);
    let k = [j as i64, 0, 0];
    let terms: Vec<(f64, f64)> = (0..side)
        .filter_map(|pf| {
            let p = g.decode(pf);
            let a = sub(&k, &p);
            g.encode(&a)?;
            let phi = (norm2(&a) - norm2(&p)) as f64 * h2;
            Some((phi, f.f(h2 * norm2(&p) as f64) - f.f(h2 * norm2(&a) as f64)))
        })
        .collect();
    tau.iter()
        .map(|&t| {
            let s: C = terms.iter().map(|(phi, df)| C::from_polar(*df, -t * phi)).sum();
            C::new(0.0, wk * hd) * s
        })
        .collect()
}

/// `ρ_n + h Σ_m w_m^{(n)} K(t_n − t_m) ρ_m = S_n` with the plain quadrature weights
/// used by the Picard time integral.
fn lattice_volterra(kern: &[C], source: &[C], h: f64, rule: TimeRule) -> Vec<C> {
    let n_t = source.len();
    let mut rho = vec![ZERO; n_t];
    for n in 0..n_t {
        let wts = quadrature_weights(n, rule);
        let mut acc = ZERO;
        for m in 0..n {
            acc += wts[m] * kern[n - m] * rho[m];
        }
        rho[n] = (source[n] - h * acc) / (1.0 + h * wts[n] * kern[0]);
    }
    rho
}

fn solve_linear_lattice(kernels: &[Vec<C>], source: &DensityTrajectory, h: f64, rule: TimeRule) -> DensityTrajectory {
    let mut out = source.clone();
    out.rho_hat = kernels
        .par_iter()
        .zip(&source.rho_hat)
        .map(|(k, s)| lattice_volterra(k, s, h, rule))
        .collect();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NonlinearConfig {
    pub n_pts: usize,
    pub box_half_width: f64,
    pub dt: f64,
    pub t_max: f64,
    /// Stop when the Y distance of successive densities falls below `tol · Y(ρ̂)`.
    pub tol: f64,
    pub max_iter: usize,
    pub n1: f64,
    pub n2: f64,
    pub delta: f64,
    pub rule: TimeRule,
    /// Refuse to start when the ε surrogate of γ₀ exceeds this.
    pub eps_max: f64,
    /// Fail with `GridShiftOutOfBox` when the leakage fraction exceeds this.
    pub leakage_limit: f64,
    pub fit_window: (f64, f64),
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        NonlinearConfig {
            n_pts: 33,
            box_half_width: 5.0,
            dt: 0.1,
            t_max: 30.0,
            tol: 1e-10,
            max_iter: 30,
            n1: 2.0,
            n2: 2.0,
            delta: 0.1,
            rule: TimeRule::Gregory,
            eps_max: 0.1,
            leakage_limit: 1.0,
            fit_window: (5.0, 50.0),
        }
    }
}

impl NonlinearConfig {
    /// Defaults with `N₁ = N₂ = d + 1`.
    pub fn for_dimension(d: usize) -> Self {
        NonlinearConfig {
            n1: d as f64 + 1.0,
            n2: d as f64 + 1.0,
            ..Default::default()
        }
    }

    pub fn lattice(&self, d: usize) -> Result<Lattice> {
        Lattice::new(d, self.n_pts, self.box_half_width)
    }
}

/// γ₀ rescaled so that its ε surrogate on the lattice equals `eps`.
pub fn normalize_kernel(g0: &InitialKernel, eps: f64, cfg: &NonlinearConfig) -> InitialKernel {
    let now = g0.epsilon_surrogate(cfg.n2, cfg.box_half_width, cfg.n_pts);
    if now == 0.0 {
        g0.clone()
    } else {
        g0.scaled(eps / now)
    }
}

/// Weighted sup norms of μ̂ and ρ̂ per time node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTracker {
    pub t: Vec<f64>,
    /// `Σ_{|α| = o} ‖⟨k,p⟩^{N₂}(∂_k − ∂_p)^α μ̂(t)‖_∞` for o = 0, 1, 2 at each node.
    pub x_terms: Vec<[f64; 3]>,
    /// `X_t^N` for N = 0, 1, 2: running sup over `[0, t]` of the partial sums.
    pub x_norms: Vec<[f64; 3]>,
    /// `Y_t`, running sup of `⟨kt⟩^{N₁}⟨k⟩^{N₂}|ρ̂ₖ|`.
    pub y_norm: Vec<f64>,
    /// `Z_t`; needs `X^{N₁}`, so only reported for N₁ = 2.
    pub z_norm: Option<Vec<f64>>,
    pub n1: f64,
    pub n2: f64,
    pub delta: f64,
}

type Field = Vec<Option<C>>;

fn diag_first(g: &Lattice, f: &Field, axis: usize) -> Field {
    let side = g.side();
    (0..g.len())
        .map(|idx| {
            let (k, p) = (g.decode(idx / side), g.decode(idx % side));
            let mut e = [0i64; MAX_D];
            e[axis] = 1;
            let plus = g.encode(&add(&k, &e)).zip(g.encode(&sub(&p, &e)))?;
            let minus = g.encode(&sub(&k, &e)).zip(g.encode(&add(&p, &e)))?;
            let a = f[plus.0 * side + plus.1]?;
            let b = f[minus.0 * side + minus.1]?;
            Some((a - b) / (2.0 * g.h))
        })
        .collect()
}

fn diag_second(g: &Lattice, f: &Field, axis: usize) -> Field {
    let side = g.side();
    (0..g.len())
        .map(|idx| {
            let (k, p) = (g.decode(idx / side), g.decode(idx % side));
            let mut e = [0i64; MAX_D];
            e[axis] = 1;
            let plus = g.encode(&add(&k, &e)).zip(g.encode(&sub(&p, &e)))?;
            let minus = g.encode(&sub(&k, &e)).zip(g.encode(&add(&p, &e)))?;
            let a = f[plus.0 * side + plus.1]?;
            let b = f[minus.0 * side + minus.1]?;
            Some((a - 2.0 * f[idx]? + b) / (g.h * g.h))
        })
        .collect()
}

fn weighted_sup(g: &Lattice, f: &Field, n2: f64) -> f64 {
    let side = g.side();
    let h2 = g.h * g.h;
    f.iter()
        .enumerate()
        .filter_map(|(idx, v)| {
            let v = (*v)?;
            let r2 = h2 * (norm2(&g.decode(idx / side)) + norm2(&g.decode(idx % side))) as f64;
            Some((1.0 + r2).powf(n2 / 2.0) * v.norm())
        })
        .fold(0.0, f64::max)
}

/// Derivatives along the `(e_i, −e_i)` diagonals by centered differences,
/// orders up to two (mixed second orders by composition).
fn x_terms_at(g: &Lattice, row: &[C], n2: f64) -> [f64; 3] {
    let f0: Field = row.iter().map(|z| Some(*z)).collect();
    let mut out = [weighted_sup(g, &f0, n2), 0.0, 0.0];
    let firsts: Vec<Field> = (0..g.d).map(|i| diag_first(g, &f0, i)).collect();
    for (i, fi) in firsts.iter().enumerate() {
        out[1] += weighted_sup(g, fi, n2);
        out[2] += weighted_sup(g, &diag_second(g, &f0, i), n2);
        for j in (i + 1)..g.d {
            // α = e_i + e_j appears once as a multi-index
            out[2] += weighted_sup(g, &diag_first(g, fi, j), n2);
        }
    }
    out
}

impl NormTracker {
    pub fn compute(state: &KernelState, rho: &DensityTrajectory, n1: f64, n2: f64, delta: f64) -> NormTracker {
        let g = &state.grid;
        let x_terms: Vec<[f64; 3]> = state.mu_hat.par_iter().map(|row| x_terms_at(g, row, n2)).collect();
        let mut x_norms = Vec::with_capacity(x_terms.len());
        let mut run = [0.0f64; 3];
        for xt in &x_terms {
            let mut partial = 0.0;
            for o in 0..3 {
                partial += xt[o];
                run[o] = run[o].max(partial);
            }
            x_norms.push(run);
        }
        let mut y_norm = Vec::with_capacity(state.t_grid.len());
        let mut y_run = 0.0f64;
        for (it, &t) in state.t_grid.iter().enumerate() {
            for (k, row) in rho.k_grid.iter().zip(&rho.rho_hat) {
                let kt = k * t;
                let v = (1.0 + kt * kt).powf(n1 / 2.0) * (1.0 + k * k).powf(n2 / 2.0) * row[it].norm();
                y_run = y_run.max(v);
            }
            y_norm.push(y_run);
        }
        let z_norm = (n1 == 2.0).then(|| {
            let mut run = 0.0f64;
            state
                .t_grid
                .iter()
                .zip(&x_norms)
                .map(|(&t, x)| {
                    let jt = (1.0 + t * t).sqrt();
                    run = run.max(x[0] + jt.powf(-delta) * x[1] + x[2] / jt);
                    run
                })
                .collect()
        });
        NormTracker {
            t: state.t_grid.clone(),
            x_terms,
            x_norms,
            y_norm,
            z_norm,
            n1,
            n2,
            delta,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfConsistentRun {
    pub state: KernelState,
    pub density: DensityTrajectory,
    pub norms: NormTracker,
    pub iterations: usize,
    pub converged: bool,
    /// Y distances between successive densities.
    pub distances: Vec<f64>,
    pub contraction_factors: Vec<f64>,
    pub leakage: Leakage,
    pub epsilon: f64,
    /// max |density_from_state(μ̂) − ρ̂| for the returned pair.
    pub consistency_residual: f64,
    pub hermitian_error: f64,
}

fn diff(a: &DensityTrajectory, b: &DensityTrajectory) -> DensityTrajectory {
    let mut out = a.clone();
    for (ra, rb) in out.rho_hat.iter_mut().zip(&b.rho_hat) {
        ra.iter_mut().zip(rb).for_each(|(x, y)| *x -= y);
    }
    out
}

fn add_traj(a: &DensityTrajectory, b: &DensityTrajectory) -> DensityTrajectory {
    let mut out = a.clone();
    for (ra, rb) in out.rho_hat.iter_mut().zip(&b.rho_hat) {
        ra.iter_mut().zip(rb).for_each(|(x, y)| *x += y);
    }
    out
}

/// Picard iteration on the nonlinear term with the linear response inverted
/// exactly on the lattice: `ρ̂ₙ₊₁ = (1 + K⊛)^{−1}(ρ̂⁰ + ρ̂^{NL}[ρ̂ₙ, μ̂ₙ])`,
/// `μ̂ₙ₊₁ = γ̂₀ + 𝓡^L[ρ̂ₙ₊₁] + 𝓡^{NL}[ρ̂ₙ, μ̂ₙ]`.
pub fn solve_selfconsistent(g0: &InitialKernel, f: &EquilibriumProfile, w: &Potential, cfg: &NonlinearConfig) -> Result<SelfConsistentRun> {
    let d = g0.d;
    let grid = cfg.lattice(d)?;
    let epsilon = g0.epsilon_surrogate(cfg.n2, cfg.box_half_width, cfg.n_pts);
    if epsilon > cfg.eps_max {
        return Err(Error::InvalidInput(format!(
            "ε surrogate {epsilon:.3e} exceeds the threshold {:.3e}",
            cfg.eps_max
        )));
    }
    if d >= 3 {
        log::warn!(
            "nonlinear run in d = {d} with {} points per axis: {} state nodes per time step, expect long runtimes",
            cfg.n_pts,
            grid.len()
        );
    }
    if cfg.t_max > PI / (grid.h * grid.h) {
        log::warn!(
            "t_max = {} exceeds the lattice recurrence time π/h² = {:.2}",
            cfg.t_max,
            PI / (grid.h * grid.h)
        );
    }
    let meta = TrajectoryMeta { d, n1: cfg.n1, n2: cfg.n2 };
    let t_grid = uniform_grid(cfg.dt, cfg.t_max);
    let h = uniform_step(&t_grid)?;
    let base = KernelState::initial(g0, grid, t_grid.clone())?;
    let rho_free = density_trajectory(&base, meta);
    let kernels: Vec<Vec<C>> = (0..grid.radial_len())
        .into_par_iter()
        .map(|j| lattice_kernel(&grid, w, f, j, &t_grid))
        .collect();

    let with_linear = |rho: &DensityTrajectory, nonlinear: &[Vec<C>]| -> Result<KernelState> {
        let lin = parts_impl(&base, rho, w, f, cfg.rule, false)?;
        Ok(assemble(
            base.clone(),
            &DuhamelParts {
                nonlinear: nonlinear.to_vec(),
                ..lin
            },
        ))
    };
    // start from the linear solution and its profile γ̂₀ + 𝓡^L[ρ̂]
    let mut rho = solve_linear_lattice(&kernels, &rho_free, h, cfg.rule);
    let mut state = with_linear(&rho, &vec![vec![ZERO; grid.len()]; t_grid.len()])?;
    let mut distances = Vec::new();
    let mut factors = Vec::new();
    let mut leakage = Leakage::default();
    let mut converged = false;
    let mut iterations = 0;
    let mut slow = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let parts = duhamel_parts(&state, &rho, w, f, cfg.rule)?;
        leakage = parts.leakage;
        if leakage.fraction() > cfg.leakage_limit {
            return Err(Error::GridShiftOutOfBox {
                dropped: leakage.dropped,
                evaluated: leakage.evaluated,
            });
        }
        let nl = fields_to_density(&grid, &t_grid, &parts.nonlinear, meta);
        let rho_next = solve_linear_lattice(&kernels, &add_traj(&rho_free, &nl), h, cfg.rule);
        state = with_linear(&rho_next, &parts.nonlinear)?;
        let dist = y_norm(&diff(&rho_next, &rho), cfg.n1, cfg.n2);
        let scale = y_norm(&rho_next, cfg.n1, cfg.n2);
        if let Some(&prev) = distances.last() {
            let r = if prev > 0.0 { dist / prev } else { 0.0 };
            factors.push(r);
            slow = if r >= 0.9 { slow + 1 } else { 0 };
        }
        distances.push(dist);
        rho = rho_next;
        log::debug!("picard iteration {iterations}: distance {dist:.3e}");
        if dist <= cfg.tol * scale || dist == 0.0 {
            converged = true;
            break;
        }
        if slow >= 3 {
            return Err(Error::NoContraction { distances });
        }
    }
    // pair the returned profile with the final density
    let (final_state, _) = picard_step(&state, &rho, g0, w, f, cfg.rule)?;
    let check = density_trajectory(&final_state, meta);
    let consistency_residual = check.max_diff(&rho)?;
    let norms = NormTracker::compute(&final_state, &rho, cfg.n1, cfg.n2, cfg.delta);
    let hermitian_error = final_state.hermitian_error();
    Ok(SelfConsistentRun {
        state: final_state,
        density: rho,
        norms,
        iterations,
        converged,
        distances,
        contraction_factors: factors,
        leakage,
        epsilon,
        consistency_residual,
        hermitian_error,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScatteringDiagnostic {
    /// `(t, ‖μ(t) − μ(t_max)‖_HS)`.
    pub distances: Vec<(f64, f64)>,
    pub fit: Option<DecayFit>,
    /// Distances strictly decrease across the fit window.
    pub decreasing: bool,
    /// Nodes in the window where the distance did not decrease.
    pub increases: usize,
    pub max_relative_increase: f64,
}

/// Distances to the final profile; the final node (distance 0) is left out of
/// the fit and of the monotonicity check.
pub fn scattering_diagnostic(state: &KernelState, window: (f64, f64)) -> ScatteringDiagnostic {
    let last = state.mu_hat.last().expect("nonempty");
    let distances: Vec<(f64, f64)> = state
        .t_grid
        .par_iter()
        .zip(&state.mu_hat)
        .map(|(&t, row)| {
            let dv: Vec<C> = row.iter().zip(last).map(|(a, b)| a - b).collect();
            (t, hs(&state.grid, &dv))
        })
        .collect();
    let body = &distances[..distances.len() - 1];
    let inside: Vec<&(f64, f64)> = body.iter().filter(|p| p.0 >= window.0 && p.0 <= window.1).collect();
    let increases = inside.windows(2).filter(|w| w[1].1 >= w[0].1).count();
    let max_relative_increase = inside
        .windows(2)
        .map(|w| w[1].1 / w[0].1 - 1.0)
        .filter(|r| r.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    ScatteringDiagnostic {
        fit: fit_decay(body, window).ok(),
        decreasing: inside.len() >= 2 && increases == 0,
        increases,
        max_relative_increase,
        distances,
    }
}
