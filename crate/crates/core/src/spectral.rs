//! Spectral densities, damping kernels and the Matsubara coefficients that
//! encode the correlated thermal initial state.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{PhysicalParams, TimeGrid};
use crate::numerics::exp_divided_difference;
use crate::numerics::quad;
use crate::numerics::zeta::inverse_power_tail;

/// J_TB(ω) = m γ ω Ω²/(Ω² + ω²).
pub fn j_tb(omega: f64, p: &PhysicalParams) -> f64 {
    let c = p.omega_cut_tb;
    p.m * p.gamma_tb * omega * c * c / (c * c + omega * omega)
}

/// J_BB(ω) = M τ ω³ Ω²/(Ω² + ω²) with the renormalized mass M.
pub fn j_bb(omega: f64, p: &PhysicalParams) -> Result<f64> {
    if p.tau_bb * p.omega_cut_bb >= 1.0 {
        return Err(Error::Physics(vec![format!(
            "tauBB*OmegaCutBB = {} violates the causality bound",
            p.tau_bb * p.omega_cut_bb
        )]));
    }
    if p.tau_bb == 0.0 {
        return Ok(0.0);
    }
    let c = p.omega_cut_bb;
    let mass = p.m / (1.0 - p.tau_bb * c);
    Ok(mass * p.tau_bb * omega.powi(3) * c * c / (c * c + omega * omega))
}

/// Smooth part of a damping kernel, evaluated for s ≥ 0.
#[derive(Clone)]
pub enum SmoothKernel {
    /// Σ amplitude·e^{−rate·s}
    Exponentials(Vec<(f64, f64)>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for SmoothKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SmoothKernel::Exponentials(t) => f.debug_tuple("Exponentials").field(t).finish(),
            SmoothKernel::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// γ(s) = 2·local_coeff·δ(s) + smooth(|s|).
#[derive(Debug, Clone)]
pub struct DampingKernelSplit {
    pub local_coeff: f64,
    pub smooth: SmoothKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPart {
    Tb,
    Bb,
    Total,
}

impl DampingKernelSplit {
    pub fn zero() -> Self {
        DampingKernelSplit { local_coeff: 0.0, smooth: SmoothKernel::Exponentials(Vec::new()) }
    }

    /// Memoryless friction γ(s) = 2γδ(s).
    pub fn markovian(gamma: f64) -> Self {
        DampingKernelSplit { local_coeff: gamma, smooth: SmoothKernel::Exponentials(Vec::new()) }
    }

    pub fn drude(gamma: f64, cut: f64) -> Self {
        let terms = if gamma == 0.0 { Vec::new() } else { vec![(gamma * cut, cut)] };
        DampingKernelSplit { local_coeff: 0.0, smooth: SmoothKernel::Exponentials(terms) }
    }

    pub fn smooth(&self, s: f64) -> f64 {
        let s = s.abs();
        match &self.smooth {
            SmoothKernel::Exponentials(t) => t.iter().map(|(a, r)| a * (-r * s).exp()).sum(),
            SmoothKernel::Custom(f) => f(s),
        }
    }

    pub fn has_smooth(&self) -> bool {
        match &self.smooth {
            SmoothKernel::Exponentials(t) => !t.is_empty(),
            SmoothKernel::Custom(_) => true,
        }
    }

    /// Component-wise sum; custom parts are summed pointwise.
    pub fn add(&self, other: &DampingKernelSplit) -> DampingKernelSplit {
        let smooth = match (&self.smooth, &other.smooth) {
            (SmoothKernel::Exponentials(a), SmoothKernel::Exponentials(b)) => {
                SmoothKernel::Exponentials(a.iter().chain(b.iter()).copied().collect())
            }
            _ => {
                let (x, y) = (self.clone(), other.clone());
                SmoothKernel::Custom(Arc::new(move |s| x.smooth(s) + y.smooth(s)))
            }
        };
        DampingKernelSplit { local_coeff: self.local_coeff + other.local_coeff, smooth }
    }

    /// ∫₀^∞ of the smooth part (numerical, so it also serves custom kernels).
    pub fn smooth_integral(&self) -> f64 {
        quad::integrate_to_infinity(|s| self.smooth(s), 0.0, 1e-14, 1e-12).value
    }
}

/// Closed-form split of γ_TB, γ_BB or their sum.
pub fn gamma_kernel(which: KernelPart, p: &PhysicalParams) -> DampingKernelSplit {
    let tb = DampingKernelSplit::drude(p.gamma_tb, p.omega_cut_tb);
    let bb = if p.bb_active() {
        let c = p.omega_cut_bb;
        DampingKernelSplit {
            local_coeff: p.tau_bb * c * c,
            smooth: SmoothKernel::Exponentials(vec![(-p.tau_bb * c * c * c, c)]),
        }
    } else {
        DampingKernelSplit::zero()
    };
    match which {
        KernelPart::Tb => tb,
        KernelPart::Bb => bb,
        KernelPart::Total => tb.add(&bb),
    }
}

/// ζ(ν, s) for an arbitrary even kernel by quadrature of
/// ½ν∫₀^∞ γ(u)[e^{−ν|s+u|} + e^{−ν|s−u|}] du (local part included).
pub fn zeta_quadrature(split: &DampingKernelSplit, nu: f64, s: f64) -> f64 {
    let s = s.abs();
    let f = |u: f64| split.smooth(u) * ((-nu * (s + u)).exp() + (-nu * (s - u).abs()).exp());
    let smooth = if s > 0.0 {
        quad::integrate(f, 0.0, s, 1e-15, 1e-13).value + quad::integrate_to_infinity(f, s, 1e-15, 1e-13).value
    } else {
        quad::integrate_to_infinity(f, 0.0, 1e-15, 1e-13).value
    };
    0.5 * nu * smooth + split.local_coeff * nu * (-nu * s).exp()
}

/// Closed-form Drude Matsubara terms for ν ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrudeTerms {
    pub gamma: f64,
    pub cut: f64,
    pub omega0_sq: f64,
}

impl DrudeTerms {
    pub fn new(p: &PhysicalParams) -> Self {
        DrudeTerms { gamma: p.gamma_tb, cut: p.omega_cut_tb, omega0_sq: p.omega0 * p.omega0 }
    }

    pub fn gamma_s(&self, s: f64) -> f64 {
        self.gamma * self.cut * (-self.cut * s.abs()).exp()
    }

    pub fn zeta0(&self, nu: f64) -> f64 {
        self.gamma * self.cut * nu / (self.cut + nu)
    }

    pub fn u(&self, nu: f64) -> f64 {
        1.0 / (self.omega0_sq + nu * nu + self.zeta0(nu))
    }

    /// ζ(ν, s) = γΩν[e^{−ν|s|} + ν D(ν, Ω, |s|)]/(Ω + ν).
    pub fn zeta(&self, nu: f64, s: f64) -> f64 {
        let s = s.abs();
        let c = self.cut;
        self.gamma * c * nu * ((-nu * s).exp() + nu * exp_divided_difference(nu, c, s)) / (c + nu)
    }

    /// g(ν, s) = γ(s) − ζ(ν, s) = γΩ²[e^{−Ω|s|} − ν D(ν, Ω, |s|)]/(Ω + ν).
    pub fn g(&self, nu: f64, s: f64) -> f64 {
        let s = s.abs();
        let c = self.cut;
        self.gamma * c * c * ((-c * s).exp() - nu * exp_divided_difference(nu, c, s)) / (c + nu)
    }

    /// f(ν, s) = −ζ′(ν, s)/ν for ν > 0; odd in s.
    pub fn f(&self, nu: f64, s: f64) -> f64 {
        let c = self.cut;
        s.signum() * self.gamma * c * c * nu * exp_divided_difference(nu, c, s.abs()) / (c + nu)
    }
}

/// Number of Matsubara terms kept as sampled rows in [`MatsubaraTable`].
pub const STORED_TERMS: usize = 32;

/// Matsubara coefficients of the Drude bath at the bath temperature.
#[derive(Debug, Clone)]
pub struct MatsubaraTable {
    pub terms: DrudeTerms,
    pub hbar_beta: f64,
    pub nu: Vec<f64>,
    pub zeta0: Vec<f64>,
    pub u_n: Vec<f64>,
    pub u0: f64,
    /// ζₙ(s), gₙ(s), fₙ(s) on the grid for n = 0..=min(N, STORED_TERMS)
    pub zeta_s: Vec<Vec<f64>>,
    pub g_s: Vec<Vec<f64>>,
    pub f_s: Vec<Vec<f64>>,
    pub lambda_tb: f64,
    pub omega_eq: f64,
    pub n_terms: usize,
    pub tail_applied: bool,
    pub achieved_tol: f64,
    pub h: f64,
    pub n_grid: usize,
}

fn tail_sum(coeffs: &[(f64, f64)], n0: usize, a: f64) -> f64 {
    coeffs.iter().filter(|(_, c)| *c != 0.0).map(|&(pw, c)| c * inverse_power_tail(pw, n0, a)).sum()
}

/// (Λ, Ω_eq) truncated at N with optional analytic tails.
fn static_sums(t: &DrudeTerms, hbar_beta: f64, n: usize, tail: bool) -> (f64, f64) {
    let a = 2.0 * PI / hbar_beta;
    let mut lam = 0.0;
    let mut om = 0.0;
    for k in (1..=n).rev() {
        let nu = a * k as f64;
        let u = t.u(nu);
        lam += u;
        om += u * (t.omega0_sq + t.zeta0(nu));
    }
    if tail {
        let (g, c) = (t.gamma, t.cut);
        let cc = t.omega0_sq + g * c;
        lam += tail_sum(&[(2.0, 1.0), (4.0, -cc), (5.0, g * c * c), (6.0, cc * cc - g * c * c * c)], n, a);
        om += tail_sum(&[(2.0, cc), (3.0, -g * c * c), (4.0, g * c * c * c - cc * cc)], n, a);
    }
    let u0 = 1.0 / t.omega0_sq;
    ((u0 + 2.0 * lam) / hbar_beta, (u0 * t.omega0_sq + 2.0 * om) / hbar_beta)
}

impl MatsubaraTable {
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.hbar_beta
    }

    /// Λ_TB and Ω_eq recomputed at another truncation, for convergence checks.
    pub fn static_sums_at(&self, n: usize, tail: bool) -> (f64, f64) {
        static_sums(&self.terms, self.hbar_beta, n, tail)
    }
}

fn initial_terms(p: &PhysicalParams) -> usize {
    let a = p.matsubara_spacing();
    let need = 10.0 * p.omega_cut_tb.max(p.omega0);
    ((need / a).ceil() as usize).max(32)
}

/// Builds the table, doubling N until Λ_TB and Ω_eq change by less than `tol` (relative).
pub fn build_matsubara(p: &PhysicalParams, grid: &TimeGrid, tol: f64) -> Result<MatsubaraTable> {
    let t = DrudeTerms::new(p);
    let hb = p.hbar_beta();
    let mut n = initial_terms(p);
    let mut prev = static_sums(&t, hb, n, true);
    loop {
        let next = static_sums(&t, hb, 2 * n, true);
        let d = ((next.0 - prev.0) / next.0).abs().max(((next.1 - prev.1) / next.1).abs());
        if d < tol {
            let mut tab = build_matsubara_with_terms(p, grid, n);
            tab.achieved_tol = d;
            return Ok(tab);
        }
        if 2 * n > 100_000 {
            return Err(Error::NonConvergence { what: "Matsubara sum".into(), achieved: d, requested: tol });
        }
        n *= 2;
        prev = next;
    }
}

/// Builds the table with a fixed truncation N (tail correction on).
pub fn build_matsubara_with_terms(p: &PhysicalParams, grid: &TimeGrid, n_terms: usize) -> MatsubaraTable {
    let t = DrudeTerms::new(p);
    let hb = p.hbar_beta();
    let a = 2.0 * PI / hb;
    let nu: Vec<f64> = (1..=n_terms).map(|k| a * k as f64).collect();
    let zeta0: Vec<f64> = nu.iter().map(|&v| t.zeta0(v)).collect();
    let u_n: Vec<f64> = nu.iter().map(|&v| t.u(v)).collect();
    let (lambda_tb, omega_eq) = static_sums(&t, hb, n_terms, true);
    let times = grid.times();
    let stored = n_terms.min(STORED_TERMS);
    let mut zeta_s = Vec::with_capacity(stored + 1);
    let mut g_s = Vec::with_capacity(stored + 1);
    let mut f_s = Vec::with_capacity(stored + 1);
    for k in 0..=stored {
        let v = a * k as f64;
        zeta_s.push(times.iter().map(|&s| t.zeta(v, s)).collect());
        g_s.push(times.iter().map(|&s| t.g(v, s)).collect());
        f_s.push(times.iter().map(|&s| if k == 0 { 0.0 } else { t.f(v, s) }).collect());
    }
    MatsubaraTable {
        terms: t,
        hbar_beta: hb,
        nu,
        zeta0,
        u_n,
        u0: 1.0 / t.omega0_sq,
        zeta_s,
        g_s,
        f_s,
        lambda_tb,
        omega_eq,
        n_terms,
        tail_applied: true,
        achieved_tol: f64::NAN,
        h: grid.h(),
        n_grid: grid.n_steps,
    }
}

/// (⟨q²⟩_eq, ⟨p²⟩_eq) = ((ħ/m)Λ_TB, ħmΩ_eq).
pub fn equilibrium_moments(tab: &MatsubaraTable, p: &PhysicalParams) -> (f64, f64) {
    (p.hbar / p.m * tab.lambda_tb, p.hbar * p.m * tab.omega_eq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gamma: f64, cut: f64, beta: f64) -> PhysicalParams {
        PhysicalParams { gamma_tb: gamma, omega_cut_tb: cut, beta_tb: beta, ..Default::default() }
    }

    #[test]
    fn spectral_density_values() {
        let p = params(0.1, 10.0, 1.0);
        assert!((j_tb(1.0, &p) - 0.1 * 100.0 / 101.0).abs() < 1e-15);
        assert!((j_tb(10.0, &p) - 0.5).abs() < 1e-15);
        assert_eq!(j_tb(0.0, &p), 0.0);
        let q = PhysicalParams { tau_bb: 0.01, omega_cut_bb: 10.0, bb_enabled: true, ..Default::default() };
        let want = (1.0 / 0.9) * 0.01 * 100.0 / 101.0;
        assert!((j_bb(1.0, &q).unwrap() - want).abs() < 1e-15);
        let w = 1000.0;
        let slope = j_bb(w, &q).unwrap() / (q.renormalized_mass() * q.tau_bb * 100.0 * w);
        assert!((slope - 1.0).abs() < 0.01);
        let bad = PhysicalParams { tau_bb: 0.2, ..q };
        assert!(j_bb(1.0, &bad).is_err());
    }

    #[test]
    fn kernel_splits() {
        let p = PhysicalParams { tau_bb: 0.01, omega_cut_bb: 10.0, bb_enabled: true, ..params(0.1, 10.0, 1.0) };
        let tb = gamma_kernel(KernelPart::Tb, &p);
        assert_eq!(tb.local_coeff, 0.0);
        assert!((tb.smooth(0.0) - 1.0).abs() < 1e-15);
        let bb = gamma_kernel(KernelPart::Bb, &p);
        assert!((bb.local_coeff - 1.0).abs() < 1e-15);
        assert!((bb.smooth(0.0) + 10.0).abs() < 1e-12);
        let tot = gamma_kernel(KernelPart::Total, &p);
        assert!((tot.smooth(0.3) - tb.smooth(0.3) - bb.smooth(0.3)).abs() < 1e-15);
        assert!((tb.smooth_integral() - 0.1).abs() < 1e-10);
    }

    #[test]
    fn undamped_first_term() {
        let p = params(0.0, 10.0, 1.0);
        let t = DrudeTerms::new(&p);
        let nu1 = 2.0 * PI;
        assert!((t.u(nu1) - 1.0 / (1.0 + 4.0 * PI * PI)).abs() < 1e-15);
        assert_eq!(t.zeta(nu1, 0.4), 0.0);
    }

    #[test]
    fn zeta_first_matsubara_value() {
        let t = DrudeTerms::new(&params(0.1, 10.0, 1.0));
        let z = t.zeta0(2.0 * PI);
        assert!((z - 0.38590).abs() < 1e-4, "{z}");
    }

    #[test]
    fn degenerate_cutoff_limit() {
        let t = DrudeTerms::new(&params(0.1, 10.0, 1.0));
        let s = 0.37;
        let exact = 0.5 * 0.1 * 10.0 * (1.0 + 10.0 * s) * (-10.0 * s as f64).exp();
        assert!((t.zeta(10.0, s) - exact).abs() < 1e-14);
        assert!((t.zeta(10.0 + 1e-9, s) - exact).abs() < 1e-9);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let p = params(0.1, 10.0, 1.0);
        let t = DrudeTerms::new(&p);
        let split = gamma_kernel(KernelPart::Tb, &p);
        for &(nu, s) in &[(6.28, 0.0), (6.28, 0.2), (12.5, 1.3), (50.0, 0.05), (3.0, 2.0)] {
            let q = zeta_quadrature(&split, nu, s);
            assert!((q - t.zeta(nu, s)).abs() < 1e-10, "nu={nu} s={s}: {q} vs {}", t.zeta(nu, s));
        }
    }

    #[test]
    fn f_is_minus_derivative_over_nu() {
        let t = DrudeTerms::new(&params(0.2, 5.0, 1.0));
        let (nu, s, d) = (7.0, 0.4, 1e-5);
        let deriv = (t.zeta(nu, s + d) - t.zeta(nu, s - d)) / (2.0 * d);
        assert!((t.f(nu, s) + deriv / nu).abs() < 1e-8);
        assert_eq!(t.f(nu, 0.0), 0.0);
        assert!((t.f(nu, -s) + t.f(nu, s)).abs() < 1e-15);
    }

    #[test]
    fn undamped_lambda_is_coth() {
        let p = params(0.0, 10.0, 1.0);
        let g = TimeGrid::new(1.0, 10).unwrap();
        let tab = build_matsubara(&p, &g, 1e-10).unwrap();
        let want = 0.5 / (0.5f64).tanh();
        assert!((tab.lambda_tb - want).abs() < 1e-9, "{} vs {want}", tab.lambda_tb);
        assert!((tab.omega_eq - want).abs() < 1e-9);
    }

    #[test]
    fn tail_matches_long_direct_sum() {
        let p = params(0.1, 10.0, 1.0);
        let t = DrudeTerms::new(&p);
        let (l1, o1) = static_sums(&t, 1.0, 200, true);
        let (l2, o2) = static_sums(&t, 1.0, 400_000, true);
        assert!(((l1 - l2) / l2).abs() < 1e-11);
        assert!(((o1 - o2) / o2).abs() < 1e-9);
        let (l0, _) = static_sums(&t, 1.0, 200, false);
        assert!(((l0 - l2) / l2).abs() > 1e-5);
    }

    #[test]
    fn table_invariants() {
        let p = params(0.1, 10.0, 1.0);
        let g = TimeGrid::new(2.0, 200).unwrap();
        let tab = build_matsubara(&p, &g, 1e-10).unwrap();
        assert!(tab.u_n.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        assert!(tab.zeta0.windows(2).all(|w| w[1] > w[0] && w[1] < 1.0));
        let n = tab.n_terms;
        let x = tab.u_n[n - 1] * tab.nu[n - 1].powi(2);
        assert!((0.9..=1.0).contains(&x));
        for k in 1..tab.g_s.len() {
            assert!((tab.g_s[k][0] - (1.0 - tab.zeta0[k - 1])).abs() < 1e-14);
            assert_eq!(tab.f_s[k][0], 0.0);
        }
        assert!(tab.lambda_tb > 0.0 && tab.omega_eq > 0.0);
    }
}
