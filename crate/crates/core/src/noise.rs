//! Real-time noise kernels, the initial-correlation functions C₁, C₂ and the
//! two-time noise matrix R(s, u).
//!
//! Kernels entering R are grid-filtered: each sample is the average of the
//! kernel against the cubic B-spline of support 4h centred on the lag (the
//! autocorrelation of two hats). In frequency space this multiplies the
//! spectrum by sinc⁴(ωh/2). With that filter the two-dimensional trapezoidal
//! rule over R is exact for piecewise-linear integrands, and the logarithmic
//! s = 0 singularity of the zero-point part is removed.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{InitialState, PhysicalParams, TimeGrid};
use crate::numerics::quad::gk21_nodes;
use crate::numerics::zeta::inverse_power_tail;
use crate::spectral::{gamma_kernel, j_bb, DrudeTerms, KernelPart, MatsubaraTable};

/// Summation continues until e^{−νs} drops below e^{−EXP_CUT}.
const EXP_CUT: f64 = 40.0;

fn tail(coeffs: &[(f64, f64)], n0: usize, a: f64) -> f64 {
    coeffs.iter().filter(|c| c.1 != 0.0).map(|&(p, c)| c * inverse_power_tail(p, n0, a)).sum()
}

fn terms_for(s: f64, a: f64, n: usize) -> usize {
    if s <= 0.0 {
        return n;
    }
    n.max((EXP_CUT / (a * s)).ceil() as usize).min(20_000_000)
}

/// Pointwise K_TB^re(s) = (m/ħβ)Σ_n gₙ(s). Diverges logarithmically at s = 0.
pub fn k_tb_re(s: f64, tab: &MatsubaraTable, p: &PhysicalParams) -> f64 {
    let s = s.abs();
    let t = &tab.terms;
    if t.gamma == 0.0 {
        return 0.0;
    }
    if s == 0.0 {
        return f64::INFINITY;
    }
    let a = tab.spacing();
    let n = terms_for(s, a, tab.n_terms);
    let mut sum = 0.0;
    for k in (1..=n).rev() {
        sum += t.g(a * k as f64, s);
    }
    let c = t.cut;
    let e = (-c * s).exp();
    sum += tail(&[(2.0, -t.gamma * c.powi(3) * e), (4.0, -t.gamma * c.powi(5) * e)], n, a);
    p.m / tab.hbar_beta * (t.gamma_s(s) + 2.0 * sum)
}

fn phi4(y: f64) -> f64 {
    (-y).exp() - 1.0 + y - y * y / 2.0 + y * y * y / 6.0
}

/// Σ_{n≥4} (−1)ⁿ yⁿ⁻⁴ cₙ/n! with cₙ from `coef`.
fn alt_series(y: f64, coef: impl Fn(i32) -> f64) -> f64 {
    let mut fact = 24.0;
    let mut pw = 1.0;
    let mut sum = 0.0;
    for n in 4..80 {
        if n > 4 {
            fact *= n as f64;
            pw *= -y;
        }
        let term = pw * coef(n) / fact;
        sum += term;
        if n > 8 && term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Average of e^{−a|x|} against the cubic B-spline of support [kh − 2h, kh + 2h].
pub fn spline_exp(a: f64, k: usize, h: f64) -> f64 {
    let y = a * h;
    match k {
        0 if y < 1.0 => alt_series(y, |n| 2f64.powi(n + 1) - 8.0),
        0 => (2.0 * phi4(2.0 * y) - 8.0 * phi4(y)) / y.powi(4),
        1 if y < 1.0 => alt_series(y, |n| 7.0 - 4.0 * 2f64.powi(n) + 3f64.powi(n)),
        1 => (7.0 * phi4(y) - 4.0 * phi4(2.0 * y) + phi4(3.0 * y)) / y.powi(4),
        _ => {
            let r = if y < 1e-8 { 1.0 - 0.5 * y } else { -(-y).exp_m1() / y };
            (-((k - 2) as f64) * y).exp() * r.powi(4)
        }
    }
}

/// [ν·E(ν) − Ω·E(Ω)]/(ν² − Ω²) with the coincident limit.
fn spline_g_ratio(nu: f64, c: f64, k: usize, h: f64) -> f64 {
    if (nu - c).abs() > 1e-6 * c {
        (nu * spline_exp(nu, k, h) - c * spline_exp(c, k, h)) / (nu * nu - c * c)
    } else {
        let d = 1e-4 * c;
        let deriv = ((c + d) * spline_exp(c + d, k, h) - (c - d) * spline_exp(c - d, k, h)) / (2.0 * d);
        deriv / (2.0 * c)
    }
}

/// Large-ν expansion of the summand, as (power of 1/ν, coefficient) pairs.
fn spline_tail(c: f64, e: f64, k: usize, h: f64) -> Vec<(f64, f64)> {
    let (c2, c4) = (c * c, c.powi(4));
    let h2 = h * h;
    let h3 = h2 * h;
    let h4 = h2 * h2;
    match k {
        0 => {
            let a = 4.0 / (3.0 * h) - c * e;
            vec![(2.0, a), (4.0, a * c2 - 4.0 / h3), (5.0, 6.0 / h4), (6.0, a * c4 - 4.0 * c2 / h3), (7.0, 6.0 * c2 / h4)]
        }
        1 => {
            let a = 1.0 / (3.0 * h) - c * e;
            vec![(2.0, a), (4.0, a * c2 + 2.0 / h3), (5.0, -4.0 / h4), (6.0, a * c4 + 2.0 * c2 / h3), (7.0, -4.0 * c2 / h4)]
        }
        2 => {
            let a = -c * e;
            vec![(2.0, a), (4.0, a * c2), (5.0, 1.0 / h4), (6.0, a * c4), (7.0, c2 / h4)]
        }
        _ => {
            let a = -c * e;
            vec![(2.0, a), (4.0, a * c2), (6.0, a * c4)]
        }
    }
}

/// B-spline-filtered K_TB^re on lags 0..=n_lags.
pub fn k_tb_grid_samples(tab: &MatsubaraTable, p: &PhysicalParams, h: f64, n_lags: usize) -> Vec<f64> {
    let t = tab.terms;
    if t.gamma == 0.0 {
        return vec![0.0; n_lags + 1];
    }
    let a = tab.spacing();
    let (g, c) = (t.gamma, t.cut);
    let pref = p.m / tab.hbar_beta;
    (0..=n_lags)
        .into_par_iter()
        .map(|k| {
            let n = terms_for(k.saturating_sub(2).max(1) as f64 * h, a, tab.n_terms);
            let mut sum = 0.0;
            for j in (1..=n).rev() {
                sum += spline_g_ratio(a * j as f64, c, k, h);
            }
            let e = spline_exp(c, k, h);
            sum += tail(&spline_tail(c, e, k, h), n, a);
            pref * (g * c * e + 2.0 * g * c * c * sum)
        })
        .collect()
}

/// How the divergent zero-point part of K_BB is tamed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BbMode {
    /// Window e^{−ω/ω_w} on the vacuum spectrum, grid filter sinc⁴(ωh/2).
    Window,
    /// Same window; samples formed as −Δ²F/h² of the kernel built from J_BB/ω².
    OnceSubtracted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbRegularization {
    /// ω_w = window_factor·Ω_BB
    pub window_factor: f64,
    pub mode: BbMode,
}

impl Default for BbRegularization {
    fn default() -> Self {
        BbRegularization { window_factor: 10.0, mode: BbMode::Window }
    }
}

/// Thermal and vacuum parts of K_BB with their quadrature error estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KbbValue {
    pub thermal: f64,
    pub vacuum: f64,
    pub error: f64,
}

impl KbbValue {
    pub fn total(&self) -> f64 {
        self.thermal + self.vacuum
    }
}

/// Σ_j w_j f(ω_j) cos(k ω_j Δ) for k = 0..=n_lags on fixed Kronrod panels.
/// Returns the Kronrod values and |Kronrod − Gauss| per lag.
fn cosine_sums<F: Fn(f64) -> f64 + Sync>(f: F, w_max: f64, panel: f64, delta: f64, n_lags: usize) -> (Vec<f64>, Vec<f64>) {
    let n_panels = (w_max / panel).ceil().max(1.0) as usize;
    let width = w_max / n_panels as f64;
    let chunk = 256;
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..n_panels.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut kr = vec![0.0; n_lags + 1];
            let mut ga = vec![0.0; n_lags + 1];
            for pi in c * chunk..((c + 1) * chunk).min(n_panels) {
                let lo = pi as f64 * width;
                for (x, wk, wg) in gk21_nodes(lo, lo + width) {
                    let fv = f(x);
                    if fv == 0.0 {
                        continue;
                    }
                    let (a, b) = (fv * wk, fv * wg);
                    let c1 = (x * delta).cos();
                    let (mut cm, mut ck) = (1.0, c1);
                    kr[0] += a;
                    ga[0] += b;
                    for k in 1..=n_lags {
                        kr[k] += a * ck;
                        ga[k] += b * ck;
                        let next = 2.0 * c1 * ck - cm;
                        cm = ck;
                        ck = next;
                    }
                }
            }
            (kr, ga)
        })
        .collect();
    let mut kr = vec![0.0; n_lags + 1];
    let mut err = vec![0.0; n_lags + 1];
    let mut ga = vec![0.0; n_lags + 1];
    for (a, b) in partial {
        for k in 0..=n_lags {
            kr[k] += a[k];
            ga[k] += b[k];
        }
    }
    for k in 0..=n_lags {
        err[k] = (kr[k] - ga[k]).abs();
    }
    (kr, err)
}

fn thermal_weight(p: &PhysicalParams, w: f64) -> f64 {
    if p.beta_bb.is_infinite() {
        return 0.0;
    }
    let x = p.hbar * p.beta_bb * w;
    if x > 700.0 {
        0.0
    } else {
        2.0 / x.exp_m1()
    }
}

fn bb_ranges(p: &PhysicalParams, reg: &BbRegularization) -> (f64, f64, f64) {
    let ww = reg.window_factor * p.omega_cut_bb;
    let vac_max = 45.0 * ww;
    let th_max = if p.beta_bb.is_infinite() { 0.0 } else { (45.0 / (p.hbar * p.beta_bb)).min(vac_max) };
    (ww, vac_max, th_max)
}

fn sinc2(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 3.0
    } else {
        let s = x.sin() / x;
        s * s
    }
}

fn sinc4(x: f64) -> f64 {
    sinc2(x).powi(2)
}

/// K_BB(s) = (m/π)∫dω J_BB coth(ħβω/2) cos(ωs), thermal part exact, vacuum part windowed.
pub fn k_bb(s: f64, p: &PhysicalParams, reg: &BbRegularization) -> Result<KbbValue> {
    if !p.bb_active() {
        return Ok(KbbValue { thermal: 0.0, vacuum: 0.0, error: 0.0 });
    }
    j_bb(1.0, p)?;
    let (ww, vac_max, th_max) = bb_ranges(p, reg);
    let s = s.abs();
    let base = 0.25 * p.omega_cut_bb.min(ww);
    let panel = if s > 0.0 { base.min(PI / s) } else { base };
    let jb = |w: f64| p.m * j_bb(w, p).unwrap_or(0.0) / PI;
    let (vac, ev) = cosine_sums(|w| jb(w) * (-w / ww).exp(), vac_max, panel, s, 1);
    let th_panel = if p.beta_bb.is_finite() { panel.min(1.0 / (p.hbar * p.beta_bb)) } else { panel };
    let (th, et) = if th_max > 0.0 { cosine_sums(|w| jb(w) * thermal_weight(p, w), th_max, th_panel, s, 1) } else { (vec![0.0; 2], vec![0.0; 2]) };
    let idx = if s > 0.0 { 1 } else { 0 };
    let out = KbbValue { thermal: th[idx], vacuum: vac[idx], error: ev[idx] + et[idx] };
    check_kbb_error(out.error, out.total().abs().max(vac[0].abs() + th[0].abs()))?;
    Ok(out)
}

fn check_kbb_error(err: f64, scale: f64) -> Result<()> {
    if err > 1e-4 * scale {
        return Err(Error::NonConvergence { what: "K_BB quadrature".into(), achieved: err / scale, requested: 1e-4 });
    }
    Ok(())
}

/// Grid-filtered K_BB samples on lags 0..=n_lags: (thermal, vacuum).
pub fn k_bb_grid_samples(p: &PhysicalParams, reg: &BbRegularization, h: f64, n_lags: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !p.bb_active() {
        return Ok((vec![0.0; n_lags + 1], vec![0.0; n_lags + 1]));
    }
    j_bb(1.0, p)?;
    let (ww, vac_max, th_max) = bb_ranges(p, reg);
    let t_max = (n_lags.max(1) + 1) as f64 * h;
    let panel = (0.25 * p.omega_cut_bb.min(ww)).min(PI / t_max);
    let jb = |w: f64| p.m * j_bb(w, p).unwrap_or(0.0) / PI;
    let th_panel = if p.beta_bb.is_finite() { panel.min(1.0 / (p.hbar * p.beta_bb)) } else { panel };
    match reg.mode {
        BbMode::Window => {
            let (vac, ev) = cosine_sums(|w| jb(w) * (-w / ww).exp() * sinc4(0.5 * w * h), vac_max, panel, h, n_lags);
            let (th, et) = if th_max > 0.0 {
                cosine_sums(|w| jb(w) * thermal_weight(p, w) * sinc4(0.5 * w * h), th_max, th_panel, h, n_lags)
            } else {
                (vec![0.0; n_lags + 1], vec![0.0; n_lags + 1])
            };
            let scale = vac[0].abs() + th[0].abs();
            let worst = (0..=n_lags).map(|k| ev[k] + et[k]).fold(0.0, f64::max);
            check_kbb_error(worst, scale)?;
            Ok((th, vac))
        }
        BbMode::OnceSubtracted => {
            // F(s) = ∫(dω/π)(J/ω²)·weight·sinc²·cos(ωs) on lags −1..=n_lags+1, then −Δ²F/h²
            let jw = |w: f64| if w == 0.0 { 0.0 } else { jb(w) * sinc2(0.5 * w * h) / (w * w) };
            let (fv, ev) = cosine_sums(|w| jw(w) * (-w / ww).exp(), vac_max, panel, h, n_lags + 1);
            let (ft, et) = if th_max > 0.0 {
                cosine_sums(|w| jw(w) * thermal_weight(p, w), th_max, th_panel, h, n_lags + 1)
            } else {
                (vec![0.0; n_lags + 2], vec![0.0; n_lags + 2])
            };
            let second = |f: &[f64], k: usize| {
                let left = if k == 0 { f[1] } else { f[k - 1] };
                -(left - 2.0 * f[k] + f[k + 1]) / (h * h)
            };
            let vac: Vec<f64> = (0..=n_lags).map(|k| second(&fv, k)).collect();
            let th: Vec<f64> = (0..=n_lags).map(|k| second(&ft, k)).collect();
            let scale = (vac[0].abs() + th[0].abs()) * h * h;
            let worst = (0..=n_lags + 1).map(|k| ev[k] + et[k]).fold(0.0, f64::max) * 4.0;
            check_kbb_error(worst, scale)?;
            Ok((th, vac))
        }
    }
}

/// C₁, C₂ and C̃₁ on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CFunctions {
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    /// C₁ + smooth part of γ_BB
    pub c1_tilde: Vec<f64>,
    /// coefficient of the 2δ(s) part of γ_BB
    pub c1_local: f64,
}

/// C₁(s) = (1/ħβΛ)Σ uₙ gₙ(s), C₂(s) = (1/ħβ)Σ uₙ νₙ fₙ(s), with analytic tails.
pub fn c_functions(tab: &MatsubaraTable, p: &PhysicalParams, grid: &TimeGrid) -> CFunctions {
    let t = tab.terms;
    let a = tab.spacing();
    let times = grid.times();
    let (g, c) = (t.gamma, t.cut);
    let cc = t.omega0_sq + g * c;
    let (c1, c2): (Vec<f64>, Vec<f64>) = times
        .par_iter()
        .map(|&s| {
            if g == 0.0 {
                return (0.0, 0.0);
            }
            let n = terms_for(s, a, tab.n_terms);
            let (mut s1, mut s2) = (0.0, 0.0);
            for k in (1..=n).rev() {
                let nu = a * k as f64;
                let u = t.u(nu);
                s1 += u * t.g(nu, s);
                s2 += u * nu * t.f(nu, s);
            }
            if s == 0.0 {
                s1 += tail(
                    &[(3.0, g * c * c), (4.0, -g * c.powi(3)), (5.0, g * c * c * (c * c - cc)), (6.0, g * c * c * (-c.powi(3) + cc * c + g * c * c))],
                    n,
                    a,
                );
            } else {
                let e = (-c * s).exp();
                s1 += tail(&[(4.0, -g * c.powi(3) * e), (6.0, -g * c.powi(3) * e * (c * c - cc))], n, a);
                s2 += tail(&[(2.0, g * c * c * e), (4.0, g * c * c * e * (c * c - cc)), (5.0, g * g * c.powi(4) * e)], n, a);
            }
            let c1 = (tab.u0 * t.gamma_s(s) + 2.0 * s1) / (tab.hbar_beta * tab.lambda_tb);
            let c2 = 2.0 * s2 / tab.hbar_beta;
            (c1, c2)
        })
        .unzip();
    let bb = gamma_kernel(KernelPart::Bb, p);
    let c1_tilde = times.iter().zip(&c1).map(|(&s, v)| v + bb.smooth(s)).collect();
    CFunctions { c1, c2, c1_tilde, c1_local: bb.local_coeff }
}

/// Everything the moment functionals need from the noise side.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    pub h: f64,
    pub k_tb_re: Vec<f64>,
    pub k_bb_thermal: Vec<f64>,
    pub k_bb_vacuum: Vec<f64>,
    pub c: CFunctions,
    /// R(sᵢ, uⱼ) over the grid
    pub r: DMatrix<f64>,
    pub correlated: bool,
    pub matsubara_rows: usize,
}

impl NoiseTable {
    /// K_BB samples on lags (thermal + vacuum).
    pub fn k_bb(&self) -> Vec<f64> {
        self.k_bb_thermal.iter().zip(&self.k_bb_vacuum).map(|(a, b)| a + b).collect()
    }
}

/// Matsubara rows kept in R_TB: νₙ up to 50·max(Ω_TB, ω₀).
fn matsubara_rows(tab: &MatsubaraTable) -> usize {
    let need = 50.0 * tab.terms.cut.max(tab.terms.omega0_sq.sqrt());
    ((need / tab.spacing()).ceil() as usize).clamp(1, tab.n_terms)
}

/// Builds K samples, C functions and R = R_TB + K(s−u)/m.
///
/// For a factorized initial state C₁, C₂ and R_TB vanish.
pub fn build_noise(
    tab: &MatsubaraTable,
    p: &PhysicalParams,
    grid: &TimeGrid,
    reg: &BbRegularization,
    initial: &InitialState,
) -> Result<NoiseTable> {
    let n = grid.n_steps;
    let h = grid.h();
    let k_tb = k_tb_grid_samples(tab, p, h, n);
    let (kth, kvac) = k_bb_grid_samples(p, reg, h, n)?;
    let correlated = matches!(initial, InitialState::Correlated);
    let mut c = c_functions(tab, p, grid);
    if !correlated {
        c.c1 = vec![0.0; n + 1];
        c.c2 = vec![0.0; n + 1];
        let bb = gamma_kernel(KernelPart::Bb, p);
        c.c1_tilde = grid.times().iter().map(|&s| bb.smooth(s)).collect();
    }
    let mut r = DMatrix::from_fn(n + 1, n + 1, |i, j| {
        let k = i.abs_diff(j);
        (k_tb[k] + kth[k] + kvac[k]) / p.m
    });
    let mut rows = 0;
    if correlated && tab.terms.gamma > 0.0 {
        rows = matsubara_rows(tab);
        add_r_tb(&mut r, tab, grid, &c.c1, rows);
    }
    symmetrize(&mut r);
    Ok(NoiseTable { h, k_tb_re: k_tb, k_bb_thermal: kth, k_bb_vacuum: kvac, c, r, correlated, matsubara_rows: rows })
}

/// R_TB(s,u) = −Λ C₁(s)C₁(u) + (1/ħβ)Σ uₙ[gₙ(s)gₙ(u) − fₙ(s)fₙ(u)], accumulated in blocks of n.
fn add_r_tb(r: &mut DMatrix<f64>, tab: &MatsubaraTable, grid: &TimeGrid, c1: &[f64], rows: usize) {
    let t: DrudeTerms = tab.terms;
    let times = grid.times();
    let m = times.len();
    let a = tab.spacing();
    let hb = tab.hbar_beta;
    let block = 64;
    // n = 0: only g₀ = γ(s)
    let g0 = nalgebra::DVector::from_iterator(m, times.iter().map(|&s| t.gamma_s(s)));
    r.ger(tab.u0 / hb, &g0, &g0, 1.0);
    let c1v = nalgebra::DVector::from_column_slice(c1);
    r.ger(-tab.lambda_tb, &c1v, &c1v, 1.0);
    let mut start = 1;
    while start <= rows {
        let end = (start + block - 1).min(rows);
        let nb = end - start + 1;
        let mut gm = DMatrix::<f64>::zeros(nb, m);
        let mut fm = DMatrix::<f64>::zeros(nb, m);
        for (bi, k) in (start..=end).enumerate() {
            let nu = a * k as f64;
            let w = (2.0 * t.u(nu) / hb).sqrt();
            for (j, &s) in times.iter().enumerate() {
                gm[(bi, j)] = w * t.g(nu, s);
                fm[(bi, j)] = w * t.f(nu, s);
            }
        }
        r.gemm_tr(1.0, &gm, &gm, 1.0);
        r.gemm_tr(-1.0, &fm, &fm, 1.0);
        start = end + 1;
    }
    // leading tail of the corner term Σ uₙ gₙ(0)²
    let g2 = t.gamma * t.cut * t.cut;
    r[(0, 0)] += 2.0 / hb * g2 * g2 * inverse_power_tail(4.0, rows, a);
}

fn symmetrize(r: &mut DMatrix<f64>) {
    let n = r.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (r[(i, j)] + r[(j, i)]);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_matsubara;

    fn table(gamma: f64, beta: f64, t_max: f64, n: usize) -> (PhysicalParams, TimeGrid, MatsubaraTable) {
        let p = PhysicalParams { gamma_tb: gamma, beta_tb: beta, ..Default::default() };
        let g = TimeGrid::new(t_max, n).unwrap();
        let tab = build_matsubara(&p, &g, 1e-10).unwrap();
        (p, g, tab)
    }

    fn bspline(t: f64) -> f64 {
        let t = t.abs();
        if t < 1.0 {
            2.0 / 3.0 - t * t + 0.5 * t * t * t
        } else if t < 2.0 {
            (2.0 - t).powi(3) / 6.0
        } else {
            0.0
        }
    }

    #[test]
    fn spline_exp_matches_quadrature() {
        let h = 0.05;
        for &a in &[0.01, 3.0, 25.0, 40.0, 400.0] {
            for k in 0..5usize {
                let mut q = 0.0;
                for j in 0..4 {
                    let lo = (k as f64 - 2.0 + j as f64) * h;
                    let f = |x: f64| bspline((x - k as f64 * h) / h) * (-a * x.abs()).exp() / h;
                    q += if lo < 0.0 && lo + h > 0.0 {
                        crate::numerics::quad::integrate(f, lo, 0.0, 1e-16, 1e-14).value
                            + crate::numerics::quad::integrate(f, 0.0, lo + h, 1e-16, 1e-14).value
                    } else {
                        crate::numerics::quad::integrate(f, lo, lo + h, 1e-16, 1e-14).value
                    };
                }
                assert!((spline_exp(a, k, h) - q).abs() < 1e-12 * q.abs() + 1e-15, "a={a} k={k} {} {q}", spline_exp(a, k, h));
            }
        }
    }

    #[test]
    fn pointwise_and_filtered_kernels_agree_away_from_origin() {
        let (p, _, tab) = table(0.1, 1.0, 2.0, 200);
        let h = 0.01;
        let filt = k_tb_grid_samples(&tab, &p, h, 200);
        // the B-spline average of a smooth function differs by (h²/6)K''
        for &k in &[50usize, 100, 200] {
            let s = k as f64 * h;
            let d = 1e-3;
            let k0 = k_tb_re(s, &tab, &p);
            let curv = (k_tb_re(s + d, &tab, &p) - 2.0 * k0 + k_tb_re(s - d, &tab, &p)) / (d * d);
            let corr = h * h / 6.0 * curv;
            assert!((filt[k] - k0 - corr).abs() < 1e-3 * corr.abs() + 1e-10, "k={k}");
        }
        assert!(k_tb_re(0.0, &tab, &p).is_infinite());
        assert_eq!(k_tb_re(0.3, &tab, &p), k_tb_re(-0.3, &tab, &p));
    }

    #[test]
    fn filtered_kernel_tail_is_continuous_in_truncation() {
        let (p, _, tab) = table(0.1, 1.0, 1.0, 100);
        let h = 0.01;
        let base = k_tb_grid_samples(&tab, &p, h, 4);
        let mut wide = tab.clone();
        wide.n_terms *= 8;
        let more = k_tb_grid_samples(&wide, &p, h, 4);
        for k in 0..=4 {
            assert!((base[k] - more[k]).abs() < 1e-9 * base[k].abs(), "k={k} {} {}", base[k], more[k]);
        }
    }

    #[test]
    fn no_coupling_no_noise() {
        let (p, g, tab) = table(0.0, 1.0, 1.0, 100);
        let nt = build_noise(&tab, &p, &g, &BbRegularization::default(), &InitialState::Correlated).unwrap();
        assert!(nt.r.iter().all(|&x| x == 0.0));
        assert!(nt.c.c1.iter().all(|&x| x == 0.0) && nt.c.c2.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bb_off_leaves_c1_unchanged() {
        let (p, g, tab) = table(0.1, 1.0, 1.0, 100);
        let c = c_functions(&tab, &p, &g);
        assert_eq!(c.c1, c.c1_tilde);
        assert_eq!(c.c1_local, 0.0);
    }

    #[test]
    fn c1_summation_order_is_immaterial() {
        let (p, g, tab) = table(0.1, 1.0, 1.0, 100);
        let c = c_functions(&tab, &p, &g);
        let t = tab.terms;
        let a = tab.spacing();
        let n = tab.n_terms;
        let mut fwd = 0.0;
        for k in 1..=n {
            fwd += t.u(a * k as f64) * t.g(a * k as f64, 0.0);
        }
        let cc = t.omega0_sq + t.gamma * t.cut;
        let (gg, cu) = (t.gamma, t.cut);
        fwd += tail(&[(3.0, gg * cu * cu), (4.0, -gg * cu.powi(3)), (5.0, gg * cu * cu * (cu * cu - cc)), (6.0, gg * cu * cu * (-cu.powi(3) + cc * cu + gg * cu * cu))], n, a);
        let c10 = (tab.u0 * t.gamma_s(0.0) + 2.0 * fwd) / (tab.hbar_beta * tab.lambda_tb);
        assert!((c10 - c.c1[0]).abs() < 1e-12 * c10.abs());
    }

    #[test]
    fn zero_temperature_vacuum_kernel_survives() {
        let p = PhysicalParams { bb_enabled: true, tau_bb: 1e-3, beta_bb: f64::INFINITY, ..Default::default() };
        let v = k_bb(0.0, &p, &BbRegularization::default()).unwrap();
        assert_eq!(v.thermal, 0.0);
        assert!(v.vacuum > 0.0);
        let off = PhysicalParams { tau_bb: 0.0, ..p.clone() };
        assert_eq!(k_bb(0.5, &off, &BbRegularization::default()).unwrap().total(), 0.0);
    }

    #[test]
    fn bb_modes_agree() {
        let p = PhysicalParams { bb_enabled: true, tau_bb: 1e-3, beta_bb: 2.0, ..Default::default() };
        let h = 0.02;
        let w = k_bb_grid_samples(&p, &BbRegularization::default(), h, 100).unwrap();
        let s = k_bb_grid_samples(&p, &BbRegularization { mode: BbMode::OnceSubtracted, ..Default::default() }, h, 100).unwrap();
        let scale = w.1[0].abs();
        for k in 0..=100 {
            assert!((w.0[k] - s.0[k]).abs() < 1e-6 * scale, "thermal k={k}");
            assert!((w.1[k] - s.1[k]).abs() < 1e-6 * scale, "vacuum k={k}: {} vs {}", w.1[k], s.1[k]);
        }
    }
}
