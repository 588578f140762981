//! Coefficient functionals, first and second moments and the reduced density matrix.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{validate_params, DriveSpec, InitialState, PhysicalParams, TimeGrid};
use crate::noise::{build_noise, BbRegularization, NoiseTable};
use crate::numerics::trapezoid_weights;
use crate::propagator::{assemble_vu, solve_r_fundamental, solve_x_fundamental, FundamentalSolutions, VuSet};
use crate::spectral::{build_matsubara, gamma_kernel, DampingKernelSplit, KernelPart, MatsubaraTable};

/// Scalars entering the moment formulas at one final time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentFunctionals {
    pub t: f64,
    pub c1p: f64,
    pub c1m: f64,
    pub c2p: f64,
    pub c2m: f64,
    pub c1tp: f64,
    pub c1tm: f64,
    pub e_lp: f64,
    pub e_lm: f64,
    pub r11: f64,
    pub r12: f64,
    pub r22: f64,
}

fn dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Trapezoidal functionals over [0, t] with t = vu.t_final.
pub fn functionals(vu: &VuSet, noise: &NoiseTable, d: &DriveSpec, grid: &TimeGrid) -> MomentFunctionals {
    let k = vu.t_index;
    let h = grid.h();
    let w = trapezoid_weights(k, h);
    let e: Vec<f64> = (0..=k).map(|i| d.e_laser.eval(grid.time(i))).collect();
    let c = &noise.c;
    let local = c.c1_local;
    let wv1: Vec<f64> = w.iter().zip(&vu.v1).map(|(a, b)| a * b).collect();
    let wv2: Vec<f64> = w.iter().zip(&vu.v2).map(|(a, b)| a * b).collect();
    let (mut r11, mut r12, mut r22) = (0.0, 0.0, 0.0);
    for j in 0..=k {
        let col = noise.r.column(j);
        let (mut a1, mut a2) = (0.0, 0.0);
        for i in 0..=k {
            a1 += wv1[i] * col[i];
            a2 += wv2[i] * col[i];
        }
        r11 += a1 * wv1[j];
        r12 += a1 * wv2[j];
        r22 += a2 * wv2[j];
    }
    MomentFunctionals {
        t: vu.t_final,
        c1p: dot(&w, &c.c1[..=k], &vu.v1),
        c1m: dot(&w, &c.c1[..=k], &vu.v2),
        c2p: dot(&w, &c.c2[..=k], &vu.v1),
        c2m: dot(&w, &c.c2[..=k], &vu.v2),
        c1tp: dot(&w, &c.c1_tilde[..=k], &vu.v1) + local * vu.v1[0],
        c1tm: dot(&w, &c.c1_tilde[..=k], &vu.v2) + local * vu.v2[0],
        e_lp: dot(&w, &e, &vu.v1),
        e_lm: dot(&w, &e, &vu.v2),
        r11,
        r12,
        r22,
    }
}

/// ∫∫ vᵢ(s)K(|s−u|)vⱼ(u) ds du/m for a kernel given on lags, as (r11, r12, r22).
pub fn toeplitz_forms(vu: &VuSet, lags: &[f64], h: f64, m: f64) -> (f64, f64, f64) {
    let k = vu.t_index;
    let w = trapezoid_weights(k, h);
    let wv1: Vec<f64> = w.iter().zip(&vu.v1).map(|(a, b)| a * b).collect();
    let wv2: Vec<f64> = w.iter().zip(&vu.v2).map(|(a, b)| a * b).collect();
    let (mut r11, mut r12, mut r22) = (0.0, 0.0, 0.0);
    for j in 0..=k {
        let (mut a1, mut a2) = (0.0, 0.0);
        for i in 0..=k {
            let kv = lags[i.abs_diff(j)];
            a1 += wv1[i] * kv;
            a2 += wv2[i] * kv;
        }
        r11 += a1 * wv1[j];
        r12 += a1 * wv2[j];
        r22 += a2 * wv2[j];
    }
    (r11 / m, r12 / m, r22 / m)
}

/// Compatibility switches for the literal printed forms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentOptions {
    /// ⟨q²⟩ fluctuation term as printed, M₁₁ − (ħ/m)M₁₂², instead of the Schur complement.
    pub printed_qq: bool,
    /// Q = C̃₁⁺ + ∂ₛu₁(t,0) as printed.
    pub printed_sign: bool,
}

/// Moments of the reduced Gaussian state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianState {
    pub time: f64,
    pub mean_q: f64,
    pub mean_p: f64,
    pub sqq: f64,
    pub sqp: f64,
    pub spp: f64,
    /// σ_qqσ_pp − σ_qp² below ħ²/4 beyond tolerance
    pub uncertainty_violated: bool,
}

impl GaussianState {
    pub fn new(time: f64, mean_q: f64, mean_p: f64, sqq: f64, sqp: f64, spp: f64, hbar: f64) -> Self {
        let mut s = GaussianState { time, mean_q, mean_p, sqq, sqp, spp, uncertainty_violated: false };
        s.uncertainty_violated = !(s.uncertainty_product() >= 0.25 * hbar * hbar * (1.0 - 1e-6)) || !(sqq > 0.0) || !(spp > 0.0);
        s
    }

    pub fn uncertainty_product(&self) -> f64 {
        self.sqq * self.spp - self.sqp * self.sqp
    }

    /// ħ/(2√det σ)
    pub fn purity(&self, hbar: f64) -> f64 {
        hbar / (2.0 * self.uncertainty_product().sqrt())
    }

    pub fn flags(&self) -> &'static str {
        if self.uncertainty_violated {
            "uncertainty_violation"
        } else {
            ""
        }
    }
}

/// Initial-state constants (Λ, Ω) and means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialConstants {
    pub lambda: f64,
    pub omega: f64,
    pub q0: f64,
    pub p0: f64,
}

impl InitialConstants {
    pub fn new(initial: &InitialState, tab: &MatsubaraTable, p: &PhysicalParams) -> Self {
        match *initial {
            InitialState::Correlated => InitialConstants { lambda: tab.lambda_tb, omega: tab.omega_eq, q0: 0.0, p0: 0.0 },
            InitialState::Factorized { mean_q, mean_p, sqq, spp } => {
                InitialConstants { lambda: p.m * sqq / p.hbar, omega: spp / (p.hbar * p.m), q0: mean_q, p0: mean_p }
            }
        }
    }

    pub fn state_at_zero(&self, p: &PhysicalParams) -> GaussianState {
        GaussianState::new(0.0, self.q0, self.p0, p.hbar / p.m * self.lambda, 0.0, p.hbar * p.m * self.omega, p.hbar)
    }
}

/// ⟨q⟩, ⟨p⟩ from the laser functionals; a nonzero initial mean propagates with the turn-on terms.
pub fn first_moments(vu: &VuSet, f: &MomentFunctionals, init: &InitialConstants, p: &PhysicalParams) -> (f64, f64) {
    let m = p.m;
    let [p1, p2, d1, d2] = vu.phi_t;
    let a0 = vu.du2_0;
    let a3 = vu.du2_t;
    let mut q = f.e_lp / (m * a0);
    let mut pm = a3 / a0 * f.e_lp + f.e_lm;
    if init.q0 != 0.0 || init.p0 != 0.0 {
        q += p2 * init.q0 + p1 * init.p0 / m + p1 * init.q0 * f.c1tp;
        pm += m * d2 * init.q0 + d1 * init.p0 + d1 * m * init.q0 * f.c1tp + m * init.q0 * f.c1tm;
    }
    (q, pm)
}

fn real_checked(z: Complex64, what: &str, t: f64) -> Result<f64> {
    if z.im.abs() > 1e-8 * z.re.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!("{what} has imaginary part {} at t = {t}", z.im)));
    }
    Ok(z.re)
}

/// Covariances from M = (m/ħ)[[P, −iQ], [−iQ, 1/Λ]] and the companion column (W, −iB).
pub fn second_moments(vu: &VuSet, f: &MomentFunctionals, init: &InitialConstants, p: &PhysicalParams, opt: &MomentOptions) -> Result<(f64, f64, f64)> {
    let (m, hb) = (p.m, p.hbar);
    let t = vu.t_final;
    let a0 = vu.du2_0;
    let a3 = vu.du2_t;
    let lam = init.lambda;
    let pp = init.omega - 2.0 * f.c2p + f.r11;
    let q = if opt.printed_sign { f.c1tp + vu.du1_0 } else { f.c1tp - vu.du1_0 };
    let b = vu.du1_t + f.c1tm;
    let w = f.r12 - f.c2m;
    let i = Complex64::i();
    let k = m / hb;
    let m11 = Complex64::from(k * pp);
    let m12 = -i * k * q;
    let m22 = Complex64::from(k / lam);
    let n12 = -i * k * b;
    let qq = if opt.printed_qq { m11 - m12 * m12 / k } else { m11 - m12 * m12 / m22 };
    let qp = Complex64::from(k * w) - m12 * n12 / m22;
    let bb = -(n12 * n12) / m22;
    let s_qq = real_checked(qq, "σ_qq", t)? / (k * k * a0 * a0);
    let qp = real_checked(qp, "σ_qp", t)? / k;
    let bb = real_checked(bb, "σ_pp", t)? / k;
    let sqp = m * a3 * s_qq + hb / a0 * qp;
    let spp = hb * m * f.r22 + hb * m * bb - m * m * a3 * a3 * s_qq + 2.0 * m * a3 * sqp;
    Ok((s_qq, sqp, spp))
}

/// ρ(r, x) for one position r and offset x.
pub fn density_element(gs: &GaussianState, hbar: f64, r: f64, x: f64) -> Complex64 {
    let dr = r - gs.mean_q;
    let re = -dr * dr / (2.0 * gs.sqq) - (gs.spp - gs.sqp * gs.sqp / gs.sqq) * x * x / (2.0 * hbar * hbar);
    let im = (gs.mean_p + gs.sqp / gs.sqq * dr) * x / hbar;
    Complex64::new(re, im).exp() / (2.0 * std::f64::consts::PI * gs.sqq).sqrt()
}

/// ρ sampled on r_grid × x_grid (row-major in r).
pub fn density_matrix(gs: &GaussianState, hbar: f64, r_grid: &[f64], x_grid: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    if !(gs.sqq > 0.0) {
        return Err(Error::Input(format!("density matrix needs sqq > 0, got {}", gs.sqq)));
    }
    Ok(r_grid.iter().map(|&r| x_grid.iter().map(|&x| density_element(gs, hbar, r, x)).collect()).collect())
}

/// Moments at snapshot times plus the run metadata.
#[derive(Debug, Clone)]
pub struct CovarianceTrajectory {
    pub states: Vec<GaussianState>,
    pub functionals: Vec<MomentFunctionals>,
    pub lambda: f64,
    pub omega_eq: f64,
    pub matsubara_terms: usize,
    pub matsubara_tol: f64,
    pub fundamentals_convergence: f64,
    pub params_hash: u64,
    pub warnings: Vec<String>,
}

/// A full run: parameters, drives, grid and numerical settings.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub params: PhysicalParams,
    pub drive: DriveSpec,
    pub grid: TimeGrid,
    pub initial: InitialState,
    pub bb: BbRegularization,
    pub options: MomentOptions,
    pub matsubara_tol: f64,
    /// Fixed Matsubara truncation instead of the adaptive one.
    pub matsubara_terms: Option<usize>,
    /// Damping kernel for the equations of motion instead of γ_TB + γ_BB.
    pub kernel_override: Option<DampingKernelSplit>,
}

/// Intermediate products shared by all snapshots.
pub struct Prepared {
    pub table: MatsubaraTable,
    pub kernel: DampingKernelSplit,
    pub fundamentals: FundamentalSolutions,
    pub noise: NoiseTable,
    pub init: InitialConstants,
}

impl Simulation {
    pub fn new(params: PhysicalParams, drive: DriveSpec, grid: TimeGrid) -> Self {
        Simulation {
            params,
            drive,
            grid,
            initial: InitialState::Correlated,
            bb: BbRegularization::default(),
            options: MomentOptions::default(),
            matsubara_tol: 1e-10,
            matsubara_terms: None,
            kernel_override: None,
        }
    }

    pub fn prepare(&self) -> Result<Prepared> {
        let p = &self.params;
        validate_params(p, &self.drive).into_result()?;
        let table = match self.matsubara_terms {
            Some(n) => crate::spectral::build_matsubara_with_terms(p, &self.grid, n),
            None => build_matsubara(p, &self.grid, self.matsubara_tol)?,
        };
        let kernel = self.kernel_override.clone().unwrap_or_else(|| gamma_kernel(KernelPart::Total, p));
        let fundamentals = solve_r_fundamental(p, &self.drive, &kernel, &self.grid)?;
        let noise = build_noise(&table, p, &self.grid, &self.bb, &self.initial)?;
        let init = InitialConstants::new(&self.initial, &table, p);
        Ok(Prepared { table, kernel, fundamentals, noise, init })
    }

    /// Moments at one grid index.
    pub fn snapshot(&self, prep: &Prepared, k: usize) -> Result<(GaussianState, MomentFunctionals)> {
        let p = &self.params;
        if k == 0 {
            return Ok((prep.init.state_at_zero(p), MomentFunctionals::default()));
        }
        let xs = solve_x_fundamental(&prep.fundamentals, &prep.kernel, k)?;
        let vu = assemble_vu(&prep.fundamentals, &xs)?;
        let f = functionals(&vu, &prep.noise, &self.drive, &self.grid);
        let (mq, mp) = first_moments(&vu, &f, &prep.init, p);
        let (sqq, sqp, spp) = second_moments(&vu, &f, &prep.init, p, &self.options)?;
        Ok((GaussianState::new(vu.t_final, mq, mp, sqq, sqp, spp, p.hbar), f))
    }

    /// (t, ⟨q⟩, ⟨p⟩) at the snapshots without building the noise tables.
    pub fn mean_trajectory(&self) -> Result<Vec<(f64, f64, f64)>> {
        let p = &self.params;
        validate_params(p, &self.drive).into_result()?;
        let kernel = self.kernel_override.clone().unwrap_or_else(|| gamma_kernel(KernelPart::Total, p));
        let sols = solve_r_fundamental(p, &self.drive, &kernel, &self.grid)?;
        let bb = gamma_kernel(KernelPart::Bb, p);
        let (q0, p0) = match self.initial {
            InitialState::Correlated => (0.0, 0.0),
            InitialState::Factorized { mean_q, mean_p, .. } => (mean_q, mean_p),
        };
        let init = InitialConstants { lambda: 0.0, omega: 0.0, q0, p0 };
        self.grid
            .snapshots
            .par_iter()
            .map(|&k| {
                if k == 0 {
                    return Ok((0.0, q0, p0));
                }
                let vu = assemble_vu(&sols, &solve_x_fundamental(&sols, &kernel, k)?)?;
                let h = self.grid.h();
                let w = trapezoid_weights(k, h);
                let e: Vec<f64> = (0..=k).map(|i| self.drive.e_laser.eval(self.grid.time(i))).collect();
                let g: Vec<f64> = (0..=k).map(|i| bb.smooth(self.grid.time(i))).collect();
                let f = MomentFunctionals {
                    t: vu.t_final,
                    e_lp: dot(&w, &e, &vu.v1),
                    e_lm: dot(&w, &e, &vu.v2),
                    c1tp: dot(&w, &g, &vu.v1) + bb.local_coeff * vu.v1[0],
                    c1tm: dot(&w, &g, &vu.v2) + bb.local_coeff * vu.v2[0],
                    ..Default::default()
                };
                let (q, pm) = first_moments(&vu, &f, &init, p);
                Ok((vu.t_final, q, pm))
            })
            .collect()
    }

    pub fn run(&self) -> Result<CovarianceTrajectory> {
        let prep = self.prepare()?;
        self.run_prepared(&prep)
    }

    pub fn run_prepared(&self, prep: &Prepared) -> Result<CovarianceTrajectory> {
        let out: Vec<(GaussianState, MomentFunctionals)> =
            self.grid.snapshots.par_iter().map(|&k| self.snapshot(prep, k)).collect::<Result<_>>()?;
        let mut warnings = Vec::new();
        if let Some(w) = self.grid.resolution_warning(&self.params, &self.drive) {
            warnings.push(w);
        }
        for (s, _) in &out {
            if s.uncertainty_violated {
                warnings.push(format!("uncertainty relation violated at t = {}", s.time));
            }
        }
        let (states, functionals) = out.into_iter().unzip();
        Ok(CovarianceTrajectory {
            states,
            functionals,
            lambda: prep.init.lambda,
            omega_eq: prep.init.omega,
            matsubara_terms: prep.table.n_terms,
            matsubara_tol: prep.table.achieved_tol,
            fundamentals_convergence: prep.fundamentals.convergence_estimate,
            params_hash: params_hash(&self.params),
            warnings,
        })
    }
}

/// FNV-1a over the bit patterns of the parameters.
pub fn params_hash(p: &PhysicalParams) -> u64 {
    let vals = [p.m, p.omega0, p.hbar, p.kb, p.beta_tb, p.beta_bb, p.gamma_tb, p.omega_cut_tb, p.tau_bb, p.omega_cut_bb, if p.bb_enabled { 1.0 } else { 0.0 }];
    let mut h: u64 = 0xcbf29ce484222325;
    for v in vals {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Profile;
    use crate::spectral::equilibrium_moments;

    fn sim(p: PhysicalParams, d: DriveSpec, t: f64, n: usize, snaps: usize) -> Simulation {
        Simulation::new(p, d, TimeGrid::with_snapshot_count(t, n, snaps).unwrap())
    }

    #[test]
    fn undamped_laser_functional_matches_antiderivative() {
        let p = PhysicalParams { gamma_tb: 0.0, ..Default::default() };
        let (e0, wd) = (0.3, 0.6);
        let d = DriveSpec { e_laser: Profile::Harmonic { amplitude: e0, frequency: wd, phase: 0.5 * std::f64::consts::PI }, ..Default::default() };
        let grid = TimeGrid::new(2.0, 4000).unwrap();
        let kernel = DampingKernelSplit::zero();
        let sols = solve_r_fundamental(&p, &d, &kernel, &grid).unwrap();
        let vu = assemble_vu(&sols, &solve_x_fundamental(&sols, &kernel, 4000).unwrap()).unwrap();
        let tab = build_matsubara(&p, &grid, 1e-10).unwrap();
        let noise = build_noise(&tab, &p, &grid, &BbRegularization::default(), &InitialState::Correlated).unwrap();
        let f = functionals(&vu, &noise, &d, &grid);
        let t = 2.0f64;
        // ∫₀ᵗ cos(ωd s)cos(s)ds and ∫₀ᵗ cos(ωd s)sin(s)ds
        let ic = 0.5 * (((1.0 - wd) * t).sin() / (1.0 - wd) + ((1.0 + wd) * t).sin() / (1.0 + wd));
        let is = 0.5 * ((1.0 - ((1.0 + wd) * t).cos()) / (1.0 + wd) + (1.0 - ((1.0 - wd) * t).cos()) / (1.0 - wd));
        let want = e0 * (ic - t.cos() / t.sin() * is);
        assert!((f.e_lp - want).abs() < 1e-6, "{} vs {want}", f.e_lp);
    }

    #[test]
    fn drive_free_equilibrium_is_stationary() {
        let p = PhysicalParams { gamma_tb: 0.1, omega_cut_tb: 5.0, ..Default::default() };
        let s = sim(p.clone(), DriveSpec::default(), 4.0, 800, 4);
        let tr = s.run().unwrap();
        let tab = s.prepare().unwrap().table;
        let (qq, pp) = equilibrium_moments(&tab, &p);
        for st in &tr.states {
            assert!((st.sqq - qq).abs() < 1e-3 * qq, "t={} sqq={} vs {qq}", st.time, st.sqq);
            assert!((st.spp - pp).abs() < 1e-3 * pp, "t={} spp={} vs {pp}", st.time, st.spp);
            assert!(st.sqp.abs() < 1e-3 * (qq * pp).sqrt());
            assert_eq!((st.mean_q, st.mean_p), (0.0, 0.0));
        }
    }

    #[test]
    fn density_matrix_normalized_and_symmetric() {
        let gs = GaussianState::new(1.0, 0.3, -0.2, 0.7, 0.1, 0.9, 1.0);
        let n = 2001;
        let half = 6.0 * gs.sqq.sqrt();
        let h = 2.0 * half / (n - 1) as f64;
        let r: Vec<f64> = (0..n).map(|i| gs.mean_q - half + i as f64 * h).collect();
        let rho = density_matrix(&gs, 1.0, &r, &[0.0]).unwrap();
        let w = trapezoid_weights(n - 1, h);
        let norm: f64 = rho.iter().zip(&w).map(|(row, w)| w * row[0].re).sum();
        assert!((norm - 1.0).abs() < 1e-6);
        assert!(rho.iter().all(|row| row[0].im == 0.0 && row[0].re > 0.0));
        let a = density_element(&gs, 1.0, gs.mean_q + 0.4, 0.0);
        let b = density_element(&gs, 1.0, gs.mean_q - 0.4, 0.0);
        assert!((a - b).norm() < 1e-15);
        let bad = GaussianState { sqq: 0.0, ..gs };
        assert!(density_matrix(&bad, 1.0, &r, &[0.0]).is_err());
    }

    #[test]
    fn offdiagonal_width() {
        let gs = GaussianState::new(0.0, 0.0, 0.0, 0.7, 0.1, 0.9, 1.0);
        let x = 0.8;
        let lr = density_element(&gs, 1.0, 0.0, x).norm().ln() - density_element(&gs, 1.0, 0.0, 0.0).norm().ln();
        let width = 1.0 / (gs.spp - gs.sqp * gs.sqp / gs.sqq).sqrt();
        assert!((lr + 0.5 * x * x / (width * width)).abs() < 1e-12);
    }

    #[test]
    fn linear_in_laser_amplitude() {
        let p = PhysicalParams::default();
        let d = |a: f64| DriveSpec { e_laser: Profile::Harmonic { amplitude: a, frequency: 0.7, phase: 0.0 }, ..Default::default() };
        let a = sim(p.clone(), d(0.2), 3.0, 600, 3).run().unwrap();
        let b = sim(p, d(0.6), 3.0, 600, 3).run().unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((3.0 * x.mean_q - y.mean_q).abs() <= 1e-12 * y.mean_q.abs().max(1e-12));
            assert!((3.0 * x.mean_p - y.mean_p).abs() <= 1e-12 * y.mean_p.abs().max(1e-12));
            assert_eq!((x.sqq, x.sqp, x.spp), (y.sqq, y.sqp, y.spp));
        }
    }

    #[test]
    fn initial_snapshot_is_initial_state() {
        let s = Simulation::new(PhysicalParams::default(), DriveSpec::default(), TimeGrid::new(1.0, 100).unwrap().with_snapshots(vec![0]).unwrap());
        let tr = s.run().unwrap();
        let tab = s.prepare().unwrap().table;
        let (qq, pp) = equilibrium_moments(&tab, &s.params);
        assert_eq!((tr.states[0].sqq, tr.states[0].spp, tr.states[0].sqp), (qq, pp, 0.0));
    }
}
