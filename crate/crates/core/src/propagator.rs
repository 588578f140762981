//! Fundamental solutions of the forward (r) and reversed (x) equations of
//! motion and the auxiliary functions built from them.
//!
//! Both equations are solved in generalized Langevin form
//!
//! r̈ + c·ṙ + ∫₀ˢ γ_s(s−u) ṙ(u) du + γ_s(s)·r(0) + ω²(s)·r = 0,
//!
//! with c the coefficient of the local part of the damping kernel. The memory
//! integral uses product integration against piecewise-linear ṙ, and the
//! ODE part is advanced with the trapezoidal rule, so the scheme is second order.

use crate::error::{Error, Result};
use crate::model::{DriveSpec, PhysicalParams, TimeGrid};
use crate::numerics::{phi1, phi2};
use crate::spectral::{DampingKernelSplit, SmoothKernel};

/// Values and first derivatives of one solution on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub r: Vec<f64>,
    pub v: Vec<f64>,
}

/// Product-integration weights of one exponential e^{−a(s−u)} over a step of length h:
/// returns (decay, weight on the left node, weight on the right node).
fn exp_step_weights(rate: f64, h: f64) -> (f64, f64, f64) {
    let y = rate * h;
    let right = h * (phi1(y) - phi2(y));
    let left = h * phi2(y);
    ((-y).exp(), left, right)
}

/// Solves the GLE with initial data (r0, v0) on `omega2.len()` grid points of spacing h.
pub fn solve_gle(r0: f64, v0: f64, kernel: &DampingKernelSplit, omega2: &[f64], h: f64) -> Trajectory {
    let n = omega2.len();
    let mut r = vec![0.0; n];
    let mut v = vec![0.0; n];
    if n == 0 {
        return Trajectory { r, v };
    }
    r[0] = r0;
    v[0] = v0;
    let c = kernel.local_coeff;
    let half = 0.5 * h;
    match &kernel.smooth {
        SmoothKernel::Exponentials(terms) => {
            let w: Vec<(f64, f64, f64, f64)> = terms
                .iter()
                .map(|&(amp, rate)| {
                    let (d, l, rt) = exp_step_weights(rate, h);
                    (amp, d, l, rt)
                })
                .collect();
            let btot: f64 = w.iter().map(|&(amp, _, _, rt)| amp * rt).sum();
            let mut acc = vec![0.0; w.len()];
            let slip = |s: f64| -> f64 { terms.iter().map(|(amp, rate)| amp * (-rate * s).exp()).sum::<f64>() * r0 };
            let mut mem = 0.0;
            let mut slip_n = slip(0.0);
            for i in 0..n - 1 {
                let f_n = -c * v[i] - mem - slip_n - omega2[i] * r[i];
                let mut known = 0.0;
                for (k, &(amp, d, l, _)) in w.iter().enumerate() {
                    known += amp * (d * acc[k] + l * v[i]);
                }
                let s1 = (i + 1) as f64 * h;
                let slip_1 = slip(s1);
                let w1 = omega2[i + 1];
                let lhs = 1.0 + half * (c + btot) + half * half * w1;
                let rhs = v[i] + half * f_n - half * (known + slip_1 + w1 * (r[i] + half * v[i]));
                let vn = rhs / lhs;
                v[i + 1] = vn;
                r[i + 1] = r[i] + half * (v[i] + vn);
                mem = 0.0;
                for (k, &(amp, d, l, rt)) in w.iter().enumerate() {
                    acc[k] = d * acc[k] + l * v[i] + rt * vn;
                    mem += amp * acc[k];
                }
                slip_n = slip_1;
            }
        }
        SmoothKernel::Custom(f) => {
            let ks: Vec<f64> = (0..n).map(|j| f(j as f64 * h)).collect();
            let mut mem = 0.0;
            for i in 0..n - 1 {
                let f_n = -c * v[i] - mem - ks[i] * r0 - omega2[i] * r[i];
                let m = i + 1;
                let mut known = 0.5 * h * ks[m] * v[0];
                for j in 1..m {
                    known += h * ks[m - j] * v[j];
                }
                let btot = 0.5 * h * ks[0];
                let w1 = omega2[m];
                let lhs = 1.0 + half * (c + btot) + half * half * w1;
                let rhs = v[i] + half * f_n - half * (known + ks[m] * r0 + w1 * (r[i] + half * v[i]));
                let vn = rhs / lhs;
                v[m] = vn;
                r[m] = r[i] + half * (v[i] + vn);
                mem = known + btot * vn;
            }
        }
    }
    Trajectory { r, v }
}

/// φ₁ (r(0)=0, ṙ(0)=1) and φ₂ (r(0)=1, ṙ(0)=0) with derivatives on the grid.
#[derive(Debug, Clone)]
pub struct FundamentalSolutions {
    pub h: f64,
    pub phi1: Vec<f64>,
    pub dphi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub dphi2: Vec<f64>,
    /// max relative change of φ₁, φ₂ when the step is halved
    pub convergence_estimate: f64,
    /// ω²(s) on the grid, kept for the reversed equation
    pub omega2: Vec<f64>,
    pub modulated: bool,
}

/// x-equation solutions for one final time, on s ∈ [0, t].
#[derive(Debug, Clone)]
pub struct XSolutions {
    pub t_index: usize,
    pub t_final: f64,
    pub phix1: Vec<f64>,
    pub dphix1: Vec<f64>,
    pub phix2: Vec<f64>,
    pub dphix2: Vec<f64>,
}

fn sample_omega2(p: &PhysicalParams, d: &DriveSpec, n: usize, h: f64) -> Vec<f64> {
    (0..=n).map(|i| d.omega2(p, i as f64 * h)).collect()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solves the r-equation twice (h and h/2) and reports the step-halving change.
pub fn solve_r_fundamental(
    p: &PhysicalParams,
    d: &DriveSpec,
    gamma: &DampingKernelSplit,
    grid: &TimeGrid,
) -> Result<FundamentalSolutions> {
    let sols = solve_r_unchecked(p, d, gamma, grid);
    if sols.convergence_estimate > 1e-3 {
        return Err(Error::NonConvergence {
            what: format!("fundamental solutions on {} steps (step-halving change)", grid.n_steps),
            achieved: sols.convergence_estimate,
            requested: 1e-3,
        });
    }
    Ok(sols)
}

/// As [`solve_r_fundamental`] without failing on the convergence estimate.
pub fn solve_r_unchecked(p: &PhysicalParams, d: &DriveSpec, gamma: &DampingKernelSplit, grid: &TimeGrid) -> FundamentalSolutions {
    let n = grid.n_steps;
    let h = grid.h();
    let omega2 = sample_omega2(p, d, n, h);
    let s1 = solve_gle(0.0, 1.0, gamma, &omega2, h);
    let s2 = solve_gle(1.0, 0.0, gamma, &omega2, h);
    let fine = sample_omega2(p, d, 2 * n, 0.5 * h);
    let f1 = solve_gle(0.0, 1.0, gamma, &fine, 0.5 * h);
    let f2 = solve_gle(1.0, 0.0, gamma, &fine, 0.5 * h);
    let diff = |a: &[f64], b: &[f64]| {
        let scale = max_abs(a).max(f64::MIN_POSITIVE);
        (0..a.len()).map(|i| (a[i] - b[2 * i]).abs()).fold(0.0, f64::max) / scale
    };
    let est = diff(&s1.r, &f1.r).max(diff(&s2.r, &f2.r));
    FundamentalSolutions {
        h,
        phi1: s1.r,
        dphi1: s1.v,
        phi2: s2.r,
        dphi2: s2.v,
        convergence_estimate: est,
        omega2,
        modulated: !d.omega_p2.is_zero(),
    }
}

/// Solves the reversed-friction equation for final time t = t_index·h.
///
/// With y(σ) = x(t − σ) the equation becomes a forward GLE with profile
/// ω²(t − σ); its two standard solutions are combined to meet the
/// x-initial conditions at s = 0. Without modulation the reversed equation
/// coincides with the forward one and φ₁, φ₂ are reused.
pub fn solve_x_fundamental(sols: &FundamentalSolutions, gamma: &DampingKernelSplit, t_index: usize) -> Result<XSolutions> {
    let k = t_index;
    let h = sols.h;
    let t = k as f64 * h;
    let (y1, y2) = if sols.modulated {
        let rev: Vec<f64> = (0..=k).map(|j| sols.omega2[k - j]).collect();
        (solve_gle(0.0, 1.0, gamma, &rev, h), solve_gle(1.0, 0.0, gamma, &rev, h))
    } else {
        (
            Trajectory { r: sols.phi1[..=k].to_vec(), v: sols.dphi1[..=k].to_vec() },
            Trajectory { r: sols.phi2[..=k].to_vec(), v: sols.dphi2[..=k].to_vec() },
        )
    };
    // columns: x(0) and ẋ(0) produced by unit coefficients on y1, y2
    let (a11, a12) = (y1.r[k], y2.r[k]);
    let (a21, a22) = (-y1.v[k], -y2.v[k]);
    let det = a11 * a22 - a12 * a21;
    let scale = (a11.abs() + a12.abs()) * (a21.abs() + a22.abs());
    if k == 0 || det.abs() < 1e-10 * scale {
        return Err(Error::Conditioning { t, det });
    }
    // x(0)=0, ẋ(0)=1
    let (al1, be1) = (-a12 / det, a11 / det);
    // x(0)=1, ẋ(0)=0
    let (al2, be2) = (a22 / det, -a21 / det);
    let mut out = XSolutions {
        t_index: k,
        t_final: t,
        phix1: vec![0.0; k + 1],
        dphix1: vec![0.0; k + 1],
        phix2: vec![0.0; k + 1],
        dphix2: vec![0.0; k + 1],
    };
    for i in 0..=k {
        let j = k - i;
        out.phix1[i] = al1 * y1.r[j] + be1 * y2.r[j];
        out.dphix1[i] = -(al1 * y1.v[j] + be1 * y2.v[j]);
        out.phix2[i] = al2 * y1.r[j] + be2 * y2.r[j];
        out.dphix2[i] = -(al2 * y1.v[j] + be2 * y2.v[j]);
    }
    Ok(out)
}

/// v₁, v₂ (from x-solutions), u₁, u₂ (from r-solutions) on s ∈ [0, t] and
/// the boundary derivatives that enter the moment formulas.
#[derive(Debug, Clone)]
pub struct VuSet {
    pub t_index: usize,
    pub t_final: f64,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub du2_0: f64,
    pub du2_t: f64,
    pub du1_0: f64,
    pub du1_t: f64,
    /// φ₁(t), φ₂(t), φ̇₁(t), φ̇₂(t)
    pub phi_t: [f64; 4],
}

fn caustic_check(phi: &[f64], t: f64) -> Result<()> {
    let k = phi.len() - 1;
    let scale = max_abs(phi);
    if phi[k].abs() < 1e-8 * scale || phi[k] == 0.0 {
        return Err(Error::Caustic { t, value: phi[k] });
    }
    Ok(())
}

pub fn assemble_vu(sols: &FundamentalSolutions, xs: &XSolutions) -> Result<VuSet> {
    let k = xs.t_index;
    let t = xs.t_final;
    caustic_check(&sols.phi1[..=k], t)?;
    caustic_check(&xs.phix1, t)?;
    let (p1, p2, d1, d2) = (sols.phi1[k], sols.phi2[k], sols.dphi1[k], sols.dphi2[k]);
    let ratio_r = p2 / p1;
    let u2: Vec<f64> = sols.phi1[..=k].iter().map(|x| x / p1).collect();
    let u1: Vec<f64> = (0..=k).map(|i| sols.phi2[i] - ratio_r * sols.phi1[i]).collect();
    let x1t = xs.phix1[k];
    let ratio_x = xs.phix2[k] / x1t;
    let v1: Vec<f64> = (0..=k).map(|i| xs.phix2[i] - ratio_x * xs.phix1[i]).collect();
    let v2: Vec<f64> = xs.phix1.iter().map(|x| x / x1t).collect();
    Ok(VuSet {
        t_index: k,
        t_final: t,
        v1,
        v2,
        u1,
        u2,
        du2_0: sols.dphi1[0] / p1,
        du2_t: d1 / p1,
        du1_0: sols.dphi2[0] - ratio_r * sols.dphi1[0],
        du1_t: d2 - ratio_r * d1,
        phi_t: [p1, p2, d1, d2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Profile;
    use crate::spectral::{gamma_kernel, KernelPart};
    use std::sync::Arc;

    fn undamped() -> (PhysicalParams, DriveSpec) {
        (PhysicalParams { gamma_tb: 0.0, ..Default::default() }, DriveSpec::default())
    }

    #[test]
    fn undamped_oscillator() {
        let (p, d) = undamped();
        let g = TimeGrid::new(5.0, 5000).unwrap();
        let s = solve_r_fundamental(&p, &d, &gamma_kernel(KernelPart::Tb, &p), &g).unwrap();
        for i in (0..=5000).step_by(250) {
            let x = g.time(i);
            assert!((s.phi1[i] - x.sin()).abs() < 1e-6);
            assert!((s.phi2[i] - x.cos()).abs() < 1e-6);
            assert!((s.dphi1[i] - x.cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn markovian_damped_oscillator() {
        let p = PhysicalParams { gamma_tb: 0.0, ..Default::default() };
        let g = TimeGrid::new(1.0, 2000).unwrap();
        let s = solve_r_fundamental(&p, &DriveSpec::default(), &DampingKernelSplit::markovian(0.2), &g).unwrap();
        let w1 = (1.0f64 - 0.01).sqrt();
        let want = (-0.1f64).exp() * w1.sin() / w1;
        assert!((s.phi1[2000] - want).abs() < 1e-6);
    }

    #[test]
    fn custom_kernel_path_agrees_with_exponential_path() {
        let p = PhysicalParams::default();
        let g = TimeGrid::new(4.0, 800).unwrap();
        let exp = gamma_kernel(KernelPart::Tb, &p);
        let custom = DampingKernelSplit {
            local_coeff: 0.0,
            smooth: SmoothKernel::Custom(Arc::new(|s: f64| (-10.0 * s).exp())),
        };
        let om: Vec<f64> = vec![1.0; 801];
        let a = solve_gle(0.0, 1.0, &exp, &om, g.h());
        let b = solve_gle(0.0, 1.0, &custom, &om, g.h());
        let err = (0..=800).map(|i| (a.r[i] - b.r[i]).abs()).fold(0.0, f64::max);
        assert!(err < 2e-4, "{err}");
    }

    #[test]
    fn x_solutions_without_friction_equal_r_solutions() {
        let p = PhysicalParams { gamma_tb: 0.0, ..Default::default() };
        let d = DriveSpec {
            omega_p2: Profile::Harmonic { amplitude: 0.4, frequency: 1.7, phase: 0.0 },
            e_laser: Profile::Zero,
        };
        let g = TimeGrid::new(3.0, 600).unwrap();
        let gm = gamma_kernel(KernelPart::Tb, &p);
        let s = solve_r_fundamental(&p, &d, &gm, &g).unwrap();
        let x = solve_x_fundamental(&s, &gm, 600).unwrap();
        // x and r obey the same equation; only the discrete direction of integration differs
        for i in 0..=600 {
            assert!((x.phix1[i] - s.phi1[i]).abs() < 1e-4, "i={i}");
        }
        let sols_const = solve_r_fundamental(&p, &DriveSpec::default(), &gm, &g).unwrap();
        let xc = solve_x_fundamental(&sols_const, &gm, 600).unwrap();
        for i in 0..=600 {
            assert!((xc.phix1[i] - sols_const.phi1[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_identities() {
        let p = PhysicalParams { gamma_tb: 0.2, ..Default::default() };
        let g = TimeGrid::new(4.0, 800).unwrap();
        let gm = gamma_kernel(KernelPart::Tb, &p);
        let s = solve_r_fundamental(&p, &DriveSpec::default(), &gm, &g).unwrap();
        let x = solve_x_fundamental(&s, &gm, 700).unwrap();
        let vu = assemble_vu(&s, &x).unwrap();
        assert!((vu.v1[0] - 1.0).abs() < 1e-12);
        assert!(vu.v1[700].abs() < 1e-12);
        assert!(vu.v2[0].abs() < 1e-12);
        assert_eq!(vu.v2[700], 1.0);
        assert!((vu.du2_0 * s.phi1[700] - 1.0).abs() < 1e-8);
        assert!((vu.u2[700] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn caustic_is_named() {
        let (p, d) = undamped();
        let n = 1000;
        let g = TimeGrid::new(std::f64::consts::PI, n).unwrap();
        let gm = gamma_kernel(KernelPart::Tb, &p);
        let s = solve_r_fundamental(&p, &d, &gm, &g).unwrap();
        let mut s_exact = s.clone();
        s_exact.phi1[n] = 0.0;
        let x = XSolutions {
            t_index: n,
            t_final: std::f64::consts::PI,
            phix1: s_exact.phi1.clone(),
            dphix1: s_exact.dphi1.clone(),
            phix2: s_exact.phi2.clone(),
            dphix2: s_exact.dphi2.clone(),
        };
        match assemble_vu(&s_exact, &x) {
            Err(Error::Caustic { t, .. }) => assert!((t - std::f64::consts::PI).abs() < 1e-12),
            other => panic!("expected caustic, got {other:?}"),
        }
        // the discrete zero is also caught
        assert!(matches!(solve_x_fundamental(&s, &gm, n).and_then(|x| assemble_vu(&s, &x)), Err(_)) || s.phi1[n].abs() > 1e-8);
    }

    #[test]
    fn coarse_grid_fails_convergence_check() {
        let p = PhysicalParams::default();
        let g = TimeGrid::new(10.0, 50).unwrap();
        let r = solve_r_fundamental(&p, &DriveSpec::default(), &gamma_kernel(KernelPart::Tb, &p), &g);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }
}
