//! Independent reference computations. None of these share code paths with
//! the pipeline beyond the generic quadrature in `numerics`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::model::{PhysicalParams, Profile};
use crate::numerics::quad::{fourier_cos, integrate, integrate_pieces, Quadrature};
use crate::spectral::j_tb;

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub max_abs: f64,
    /// error in the normalization the check is stated in
    pub max_rel: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub runtime: Duration,
    pub detail: String,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, max_abs: f64, max_rel: f64, tolerance: f64, runtime: Duration) -> Self {
        OracleReport { name: name.into(), max_abs, max_rel, tolerance, passed: max_rel <= tolerance, runtime, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<40} err={:.3e} tol={:.1e} abs={:.3e} ({:.2}s){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.max_rel,
            self.tolerance,
            self.max_abs,
            self.runtime.as_secs_f64(),
            if self.detail.is_empty() { String::new() } else { format!("  {}", self.detail) }
        )
    }
}

/// Times a closure.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

/// Largest |a − b| and the same divided by max|b|.
pub fn sup_errors(a: &[f64], b: &[f64]) -> (f64, f64) {
    let abs = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max);
    (abs, if scale > 0.0 { abs / scale } else { abs })
}

// ---------- Laplace inversion for the undriven Drude oscillator ----------

/// φ₁, φ̇₁, φ₂, φ̇₂ sampled at the requested times.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSolution {
    pub phi1: Vec<f64>,
    pub dphi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub dphi2: Vec<f64>,
}

/// Roots of the monic cubic z³ + a z² + b z + c.
pub fn cubic_roots(a: f64, b: f64, c: f64) -> [Complex64; 3] {
    let p = |z: Complex64| ((z + a) * z + b) * z + c;
    let dp = |z: Complex64| (3.0 * z + 2.0 * a) * z + b;
    let scale = 1.0 + a.abs().max(b.abs().sqrt()).max(c.abs().cbrt());
    // depressed cubic y³ + py + q with z = y − a/3, solved by Cardano
    let pp = b - a * a / 3.0;
    let qq = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = Complex64::new(0.25 * qq * qq + pp * pp * pp / 27.0, 0.0).sqrt();
    let c1 = Complex64::new(-0.5 * qq, 0.0) + disc;
    let c2 = Complex64::new(-0.5 * qq, 0.0) - disc;
    let big = if c1.norm() >= c2.norm() { c1 } else { c2 };
    let u = if big.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { big.powf(1.0 / 3.0) };
    let v = if u.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { Complex64::new(-pp / 3.0, 0.0) / u };
    let w = Complex64::new(-0.5, 0.75f64.sqrt());
    let shift = Complex64::new(-a / 3.0, 0.0);
    let mut z = [u + v + shift, w * u + w.conj() * v + shift, w.conj() * u + w * v + shift];
    // clustered roots are left as a balanced set; polishing them one by one breaks the symmetry
    let snapshot = z;
    for (i, zi) in z.iter_mut().enumerate() {
        let isolated = (0..3).filter(|&j| j != i).all(|j| (snapshot[i] - snapshot[j]).norm() > 1e-3 * scale);
        if !isolated {
            continue;
        }
        for _ in 0..3 {
            let d = dp(*zi);
            if d.norm() > 1e-12 * scale * scale {
                *zi -= p(*zi) / d;
            }
        }
        if zi.im.abs() < 1e-12 * scale {
            zi.im = 0.0;
        }
    }
    z
}

/// exp(A) of a 3×3 complex matrix by scaling and squaring with a Taylor core.
fn expm3(a: [[Complex64; 3]; 3]) -> [[Complex64; 3]; 3] {
    let norm = a.iter().map(|r| r.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let sc = 0.5f64.powi(s);
    let b: Vec<Vec<Complex64>> = a.iter().map(|r| r.iter().map(|x| x * sc).collect()).collect();
    let mul = |x: &[[Complex64; 3]; 3], y: &[[Complex64; 3]; 3]| {
        let mut r = [[Complex64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    r[i][j] += x[i][k] * y[k][j];
                }
            }
        }
        r
    };
    let mut bm = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            bm[i][j] = b[i][j];
        }
    }
    let mut e = [[Complex64::new(0.0, 0.0); 3]; 3];
    let mut term = e;
    for i in 0..3 {
        e[i][i] = Complex64::new(1.0, 0.0);
        term[i][i] = Complex64::new(1.0, 0.0);
    }
    for k in 1..30 {
        term = mul(&term, &bm);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                e[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        e = mul(&e, &e);
    }
    e
}

/// (N·e^{t·})[z₁, z₂, z₃] for a polynomial N (coefficients low to high).
fn divided_difference(num: &[f64], z: &[Complex64; 3], t: f64) -> Complex64 {
    let scale = z.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let sep = [(0, 1), (0, 2), (1, 2)].iter().map(|&(i, j)| (z[i] - z[j]).norm()).fold(f64::INFINITY, f64::min);
    let n_at = |x: Complex64| num.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c);
    if sep > 1e-3 * scale {
        let mut sum = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..3 {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            sum += n_at(z[i]) * (z[i] * t).exp() / den;
        }
        return sum;
    }
    // f(Z) with Z upper bidiagonal: the (0,2) entry is f[z₁,z₂,z₃]
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let zm = [[z[0], one, zero], [zero, z[1], one], [zero, zero, z[2]]];
    let tz = zm.map(|r| r.map(|x| x * t));
    let ex = expm3(tz);
    // N(Z) by Horner
    let mut nz = [[zero; 3]; 3];
    for &c in num.iter().rev() {
        let mut next = [[zero; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    next[i][j] += nz[i][k] * zm[k][j];
                }
            }
            next[i][i] += c;
        }
        nz = next;
    }
    let mut v = zero;
    for k in 0..3 {
        v += nz[0][k] * ex[k][2];
    }
    v
}

/// Exact φ₁, φ₂ of r̈ + ∫γ(s−u)ṙ(u)du + γ(s)r(0) + ω₀²r = 0 with γ(s) = γΩe^{−Ωs},
/// by partial fractions of (z+Ω)/[z³ + Ωz² + (ω₀²+γΩ)z + ω₀²Ω].
pub fn laplace_drude_solution(gamma: f64, cut: f64, omega0: f64, times: &[f64]) -> LaplaceSolution {
    let w2 = omega0 * omega0;
    let cc = w2 + gamma * cut;
    let roots = cubic_roots(cut, cc, w2 * cut);
    laplace_with_roots(&roots, cut, w2, cc, times)
}

fn laplace_with_roots(roots: &[Complex64; 3], cut: f64, w2: f64, cc: f64, times: &[f64]) -> LaplaceSolution {
    let n1 = [cut, 1.0];
    let n1d = [0.0, cut, 1.0];
    let n2 = [0.0, cut, 1.0];
    let n2d = [-w2 * cut, -cc];
    let ev = |num: &[f64]| times.iter().map(|&t| divided_difference(num, roots, t).re).collect::<Vec<f64>>();
    LaplaceSolution { phi1: ev(&n1), dphi1: ev(&n1d), phi2: ev(&n2), dphi2: ev(&n2d) }
}

/// Same inversion evaluated at explicitly given (possibly perturbed) roots.
pub fn laplace_from_roots(roots: [Complex64; 3], cut: f64, omega0: f64, gamma: f64, times: &[f64]) -> LaplaceSolution {
    let w2 = omega0 * omega0;
    laplace_with_roots(&roots, cut, w2, w2 + gamma * cut, times)
}

// ---------- classical driven response ----------

/// Green function of m(r̈ + γṙ + ω₀²r) = δ.
fn green(gamma: f64, omega0: f64, tau: f64) -> f64 {
    let d = omega0 * omega0 - 0.25 * gamma * gamma;
    let env = (-0.5 * gamma * tau).exp();
    if d.abs() < 1e-12 * omega0 * omega0 {
        env * tau
    } else if d > 0.0 {
        let w1 = d.sqrt();
        env * (w1 * tau).sin() / w1
    } else {
        let w1 = (-d).sqrt();
        env * (w1 * tau).sinh() / w1
    }
}

/// ⟨q(t)⟩ = (1/m)∫₀ᵗ G(t−s)E(s)ds for the Markovian damped oscillator.
pub fn classical_driven_response(gamma: f64, omega0: f64, m: f64, e: &Profile, times: &[f64]) -> Vec<f64> {
    times
        .iter()
        .map(|&t| {
            if t <= 0.0 {
                return 0.0;
            }
            let pieces = (t / 0.5).ceil().max(1.0) as usize;
            let nodes: Vec<f64> = (0..=pieces).map(|i| t * i as f64 / pieces as f64).collect();
            integrate_pieces(&|s: f64| green(gamma, omega0, t - s) * e.eval(s), &nodes, 1e-14, 1e-12).value / m
        })
        .collect()
}

/// Steady amplitude of the response to E₀ sin(ω_d t).
pub fn steady_amplitude(gamma: f64, omega0: f64, m: f64, e0: f64, wd: f64) -> f64 {
    e0 / m / ((omega0 * omega0 - wd * wd).powi(2) + gamma * gamma * wd * wd).sqrt()
}

// ---------- fluctuation–dissipation quadratures ----------

/// Im χ(ω) with χ = 1/(ω₀² − ω² − iωγ̂(ω)), γ̂(ω) = γΩ/(Ω − iω).
pub fn drude_susceptibility_im(p: &PhysicalParams, w: f64) -> f64 {
    let g = Complex64::new(p.gamma_tb * p.omega_cut_tb, 0.0) / Complex64::new(p.omega_cut_tb, -w);
    let d = Complex64::new(p.omega0 * p.omega0 - w * w, 0.0) - Complex64::new(0.0, w) * g;
    (Complex64::new(1.0, 0.0) / d).im
}

fn coth_half(p: &PhysicalParams, w: f64) -> f64 {
    let x = 0.5 * p.hbar * p.beta_tb * w;
    if x < 1e-6 {
        1.0 / x + x / 3.0
    } else {
        1.0 / x.tanh()
    }
}

fn fdt_moment(p: &PhysicalParams, power: i32) -> Quadrature {
    let w0 = p.omega0;
    let g = p.gamma_tb.max(1e-6 * w0);
    let mut nodes = vec![0.0];
    for k in [-30.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0, 30.0] {
        let x = w0 + k * g;
        if x > 0.0 && x > *nodes.last().unwrap() {
            nodes.push(x);
        }
    }
    let top = 4.0 * w0.max(p.omega_cut_tb);
    if top > *nodes.last().unwrap() {
        nodes.push(top);
    }
    let f = |w: f64| if w == 0.0 { 0.0 } else { w.powi(power) * coth_half(p, w) * drude_susceptibility_im(p, w) };
    let mut q = integrate_pieces(&f, &nodes, 1e-15, 1e-12);
    let last = *nodes.last().unwrap();
    q.add(crate::numerics::quad::integrate_to_infinity(f, last, 1e-15, 1e-12));
    q
}

/// ⟨q²⟩_eq = (ħ/πm)∫₀^∞ coth(ħβω/2) Im χ(ω) dω, with its quadrature error.
pub fn fdt_equilibrium_variance(p: &PhysicalParams) -> (f64, f64) {
    let q = fdt_moment(p, 0);
    let k = p.hbar / (PI * p.m);
    (k * q.value, k * q.error)
}

/// ⟨p²⟩_eq = (ħm/π)∫₀^∞ ω² coth(ħβω/2) Im χ(ω) dω.
pub fn fdt_equilibrium_momentum(p: &PhysicalParams) -> (f64, f64) {
    let q = fdt_moment(p, 2);
    let k = p.hbar * p.m / PI;
    (k * q.value, k * q.error)
}

/// K_TB(s) = (m/π)∫₀^∞ J_TB(ω) coth(ħβω/2) cos(ωs) dω for s > 0.
pub fn k_tb_quadrature(s: f64, p: &PhysicalParams) -> f64 {
    let f = |w: f64| if w == 0.0 { 2.0 * p.gamma_tb / (p.hbar * p.beta_tb) } else { j_tb(w, p) * coth_half(p, w) };
    p.m / PI * fourier_cos(f, s, 0.0, 1e-12).value
}

// ---------- discretized Caldeira–Leggett bath ----------

/// Finite bath of unit-mass oscillators reproducing J_TB on a uniform mode grid.
#[derive(Debug, Clone)]
pub struct DiscreteBath {
    pub freqs: Vec<f64>,
    pub couplings: Vec<f64>,
    pub counterterm: f64,
    /// ⟨x_a x_b⟩ and ⟨p_a p_b⟩ of the joint Gibbs state, index 0 the system
    pub cov_q: DMatrix<f64>,
    pub cov_p: DMatrix<f64>,
}

impl DiscreteBath {
    pub fn new(p: &PhysicalParams, w_max: f64, dw: f64) -> Self {
        let n = (w_max / dw).round() as usize;
        let freqs: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * dw).collect();
        let couplings: Vec<f64> = freqs.iter().map(|&w| (2.0 / PI * w * p.m * j_tb(w, p) * dw).sqrt()).collect();
        let counterterm: f64 = couplings.iter().zip(&freqs).map(|(c, w)| c * c / (w * w)).sum();
        let mut v = DMatrix::<f64>::zeros(n + 1, n + 1);
        let sm = p.m.sqrt();
        v[(0, 0)] = p.omega0 * p.omega0 + counterterm / p.m;
        for j in 0..n {
            v[(0, j + 1)] = -couplings[j] / sm;
            v[(j + 1, 0)] = -couplings[j] / sm;
            v[(j + 1, j + 1)] = freqs[j] * freqs[j];
        }
        let eig = SymmetricEigen::new(v);
        let hb = p.hbar;
        let mut dq = eig.eigenvalues.clone();
        let mut dp = eig.eigenvalues.clone();
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            let w = l.max(0.0).sqrt();
            let ch = 1.0 / (0.5 * p.beta_tb * hb * w).tanh();
            dq[i] = hb / (2.0 * w) * ch;
            dp[i] = hb * w / 2.0 * ch;
        }
        let u = &eig.eigenvectors;
        let mut cov_q = u * DMatrix::from_diagonal(&dq) * u.transpose();
        let mut cov_p = u * DMatrix::from_diagonal(&dp) * u.transpose();
        let mut mass = vec![1.0; n + 1];
        mass[0] = sm;
        for a in 0..=n {
            for b in 0..=n {
                cov_q[(a, b)] /= mass[a] * mass[b];
                cov_p[(a, b)] *= mass[a] * mass[b];
            }
        }
        DiscreteBath { freqs, couplings, counterterm, cov_q, cov_p }
    }

    /// (⟨q⟩, ⟨p⟩, σ_qq, σ_qp, σ_pp) at time t, by backward adjoint integration with step dt.
    pub fn moments(&self, p: &PhysicalParams, omega_p2: &Profile, e: &Profile, t: f64, dt: f64) -> [f64; 5] {
        let n = self.freqs.len();
        let steps = (t / dt).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let m = p.m;
        let vqq = |s: f64| m * (p.omega0 * p.omega0 + omega_p2.eval(s)) + self.counterterm;
        // state: λ_q, λ_j (n), λ_p, λ_pj (n), accumulator
        let rhs = |s: f64, y: &[f64], d: &mut [f64]| {
            let lp = y[n + 1];
            let mut cl = 0.0;
            for j in 0..n {
                cl += self.couplings[j] * y[n + 2 + j];
            }
            d[0] = vqq(s) * lp - cl;
            for j in 0..n {
                d[1 + j] = -self.couplings[j] * lp + self.freqs[j] * self.freqs[j] * y[n + 2 + j];
            }
            d[n + 1] = -y[0] / m;
            for j in 0..n {
                d[n + 2 + j] = -y[1 + j];
            }
            d[2 * n + 2] = -lp * e.eval(s);
        };
        let run = |which: usize| -> Vec<f64> {
            let dim = 2 * n + 3;
            let mut y = vec![0.0; dim];
            y[which] = 1.0;
            let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
            let mut tmp = vec![0.0; dim];
            for i in 0..steps {
                let s = t - i as f64 * h;
                let hs = -h;
                rhs(s, &y, &mut k1);
                for q in 0..dim {
                    tmp[q] = y[q] + 0.5 * hs * k1[q];
                }
                rhs(s + 0.5 * hs, &tmp, &mut k2);
                for q in 0..dim {
                    tmp[q] = y[q] + 0.5 * hs * k2[q];
                }
                rhs(s + 0.5 * hs, &tmp, &mut k3);
                for q in 0..dim {
                    tmp[q] = y[q] + hs * k3[q];
                }
                rhs(s + hs, &tmp, &mut k4);
                for q in 0..dim {
                    y[q] += hs / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
                }
            }
            y
        };
        let lq = run(0);
        let lp = run(n + 1);
        let cov = |a: &[f64], b: &[f64]| {
            let (aq, bq) = (nalgebra::DVectorView::from_slice(&a[..=n], n + 1), nalgebra::DVectorView::from_slice(&b[..=n], n + 1));
            let (ap, bp) = (
                nalgebra::DVectorView::from_slice(&a[n + 1..2 * n + 2], n + 1),
                nalgebra::DVectorView::from_slice(&b[n + 1..2 * n + 2], n + 1),
            );
            aq.dot(&(&self.cov_q * bq)) + ap.dot(&(&self.cov_p * bp))
        };
        // the accumulator integrates −λ_p E backwards, i.e. +∫₀ᵗ λ_p E ds
        [lq[2 * n + 2], lp[2 * n + 2], cov(&lq, &lq), cov(&lq, &lp), cov(&lp, &lp)]
    }
}

// ---------- parametric instability ----------

/// Monodromy matrix of r̈ + γṙ + (ω₀² + A sin(ω_p s))r = 0 over one pump period (RK4).
pub fn monodromy(gamma: f64, omega0: f64, amp: f64, wp: f64, steps: usize) -> [[f64; 2]; 2] {
    let period = 2.0 * PI / wp;
    let h = period / steps as f64;
    let f = |s: f64, y: [f64; 2]| [y[1], -gamma * y[1] - (omega0 * omega0 + amp * (wp * s).sin()) * y[0]];
    let mut cols = [[0.0; 2]; 2];
    for (c, y0) in [[1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
        let mut y = *y0;
        for i in 0..steps {
            let s = i as f64 * h;
            let k1 = f(s, y);
            let k2 = f(s + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f(s + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f(s + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for q in 0..2 {
                y[q] += h / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
            }
        }
        cols[c] = y;
    }
    [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]]
}

/// Largest |eigenvalue| of the monodromy matrix.
pub fn floquet_radius(m: [[f64; 2]; 2]) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = Complex64::new(0.25 * tr * tr - det, 0.0).sqrt();
    let a = Complex64::new(0.5 * tr, 0.0);
    (a + disc).norm().max((a - disc).norm())
}

/// Pump amplitude at which the first instability tongue at ω_p is entered.
pub fn tongue_threshold(gamma: f64, omega0: f64, wp: f64, a_max: f64) -> f64 {
    let rad = |a: f64| floquet_radius(monodromy(gamma, omega0, a, wp, 4000)) - 1.0;
    let (mut lo, mut hi) = (0.0, a_max);
    assert!(rad(hi) > 0.0, "no instability below the bracket");
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if rad(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Integral of a function known only through quadrature, for oracle self-tests.
pub fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate(f, a, b, 1e-14, 1e-12).value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_undamped_corner() {
        let times: Vec<f64> = (0..200).map(|i| 0.1 * i as f64).collect();
        let s = laplace_drude_solution(0.0, 10.0, 1.3, &times);
        for (i, &t) in times.iter().enumerate() {
            assert!((s.phi1[i] - (1.3 * t).sin() / 1.3).abs() < 1e-10);
            assert!((s.phi2[i] - (1.3 * t).cos()).abs() < 1e-10);
            assert!((s.dphi1[i] - (1.3 * t).cos()).abs() < 1e-10);
            assert!((s.dphi2[i] + 1.3 * (1.3 * t).sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn laplace_initial_conditions() {
        let s = laplace_drude_solution(0.2, 10.0, 1.0, &[0.0]);
        assert!(s.phi1[0].abs() < 1e-12 && (s.dphi1[0] - 1.0).abs() < 1e-12);
        assert!((s.phi2[0] - 1.0).abs() < 1e-12 && s.dphi2[0].abs() < 1e-12);
    }

    #[test]
    fn laplace_confluent_limit() {
        // triple root z = −1: Ω = 3, ω₀² + γΩ = 3, ω₀²Ω = 1
        let (cut, w2) = (3.0, 1.0 / 3.0);
        let gamma = (3.0 - w2) / cut;
        let times = [0.5, 1.0, 2.0, 4.0];
        let exact = laplace_drude_solution(gamma, cut, w2.sqrt(), &times);
        // balanced spread: the roots of (z+1)³ − ε³, handled by plain residues
        let eps = 1e-2;
        let z: [Complex64; 3] = std::array::from_fn(|k| Complex64::new(-1.0, 0.0) + Complex64::from_polar(eps, 2.0 * PI * k as f64 / 3.0));
        let pert = laplace_from_roots(z, cut, w2.sqrt(), gamma, &times);
        // φ₁ = L⁻¹[(z+3)/(z+1)³] = e^{−t}(t + t²)
        for (i, &t) in times.iter().enumerate() {
            let want = (-t).exp() * (t + t * t);
            assert!((exact.phi1[i] - want).abs() < 1e-10, "t={t}");
            assert!((pert.phi1[i] - want).abs() < 1e-5, "t={t}");
        }
    }

    #[test]
    fn classical_response_closed_forms() {
        let (g, w0, e0, wd) = (0.5, 1.0, 0.1, 0.6);
        let e = Profile::Harmonic { amplitude: e0, frequency: wd, phase: 0.0 };
        assert_eq!(classical_driven_response(g, w0, 1.0, &Profile::Zero, &[1.0, 2.0]), vec![0.0, 0.0]);
        let times: Vec<f64> = (0..400).map(|i| 60.0 + 0.05 * i as f64).collect();
        let q = classical_driven_response(g, w0, 1.0, &e, &times);
        let amp = q.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!((amp - steady_amplitude(g, w0, 1.0, e0, wd)).abs() < 1e-6);
    }

    #[test]
    fn fdt_undamped_and_classical_corners() {
        let p = PhysicalParams { gamma_tb: 1e-7, ..Default::default() };
        let (qq, _) = fdt_equilibrium_variance(&p);
        let want = 0.5 / (0.5f64).tanh();
        assert!((qq - want).abs() < 1e-5 * want, "{qq} vs {want}");
        let hot = PhysicalParams { gamma_tb: 0.01, beta_tb: 0.01, ..Default::default() };
        let (qq, _) = fdt_equilibrium_variance(&hot);
        assert!((qq - 100.0).abs() < 1e-2 * 100.0);
    }

    #[test]
    fn mathieu_threshold_near_first_order_estimate() {
        let (g, w0) = (0.05, 1.0);
        let a = tongue_threshold(g, w0, 2.0 * w0, 1.0);
        assert!((a - 2.0 * g * w0).abs() < 0.05 * 2.0 * g * w0, "{a}");
        let m = monodromy(g, w0, a, 2.0, 4000);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!((det - (-g * PI).exp()).abs() < 1e-10);
    }

    #[test]
    fn discrete_bath_without_coupling_is_free_oscillator() {
        let p = PhysicalParams { gamma_tb: 0.0, ..Default::default() };
        let b = DiscreteBath::new(&p, 5.0, 0.5);
        let r = b.moments(&p, &Profile::Zero, &Profile::Zero, 2.0, 0.001);
        let want = 0.5 / (0.5f64).tanh();
        assert!((r[2] - want).abs() < 1e-10 && (r[4] - want).abs() < 1e-10 && r[3].abs() < 1e-10);
    }
}
