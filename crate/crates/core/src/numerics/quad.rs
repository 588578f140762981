//! Adaptive Gauss–Kronrod quadrature and Fourier-type integrals on half lines.

use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600525185871,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

impl Quadrature {
    pub fn zero() -> Self {
        Quadrature { value: 0.0, error: 0.0, evals: 0 }
    }

    pub fn add(&mut self, other: Quadrature) {
        self.value += other.value;
        self.error += other.error;
        self.evals += other.evals;
    }
}

/// One 21-point Kronrod panel with the embedded 10-point Gauss estimate.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[10];
    let mut rg = 0.0;
    let mut resabs = rk.abs();
    let mut fv = [0.0f64; 20];
    for j in 0..10 {
        let dx = hl * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        rk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            rg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * rk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }
    let value = rk * hl;
    resasc *= hl.abs();
    resabs *= hl.abs();
    let mut err = ((rk - rg) * hl).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err)
}

/// The 21 Kronrod nodes of [a, b] with their Kronrod and Gauss weights (Gauss weight 0 off the Gauss nodes).
pub fn gk21_nodes(a: f64, b: f64) -> impl Iterator<Item = (f64, f64, f64)> {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    (0..21).map(move |i| {
        if i == 20 {
            return (c, WGK[10] * hl, 0.0);
        }
        let j = i / 2;
        let x = if i % 2 == 0 { c - hl * XGK[j] } else { c + hl * XGK[j] };
        let wg = if j % 2 == 1 { WG[j / 2] * hl } else { 0.0 };
        (x, WGK[j] * hl, wg)
    })
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive bisection on `[a, b]` until `error <= max(abs_tol, rel_tol·|value|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    integrate_limited(&f, a, b, abs_tol, rel_tol, 2000)
}

pub fn integrate_limited<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Quadrature {
    if a == b {
        return Quadrature::zero();
    }
    let (v, e) = gk21(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    let mut evals = 21;
    while err > abs_tol.max(rel_tol * total.abs()) && heap.len() < max_panels {
        let p = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk21(f, p.a, m);
        let (v2, e2) = gk21(f, m, p.b);
        evals += 42;
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
    }
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Quadrature { value, error, evals }
}

/// ∫_a^∞ f via the map x = a + t/(1 − t).
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Quadrature {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - t;
        let v = f(a + t / u) / (u * u);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_limited(&g, 0.0, 1.0, abs_tol, rel_tol, 4000)
}

/// Integrates `f` over `[a, b]` split at the given interior break points, each piece adaptively.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, nodes: &[f64], abs_tol: f64, rel_tol: f64) -> Quadrature {
    let mut q = Quadrature::zero();
    for w in nodes.windows(2) {
        q.add(integrate_limited(f, w[0], w[1], abs_tol, rel_tol, 200));
    }
    q
}

/// Wynn's ε algorithm applied to a sequence of partial sums; returns the
/// accelerated limit and a crude error estimate.
pub fn wynn_epsilon(partial: &[f64]) -> (f64, f64) {
    let n = partial.len();
    if n < 3 {
        let last = partial.last().copied().unwrap_or(0.0);
        return (last, f64::INFINITY);
    }
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = partial.to_vec();
    let mut best = *partial.last().unwrap();
    let mut best_err = (partial[n - 1] - partial[n - 2]).abs();
    let mut col = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            let base = if col == 0 { 0.0 } else { prev[i + 1] };
            if d == 0.0 {
                next.push(f64::INFINITY);
            } else {
                next.push(base + 1.0 / d);
            }
        }
        prev = cur;
        cur = next;
        col += 1;
        if col % 2 == 0 {
            if cur.iter().any(|v| !v.is_finite()) {
                break;
            }
            let m = cur.len();
            if m >= 2 {
                let e = (cur[m - 1] - cur[m - 2]).abs();
                if e < best_err {
                    best = cur[m - 1];
                    best_err = e;
                }
            }
        }
    }
    (best, best_err)
}

/// ∫_a^∞ f(ω) cos(ωs) dω for slowly decaying, non-oscillatory `f`.
///
/// Integrates half-period panels between zeros of the cosine and
/// extrapolates the alternating partial sums with the ε algorithm.
pub fn fourier_cos<F: Fn(f64) -> f64>(f: F, s: f64, a: f64, tol: f64) -> Quadrature {
    let s = s.abs();
    if s == 0.0 {
        return integrate_to_infinity(&f, a, tol, tol);
    }
    let g = |w: f64| f(w) * (w * s).cos();
    let half = std::f64::consts::PI / s;
    // first zero of cos(ωs) at or beyond a
    let k0 = ((a * s / std::f64::consts::PI) - 0.5).ceil().max(0.0);
    let mut first = (k0 + 0.5) * half;
    if first < a {
        first += half;
    }
    let mut total = integrate_limited(&g, a, first, tol * 1e-2, tol * 1e-2, 400);
    let mut partial = Vec::new();
    let mut running = total.value;
    let mut lo = first;
    let mut estimate = (running, f64::INFINITY);
    for k in 0..400 {
        let q = integrate_limited(&g, lo, lo + half, tol * 1e-3, tol * 1e-3, 100);
        total.evals += q.evals;
        total.error += q.error;
        running += q.value;
        partial.push(running);
        lo += half;
        if k >= 8 && k % 2 == 0 {
            let tail: Vec<f64> = partial[partial.len().saturating_sub(24)..].to_vec();
            estimate = wynn_epsilon(&tail);
            if estimate.1 <= tol * estimate.0.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    Quadrature { value: estimate.0, error: total.error + estimate.1, evals: total.evals }
}
