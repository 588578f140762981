//! Quadrature, special functions and small helpers shared by the physics modules.

pub mod quad;
pub mod zeta;

/// (1 − e^{−x})/x, accurate near x = 0.
pub fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// (1 − e^{−x}(1 + x))/x², accurate near x = 0.
pub fn phi2(x: f64) -> f64 {
    if x.abs() < 0.05 {
        // Σ_{k≥0} (−x)^k/(k!(k+2))
        let mut sum = 0.5;
        let mut fact = 1.0;
        for k in 1..12 {
            fact *= k as f64;
            sum += (-x).powi(k) / (fact * (k as f64 + 2.0));
        }
        sum
    } else {
        (phi1(x) - (-x).exp()) / x
    }
}

/// (e^{−a s} − e^{−b s})/(b − a), with the coincident limit s·e^{−a s}.
pub fn exp_divided_difference(a: f64, b: f64, s: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    (-lo * s).exp() * s * phi1((hi - lo) * s)
}

/// Trapezoidal weights for `n + 1` equally spaced nodes.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n + 1];
    w[0] = 0.5 * h;
    w[n] = 0.5 * h;
    if n == 0 {
        w[0] = 0.0;
    }
    w
}
