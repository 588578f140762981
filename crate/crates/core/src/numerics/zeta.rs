//! Hurwitz zeta function for real order s > 1 by Euler–Maclaurin summation.

const BERNOULLI_2J: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// ζ(s, q) = Σ_{k≥0} (q + k)^{-s} for s > 1, q > 0.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0 && q > 0.0, "hurwitz_zeta requires s > 1 and q > 0");
    let shift = if q < 12.0 { (12.0 - q).ceil() as usize } else { 0 };
    let mut direct = 0.0;
    for k in (0..shift).rev() {
        direct += (q + k as f64).powf(-s);
    }
    let x = q + shift as f64;
    let xs = x.powf(-s);
    let mut sum = direct + x * xs / (s - 1.0) + 0.5 * xs;
    // term_j = B_2j/(2j)! · s(s+1)…(s+2j−2) · x^{−s−2j+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut xp = xs / x;
    for (j, b) in BERNOULLI_2J.iter().enumerate() {
        let term = b / fact * rising * xp;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        fact *= (m + 3.0) * (m + 4.0);
        xp /= x * x;
    }
    sum
}

/// Σ_{n>n0} ν_n^{-p} with ν_n = a·n.
pub fn inverse_power_tail(p: f64, n0: usize, a: f64) -> f64 {
    hurwitz_zeta(p, n0 as f64 + 1.0) / a.powf(p)
}
