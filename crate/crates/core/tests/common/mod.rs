#![allow(dead_code)]

pub type M2 = [[f64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// `exp(a t)` by scaling and squaring with a degree-20 Taylor core.
pub fn expm(a: &M2, t: f64) -> M2 {
    let norm = a.iter().flatten().map(|v| (v * t).abs()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let s = t / 2f64.powi(squarings);
    let scaled = [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]];
    let mut result = [[1.0, 0.0], [0.0, 1.0]];
    let mut term = result;
    for k in 1..=20 {
        term = mul(&term, &scaled);
        for i in 0..2 {
            for j in 0..2 {
                term[i][j] /= k as f64;
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mul(&result, &result);
    }
    result
}

pub fn apply(a: &M2, x: &[f64; 2]) -> [f64; 2] {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

/// `Gamma(x)` for `x >= 1` from the Stirling series after shifting up, kept
/// apart from the crate's Lanczos implementation.
pub fn gamma_stirling(x: f64) -> f64 {
    let mut shift = 1.0;
    let mut z = x;
    while z < 40.0 {
        shift *= z;
        z += 1.0;
    }
    let series = 1.0 + 1.0 / (12.0 * z) + 1.0 / (288.0 * z * z) - 139.0 / (51840.0 * z.powi(3))
        - 571.0 / (2488320.0 * z.powi(4));
    (2.0 * std::f64::consts::PI / z).sqrt() * (z / std::f64::consts::E).powf(z) * series / shift
}

/// `E_mu(-t^mu)`, the solution of `D^mu x = -x`, `x(0) = 1`, by its power series.
pub fn mittag_leffler_decay(mu: f64, t: f64) -> f64 {
    let z = -t.powf(mu);
    let mut sum = 0.0;
    for k in 0..150 {
        let term = z.powi(k) / gamma_stirling(mu * k as f64 + 1.0);
        sum += term;
        if k > 5 && term.abs() < 1e-18 {
            break;
        }
    }
    sum
}
