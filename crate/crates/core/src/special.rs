//! Orthogonal polynomials and related special functions.

/// Generalized Laguerre polynomial `L_n^{(alpha)}(z)` by upward recurrence in degree.
pub fn laguerre(n: usize, alpha: f64, z: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - z;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - z) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Natural log of the gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Normalized Hermite functions `φ_0..φ_n` at `xi`, with
/// `∫ φ_j(ξ) φ_k(ξ) dξ = δ_jk`.
pub fn hermite_functions(n: usize, xi: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 2);
    out.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp());
    if n >= 1 {
        out.push(std::f64::consts::SQRT_2 * xi * out[0]);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * xi * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn laguerre_low_orders() {
        let (a, z) = (2.5, 1.7);
        assert_eq!(laguerre(0, a, z), 1.0);
        assert_relative_eq!(laguerre(1, a, z), 1.0 + a - z, max_relative = 1e-15);
        let l2 = 0.5 * (z * z - 2.0 * (a + 2.0) * z + (a + 1.0) * (a + 2.0));
        assert_relative_eq!(laguerre(2, a, z), l2, max_relative = 1e-14);
    }

    #[test]
    fn ln_gamma_integers() {
        assert_relative_eq!(ln_gamma(11.0), (3628800f64).ln(), max_relative = 1e-13);
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), max_relative = 1e-13);
    }

    #[test]
    fn hermite_functions_match_explicit_forms() {
        let xi = 0.8;
        let phi = hermite_functions(3, xi);
        let g = std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp();
        assert_relative_eq!(phi[0], g, max_relative = 1e-15);
        assert_relative_eq!(phi[2], g * (2.0 * xi * xi - 1.0) / 2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(phi[3], g * (2.0 * xi * xi * xi - 3.0 * xi) / 3f64.sqrt(), max_relative = 1e-14);
    }
}
