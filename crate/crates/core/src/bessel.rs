//! Exponentially scaled modified Bessel functions of integer order.

use crate::num::Scalar;

/// `e^{-z} I_nu(z)` for `z >= 0`.
///
/// Uses the power series (summed in log space) for moderate arguments and
/// the Hankel asymptotic expansion once `z` is large compared to `nu^2`.
pub fn scaled_bessel_i<T: Scalar>(nu: u32, z: T) -> T {
    assert!(z >= T::zero(), "argument must be non-negative");
    let nuf = T::from_usize_lossy(nu as usize);
    if z == T::zero() {
        return if nu == 0 { T::one() } else { T::zero() };
    }
    if z >= T::lit(40.0).max(T::lit(2.0) * nuf * nuf) {
        asymptotic(nuf, z)
    } else {
        series(nu, z)
    }
}

fn series<T: Scalar>(nu: u32, z: T) -> T {
    let half = z / T::lit(2.0);
    let log_half = half.ln();
    // log of the k = 0 term: nu ln(z/2) - ln(nu!) - z
    let mut lt = T::from_usize_lossy(nu as usize) * log_half - z;
    for i in 1..=nu {
        lt = lt - T::from_usize_lossy(i as usize).ln();
    }
    let mut logs = Vec::with_capacity(64);
    let mut k = 0usize;
    let two_log_half = T::lit(2.0) * log_half;
    let mut peak = lt;
    loop {
        logs.push(lt);
        peak = peak.max(lt);
        k += 1;
        lt = lt + two_log_half
            - T::from_usize_lossy(k).ln()
            - T::from_usize_lossy(k + nu as usize).ln();
        // Terms decrease once k(k+nu) > (z/2)^2; stop when negligible.
        if lt < peak - T::lit(45.0) && T::from_usize_lossy(k * (k + nu as usize)) > half * half {
            break;
        }
    }
    let s: T = logs.iter().map(|&l| (l - peak).exp()).sum();
    s * peak.exp()
}

fn asymptotic<T: Scalar>(nu: T, z: T) -> T {
    let mu = T::lit(4.0) * nu * nu;
    let eight_z = T::lit(8.0) * z;
    let mut term = T::one();
    let mut sum = T::one();
    for k in 1..60 {
        let kf = T::from_usize_lossy(k);
        let odd = T::lit(2.0) * kf - T::one();
        let next = -term * (mu - odd * odd) / (kf * eight_z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum = sum + term;
        if term.abs() <= T::epsilon() * sum.abs() {
            break;
        }
    }
    sum / (T::lit(2.0) * T::PI() * z).sqrt()
}

/// Coefficients `a_k(nu)` of the expansion
/// `e^{-z} I_nu(z) ~ (2 pi z)^{-1/2} sum_k (-1)^k a_k / z^k`.
pub fn asymptotic_coefficients(nu: u32, terms: usize) -> Vec<f64> {
    let mu = 4.0 * (nu as f64).powi(2);
    let mut out = Vec::with_capacity(terms);
    let mut a = 1.0;
    out.push(a);
    for k in 1..terms {
        let odd = 2.0 * k as f64 - 1.0;
        a *= (mu - odd * odd) / (k as f64 * 8.0);
        out.push(a);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: `(1/pi) int_0^pi exp(z (cos t - 1)) cos(nu t) dt`
    /// by the trapezoid rule, exponentially accurate for this periodic integrand.
    fn oracle(nu: u32, z: f64) -> f64 {
        let m = 200_000;
        let h = std::f64::consts::PI / m as f64;
        let f = |t: f64| (z * (t.cos() - 1.0)).exp() * (nu as f64 * t).cos();
        let mut s = 0.5 * (f(0.0) + f(std::f64::consts::PI));
        for i in 1..m {
            s += f(i as f64 * h);
        }
        s * h / std::f64::consts::PI
    }

    #[test]
    fn matches_integral_representation() {
        for &nu in &[0u32, 1, 2, 5, 12, 20] {
            for &z in &[0.01, 0.5, 3.0, 17.0, 39.9, 40.0, 120.0, 799.0, 801.0, 5000.0] {
                let v = scaled_bessel_i(nu, z);
                let o = oracle(nu, z);
                let scale = o.abs();
                assert!(
                    (v - o).abs() <= 1e-10 * scale + 1e-14,
                    "nu={nu} z={z}: {v} vs {o}"
                );
            }
        }
    }

    #[test]
    fn known_values() {
        // I_0(1), I_1(1), I_5(0.01) = 0.005^5 / 5! to leading order
        let e = (-1.0f64).exp();
        assert!((scaled_bessel_i(0, 1.0) - 1.2660658777520082 * e).abs() < 1e-15);
        assert!((scaled_bessel_i(1, 1.0) - 0.5651591039924851 * e).abs() < 1e-15);
        let small = 0.005f64.powi(5) / 120.0 * (1.0 + 0.005f64.powi(2) / 6.0 + 0.005f64.powi(4) / 84.0) * (-0.01f64).exp();
        assert!((scaled_bessel_i(5, 0.01) - small).abs() < 1e-12 * small);
        assert_eq!(scaled_bessel_i(3, 0.0f64), 0.0);
        assert_eq!(scaled_bessel_i(0, 0.0f64), 1.0);
    }

    #[test]
    fn single_precision_agrees() {
        for &z in &[0.3f32, 10.0, 90.0] {
            let a = scaled_bessel_i(2, z) as f64;
            let b = scaled_bessel_i(2, z as f64);
            assert!((a - b).abs() < 1e-5 * b);
        }
    }
}
