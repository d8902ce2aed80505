//! Scalar special functions.

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `log Σ exp(v_i)`; `-∞` for an empty slice or all-`-∞` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (sum.ln() + log_prefactor).exp().min(1.0)
    } else {
        // Modified Lentz continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - (h.ln() + log_prefactor).exp()
    }
}

pub fn chi_squared_cdf(x: f64, dof: f64) -> f64 {
    gamma_p(0.5 * dof, 0.5 * x)
}

/// Quantile of the chi-square distribution by bisection on the CDF.
pub fn chi_squared_quantile(p: f64, dof: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0 && dof > 0.0);
    let mut hi = dof + 10.0 * (2.0 * dof).sqrt() + 10.0;
    while chi_squared_cdf(hi, dof) < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi_squared_cdf(mid, dof) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Log normalizing constant of the `d`-variate t distribution with `dof`
/// degrees of freedom and unit shape: `log Γ((ν+d)/2) − log Γ(ν/2) − (d/2) log(νπ)`.
pub fn t_log_normalizer(dof: f64, dim: usize) -> f64 {
    let d = dim as f64;
    ln_gamma(0.5 * (dof + d)) - ln_gamma(0.5 * dof) - 0.5 * d * (dof * core::f64::consts::PI).ln()
}

/// Log normalizing constant of the `d`-variate standard normal: `−(d/2) log(2π)`.
pub fn normal_log_normalizer(dim: usize) -> f64 {
    -0.5 * dim as f64 * (2.0 * core::f64::consts::PI).ln()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn chi_square_closed_forms() {
        // dof 2: CDF = 1 - exp(-x/2)
        for x in [0.1, 1.0, 5.0, 30.0] {
            assert!((chi_squared_cdf(x, 2.0) - (1.0 - (-x / 2.0).exp())).abs() < 1e-14);
        }
        let q = chi_squared_quantile(0.999, 2.0);
        assert!((q - (-2.0 * 0.001f64.ln())).abs() < 1e-10);
    }
}
