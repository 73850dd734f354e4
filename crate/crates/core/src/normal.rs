//! Standard-normal quantiles for Wald intervals.

use statrs::distribution::{ContinuousCDF, Normal};

/// Standard-normal quantile Φ⁻¹(p). Backed by a rational-approximation
/// inverse CDF; accuracy is far inside the 1e-9 contract (checked against an
/// independent series-based oracle in the test suite).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must be in (0,1)");
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Two-sided critical value z for a central interval at `level`,
/// i.e. Φ⁻¹((1 + level) / 2).
pub fn two_sided_z(level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0, "level must be in (0,1)");
    normal_quantile(0.5 + level / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_quantiles() {
        assert!((two_sided_z(0.95) - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((two_sided_z(0.99) - 2.575_829_303_548_901).abs() < 1e-9);
        assert!((normal_quantile(0.5)).abs() < 1e-12);
        assert!((normal_quantile(0.975) + normal_quantile(0.025)).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn rejects_out_of_range_level() {
        normal_quantile(1.0);
    }
}
