use statrs::function::beta::checked_beta_reg;

use super::StatsError;

/// I_x(a, b), the regularized lower incomplete beta function.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64, StatsError> {
    if !(0.0..=1.0).contains(&x) || !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(StatsError::Domain(format!("I({x}; {a}, {b})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let v = checked_beta_reg(a, b, x).map_err(|e| StatsError::Domain(e.to_string()))?;
    Ok(v.clamp(0.0, 1.0))
}

/// Upper tail of the standard normal, P(Z > z).
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}
