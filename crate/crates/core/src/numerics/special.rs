//! The Gamma function.

use crate::{Error, Result};

/// `Gamma(x)` for real `x` that is not a nonpositive integer.
///
/// Delegates to the Lanczos approximation in `statrs`, which already applies
/// the reflection formula below 0.5.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::invalid("gamma of NaN"));
    }
    if x <= 0.0 && x.fract() == 0.0 {
        return Err(Error::GammaPole(x));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// `ln Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::invalid(format!("ln_gamma needs x > 0, got {x}")));
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}
