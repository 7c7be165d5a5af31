use crate::denoiser::{denoise, DenoiserParams};
use crate::error::Result;
use crate::frame::Frame;

/// `max over shifts of max |f(shift(x)) − shift(f(x))|`.
///
/// Exactly zero up to rounding for circular padding; other padding modes
/// break equivariance near the borders.
pub fn equivariance_report(params: &DenoiserParams, frame: &Frame, shifts: &[(i64, i64)]) -> Result<f64> {
    let base = denoise(params, frame)?;
    let mut worst = 0.0f64;
    for &(dx, dy) in shifts {
        let lhs = denoise(params, &frame.shift(dx, dy))?;
        let rhs = base.shift(dx, dy);
        worst = worst.max(lhs.tensor().max_abs_diff(rhs.tensor())?);
    }
    Ok(worst)
}
