use crate::{Error, Result};

/// Inputs of the grating-lobe formula. Lengths share one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GratingLobeQuery {
    pub order: u32,
    pub wavelength: f64,
    pub pitch: f64,
    /// Sub-sampling factor `N/M`.
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GratingLobe {
    /// Angle from the main beam, in degrees.
    Visible(f64),
    /// `k λ / (Δx · N/M) > 1`: the lobe lies outside the visible region.
    Invisible,
}

impl GratingLobe {
    pub fn degrees(self) -> Option<f64> {
        match self {
            GratingLobe::Visible(d) => Some(d),
            GratingLobe::Invisible => None,
        }
    }
}

/// Angle of the `k`-th grating lobe of a uniformly thinned array,
/// `asin(k λ / (Δx · N/M))`.
pub fn grating_lobe_angle(q: &GratingLobeQuery) -> Result<GratingLobe> {
    if q.order == 0 || !(q.wavelength > 0.0) || !(q.pitch > 0.0) || !(q.factor >= 1.0) {
        return Err(Error::config(format!("invalid grating-lobe query {q:?}")));
    }
    let arg = q.order as f64 * q.wavelength / (q.pitch * q.factor);
    if arg > 1.0 {
        return Ok(GratingLobe::Invisible);
    }
    Ok(GratingLobe::Visible(arg.asin().to_degrees()))
}
