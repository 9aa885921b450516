//! Physical constants and unit conversions in library units (fs, rad/fs, µm).

use std::f64::consts::PI;

/// Speed of light in µm/fs.
pub const SPEED_OF_LIGHT: f64 = 0.299_792_458;

/// fs² per ps².
pub const FS2_PER_PS2: f64 = 1.0e6;

pub fn wavelength_nm_to_omega(lambda_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / (lambda_nm * 1e-3)
}

pub fn omega_to_wavelength_nm(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega * 1e3
}

/// Converts a wavelength width at `center_nm` into an angular-frequency width.
pub fn wavelength_width_to_omega(width_nm: f64, center_nm: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT * 1e3 * width_nm / (center_nm * center_nm)
}

/// Gaussian FWHM to standard deviation.
pub fn fwhm_to_sd(fwhm: f64) -> f64 {
    fwhm / (8.0 * 2f64.ln()).sqrt()
}
