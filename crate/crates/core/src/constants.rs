//! Physical constants and unit helpers.

/// Speed of light in vacuum [m/s] (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Vacuum permittivity [F/m].
pub const EPSILON_0: f64 = 8.854_187_818_8e-12;

pub fn nm(v: f64) -> f64 {
    v * 1e-9
}

pub fn mm(v: f64) -> f64 {
    v * 1e-3
}

pub fn pm_per_volt(v: f64) -> f64 {
    v * 1e-12
}

/// Converts an attenuation in dB/km to a natural-log coefficient in 1/km.
pub fn db_per_km_to_neper(db_per_km: f64) -> f64 {
    db_per_km * std::f64::consts::LN_10 / 10.0
}
