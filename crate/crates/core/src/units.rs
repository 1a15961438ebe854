//! Linear/dB conversion. Powers are linear everywhere inside the crate;
//! decibels only appear when reading or writing files and when scoring MAE.

/// Floor applied to non-positive linear powers when converting to dB.
pub const DB_FLOOR: f64 = -200.0;

/// `10·log10(p)`, clipped at [`DB_FLOOR`].
pub fn to_db(linear: f64) -> f64 {
    if linear > 0.0 {
        (10.0 * linear.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

pub fn to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
