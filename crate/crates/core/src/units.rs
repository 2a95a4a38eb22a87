//! Physical constants and dB helpers.

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Default ambient temperature (K).
pub const ROOM_TEMPERATURE: f64 = 290.0;

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[inline]
pub fn dbm_to_w(dbm: f64) -> f64 {
    db_to_lin(dbm - 30.0)
}

#[inline]
pub fn w_to_dbm(w: f64) -> f64 {
    lin_to_db(w) + 30.0
}

/// Amplitude factor for an attenuation given in dB (|α| = 10^(−A/20)).
#[inline]
pub fn attenuation_db_to_amplitude(att_db: f64) -> f64 {
    10f64.powf(-att_db / 20.0)
}

#[inline]
pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for &x in &[1e-20, 3.7e-9, 1.0, 42.0, 7.9e12] {
            assert!((db_to_lin(lin_to_db(x)) / x - 1.0).abs() < 1e-12);
            assert!((dbm_to_w(w_to_dbm(x)) / x - 1.0).abs() < 1e-12);
        }
        assert!((dbm_to_w(30.0) - 1.0).abs() < 1e-15);
        assert!((attenuation_db_to_amplitude(20.0) - 0.1).abs() < 1e-15);
    }
}
