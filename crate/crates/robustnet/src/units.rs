//! dB / dBm / linear-scale conversions.

/// Convert a dB value to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Convert a linear power ratio to dB.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Total noise power in watts for a flat PSD (dBm/Hz) over a bandwidth (Hz).
pub fn noise_power_watts(noise_psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(noise_psd_dbm_hz) * bandwidth_hz
}

pub const MBPS: f64 = 1e6;
