//! Unit conventions.
//!
//! Everything inside the crate is SI with angular frequencies (rad/s) and
//! seconds. Interfaces (config files, CSV, reports) use "linear" MHz, i.e.
//! the angular value divided by 2π, and microseconds.

use std::f64::consts::TAU;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Linear MHz to angular rad/s.
#[inline]
pub fn mhz(value: f64) -> f64 {
    value * TAU * 1e6
}

/// Linear kHz to angular rad/s.
#[inline]
pub fn khz(value: f64) -> f64 {
    value * TAU * 1e3
}

/// Angular rad/s to linear MHz.
#[inline]
pub fn to_mhz(angular: f64) -> f64 {
    angular / (TAU * 1e6)
}

/// Angular rad/s to linear kHz.
#[inline]
pub fn to_khz(angular: f64) -> f64 {
    angular / (TAU * 1e3)
}

/// Angular rad/s to linear Hz.
#[inline]
pub fn to_hz(angular: f64) -> f64 {
    angular / TAU
}

#[inline]
pub fn us(value: f64) -> f64 {
    value * 1e-6
}

#[inline]
pub fn to_us(seconds: f64) -> f64 {
    seconds * 1e6
}

#[inline]
pub fn um(value: f64) -> f64 {
    value * 1e-6
}

#[inline]
pub fn ppm(value: f64) -> f64 {
    value * 1e-6
}

/// Density given in cm⁻³ to m⁻³.
#[inline]
pub fn per_cm3(value: f64) -> f64 {
    value * 1e6
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn mhz_round_trip_is_exact_to_machine_precision(x in -1e3f64..1e3) {
            let back = to_mhz(mhz(x));
            prop_assert!((back - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn khz_and_mhz_agree() {
        assert!((khz(1000.0) - mhz(1.0)).abs() < 1e-6);
        assert!((to_khz(mhz(0.0475)) - 47.5).abs() < 1e-12);
    }
}
