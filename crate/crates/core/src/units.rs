//! Unit conversions between the interface units (GHz, MHz, kHz, ns, μs,
//! all non-angular) and the internal angular units (rad/μs).

use std::f64::consts::PI;

pub const TWO_PI: f64 = 2.0 * PI;

/// MHz (cycles per μs) to rad/μs.
#[inline]
pub fn mhz(f: f64) -> f64 {
    TWO_PI * f
}

/// GHz to rad/μs.
#[inline]
pub fn ghz(f: f64) -> f64 {
    TWO_PI * 1e3 * f
}

/// kHz to rad/μs.
#[inline]
pub fn khz(f: f64) -> f64 {
    TWO_PI * 1e-3 * f
}

/// rad/μs to MHz.
#[inline]
pub fn to_mhz(w: f64) -> f64 {
    w / TWO_PI
}

/// rad/μs to GHz.
#[inline]
pub fn to_ghz(w: f64) -> f64 {
    w / (TWO_PI * 1e3)
}

/// rad/μs to kHz.
#[inline]
pub fn to_khz(w: f64) -> f64 {
    w * 1e3 / TWO_PI
}

#[inline]
pub fn ns_to_us(t: f64) -> f64 {
    t * 1e-3
}

#[inline]
pub fn us_to_ns(t: f64) -> f64 {
    t * 1e3
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(TWO_PI);
    if y > PI {
        y -= TWO_PI;
    }
    y
}
