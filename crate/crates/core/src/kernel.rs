//! Closed-form weights of the exponential integrator for
//! `dx = (-a x + j) dt` with `a`, `j` frozen over a step of length `dt`.
//!
//! Over one step:
//! `x(dt) = e^{-a dt} x0 + j * relax_weight(a, dt)` and
//! `∫_0^dt x(s) ds = x0 * relax_weight(a, dt) + j * ramp_weight(a, dt)`.

/// `∫_0^dt e^{-a s} ds = (1 - e^{-a dt}) / a`.
#[inline]
pub fn relax_weight(a: f64, dt: f64) -> f64 {
    let z = a * dt;
    if z == 0.0 {
        dt
    } else {
        -(-z).exp_m1() / a
    }
}

/// `∫_0^dt (1 - e^{-a s}) / a ds = (dt - relax_weight(a, dt)) / a`.
#[inline]
pub fn ramp_weight(a: f64, dt: f64) -> f64 {
    let z = a * dt;
    // (z + expm1(-z)) / z^2 loses digits for small z; use its series there
    let g = if z.abs() < 1e-2 { ramp_series(z) } else { ramp_closed(z) };
    dt * dt * g
}

#[inline]
fn ramp_series(z: f64) -> f64 {
    0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0 + z * z * z * z / 720.0
}

#[inline]
fn ramp_closed(z: f64) -> f64 {
    (z + (-z).exp_m1()) / (z * z)
}

/// One exact step; returns the end value and the integral over the step.
#[inline]
pub fn relax_step(x0: f64, a: f64, j: f64, dt: f64) -> (f64, f64) {
    let w = relax_weight(a, dt);
    let end = (-a * dt).exp() * x0 + j * w;
    let integral = x0 * w + j * ramp_weight(a, dt);
    (end, integral)
}
