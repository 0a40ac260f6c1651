//! Adaptive Dormand-Prince 5(4) integrator for planar autonomous systems,
//! with sign-change event location and exact sampling at requested abscissae.

use crate::error::{Error, Result};

pub type State = [f64; 2];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;

const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One Dormand-Prince step of signed size `h`. Returns the fifth-order
/// solution and the local error estimate.
pub fn dp_step<F: Fn(&State) -> State>(f: &F, y: &State, h: f64) -> (State, State) {
    let k1 = f(y);
    let k2 = f(&axpy(y, &[(A21, &k1)], h));
    let k3 = f(&axpy(y, &[(A31, &k1), (A32, &k2)], h));
    let k4 = f(&axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
    let k5 = f(&axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
    let k6 = f(&axpy(y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
    let y5 = axpy(y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
    let k7 = f(&y5);
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y5, err)
}

/// Fifth-order value a fraction `theta` of the way through a step; used for
/// event location and output sampling inside accepted steps.
pub fn partial_step<F: Fn(&State) -> State>(f: &F, y: &State, h: f64, theta: f64) -> State {
    if theta == 0.0 {
        return *y;
    }
    dp_step(f, y, theta * h).0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub atol: f64,
    pub rtol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { atol: 1e-10, rtol: 1e-10, h_init: 1e-3, h_max: 0.5, max_steps: 2_000_000 }
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// The event function reached zero (located by refinement).
    Event,
    /// The requested parameter span was exhausted.
    SpanEnd,
}

/// Result of [`integrate`]: accepted step endpoints, in integration order.
#[derive(Debug, Clone)]
pub struct Solution {
    pub xs: Vec<f64>,
    pub ys: Vec<State>,
    pub stop: Stop,
}

/// Integrates `y' = f(y)` from `x0` over a signed span (`span < 0` integrates
/// backward). Stops when `event(y)` changes sign from its initial sign; the
/// crossing is located by safeguarded bisection to `1e-12` in `x` and appended
/// as the last sample. `guard` aborts with `IntegrationDiverged` when it
/// returns `Some(message)`.
pub fn integrate<F, E, G>(
    f: &F,
    x0: f64,
    y0: State,
    span: f64,
    opts: &OdeOptions,
    event: E,
    guard: G,
) -> Result<Solution>
where
    F: Fn(&State) -> State,
    E: Fn(&State) -> f64,
    G: Fn(&State) -> Option<String>,
{
    let dir = span.signum();
    let x_end = x0 + span;
    let mut xs = vec![x0];
    let mut ys = vec![y0];
    let mut x = x0;
    let mut y = y0;
    let mut h = opts.h_init.min(opts.h_max).min(span.abs());
    let g0 = event(&y0);
    let side = if g0 >= 0.0 { 1.0 } else { -1.0 };

    for _ in 0..opts.max_steps {
        let remaining = (x_end - x) * dir;
        if remaining <= 0.0 {
            return Ok(Solution { xs, ys, stop: Stop::SpanEnd });
        }
        let step = h.min(remaining);
        let (y_new, err) = dp_step(f, &y, dir * step);
        if !(y_new[0].is_finite() && y_new[1].is_finite()) {
            h = step * 0.25;
            if h < 1e-14 {
                return Err(Error::IntegrationDiverged(format!("non-finite state at x = {x}")));
            }
            continue;
        }
        let mut norm = 0.0;
        for i in 0..2 {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            norm += (err[i] / sc).powi(2);
        }
        let norm = (norm / 2.0).sqrt();
        if norm > 1.0 {
            h = step * (0.9 * norm.powf(-0.2)).max(0.2);
            if h < 1e-14 {
                return Err(Error::IntegrationDiverged(format!("step size underflow at x = {x}")));
            }
            continue;
        }

        if side * event(&y_new) <= 0.0 {
            let theta = locate(f, &y, dir * step, |p| side * event(p));
            let y_ev = partial_step(f, &y, dir * step, theta);
            xs.push(x + dir * step * theta);
            ys.push(y_ev);
            return Ok(Solution { xs, ys, stop: Stop::Event });
        }
        x += dir * step;
        y = y_new;
        xs.push(x);
        ys.push(y);
        if let Some(msg) = guard(&y) {
            return Err(Error::IntegrationDiverged(msg));
        }
        let grow = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        h = (step * grow).min(opts.h_max);
    }
    Err(Error::StoppingConditionNotReached { steps: opts.max_steps })
}

/// Finds `theta` in `[0, 1]` where `g(partial_step(theta))` crosses zero,
/// given `g > 0` at `theta = 0` and `g <= 0` at `theta = 1`.
fn locate<F, G>(f: &F, y: &State, h: f64, g: G) -> f64
where
    F: Fn(&State) -> State,
    G: Fn(&State) -> f64,
{
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while (hi - lo) * h.abs() > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(&partial_step(f, y, h, mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Locates `theta` where component `idx` of the partial step equals `target`,
/// assuming it is monotone across the step. Newton with a bisection fallback.
pub fn locate_value<F: Fn(&State) -> State>(
    f: &F,
    y: &State,
    h: f64,
    idx: usize,
    target: f64,
    end_value: f64,
) -> f64 {
    let increasing = end_value > y[idx];
    let sign = if increasing { 1.0 } else { -1.0 };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    // Linear first guess.
    let mut theta = ((target - y[idx]) / (end_value - y[idx])).clamp(0.0, 1.0);
    for _ in 0..100 {
        let p = partial_step(f, y, h, theta);
        let r = sign * (p[idx] - target);
        if r == 0.0 {
            return theta;
        }
        if r < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        if hi - lo < 1e-15 {
            break;
        }
        let d = sign * f(&p)[idx] * h;
        let mut next = if d > 0.0 { theta - r / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - theta).abs() < 1e-16 {
            return next;
        }
        theta = next;
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let f = |y: &State| [y[1], -y[0]];
        let opts = OdeOptions::default();
        // Stop when y crosses zero from above after starting at (0, 1).
        let sol = integrate(&f, 0.0, [1e-300, 1.0], 10.0, &opts, |y| y[0], |_| None).unwrap();
        assert_eq!(sol.stop, Stop::Event);
        let x = *sol.xs.last().unwrap();
        assert!((x - std::f64::consts::PI).abs() < 1e-11, "{x}");
    }

    #[test]
    fn backward_exponential() {
        let f = |y: &State| [y[0], 0.0];
        let sol = integrate(&f, 0.0, [1.0, 0.0], -5.0, &OdeOptions::default(), |_| 1.0, |_| None).unwrap();
        let y = sol.ys.last().unwrap()[0];
        assert!((y - (-5.0f64).exp()).abs() < 1e-9);
        assert_eq!(sol.stop, Stop::SpanEnd);
    }

    #[test]
    fn locate_value_hits_target() {
        let f = |y: &State| [y[1], -y[0]];
        let y0 = [0.0, 1.0];
        let h = 0.4;
        let end = dp_step(&f, &y0, h).0;
        let theta = locate_value(&f, &y0, h, 0, 0.2, end[0]);
        assert!((partial_step(&f, &y0, h, theta)[0] - 0.2).abs() < 1e-15);
    }
}
