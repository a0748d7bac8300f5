//! Touchdown detection: locate the swing-foot height zero crossing along a
//! sampled single-support trajectory.

use crate::model::chain::ss_swing_foot;
use crate::params::RobotParams;
use crate::state::{SsState, Vec5};

/// One sample of a single-support trajectory, with the acceleration the
/// integrator used (needed for high-order interpolation between samples).
#[derive(Debug, Clone, Copy)]
pub struct TrajSample {
    pub t: f64,
    pub state: SsState,
    pub ddq: Vec5,
}

/// Refined touchdown event.
#[derive(Debug, Clone, Copy)]
pub struct TouchdownEvent {
    pub t: f64,
    pub state: SsState,
    /// Swing-foot height residual at the refined event (|h| <= tolerance).
    pub height: f64,
    /// Downward swing-foot speed at the event (negative).
    pub height_rate: f64,
}

/// Swing-foot height and its rate at a state.
pub fn swing_height(state: &SsState, p: &RobotParams) -> (f64, f64) {
    let foot = ss_swing_foot(&state.q, &state.dq, p);
    (foot.pos.y, foot.velocity(&state.dq).y)
}

/// Cubic Hermite interpolation of the state between two samples: positions
/// use (q, dq) endpoints, velocities use (dq, ddq) endpoints.
fn interp(a: &TrajSample, b: &TrajSample, t: f64) -> SsState {
    let dt = b.t - a.t;
    let s = (t - a.t) / dt;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let q = h00 * a.state.q + h10 * dt * a.state.dq + h01 * b.state.q + h11 * dt * b.state.dq;
    let dq = h00 * a.state.dq + h10 * dt * a.ddq + h01 * b.state.dq + h11 * dt * b.ddq;
    SsState::new(q, dq)
}

/// Scan a sampled trajectory for a downward swing-foot height crossing and
/// refine it by bisection to `|h| < height_tol`. Grazing contacts (zero
/// height with non-negative vertical speed) are rejected. Returns `None`
/// when the height never changes sign in the window.
pub fn detect_touchdown(
    samples: &[TrajSample],
    p: &RobotParams,
    height_tol: f64,
) -> Option<TouchdownEvent> {
    if samples.len() < 2 {
        return None;
    }
    for w in samples.windows(2) {
        let (h0, _) = swing_height(&w[0].state, p);
        let (h1, _) = swing_height(&w[1].state, p);
        if h0 > 0.0 && h1 <= 0.0 {
            // bracketed crossing; bisect on the interpolant
            let mut lo = w[0].t;
            let mut hi = w[1].t;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let s = interp(&w[0], &w[1], mid);
                let (h, _) = swing_height(&s, p);
                if h > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if h.abs() < height_tol {
                    break;
                }
                if hi - lo < f64::EPSILON * hi.abs().max(1.0) {
                    break;
                }
            }
            let t = 0.5 * (lo + hi);
            let state = interp(&w[0], &w[1], t);
            let (h, hdot) = swing_height(&state, p);
            if hdot < 0.0 {
                return Some(TouchdownEvent {
                    t,
                    state,
                    height: h,
                    height_rate: hdot,
                });
            }
            // grazing contact: skip this crossing and keep scanning
        }
    }
    None
}
