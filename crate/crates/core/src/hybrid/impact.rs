//! Two-point inelastic impact map and the leg relabeling applied after it.

use nalgebra::{SMatrix, SVector, Vector4};

use crate::error::{Error, Result};
use crate::model;
use crate::params::RobotParams;
use crate::state::{ExtState, Vec7, IDX_Q1L, IDX_Q1R, IDX_Q2L, IDX_Q2R};

/// Post-impact velocity and the contact impulses that produced it.
#[derive(Debug, Clone)]
pub struct ImpactResult {
    pub dq_plus: Vec7,
    /// Impulses `[lambda_T1, lambda_N1, lambda_T2, lambda_N2]` (N s).
    pub impulse: Vector4<f64>,
}

/// Resolve the inelastic two-point impact at the pre-impact configuration:
/// `[[D, -J^T], [J, 0]] [dq+; lambda] = [D dq-; 0]`. The configuration is
/// unchanged; both feet are stationary afterwards.
pub fn impact_map(pre: &ExtState, p: &RobotParams) -> Result<ImpactResult> {
    pre.check_finite()?;
    let (d, _, _) = model::ext_dynamics(pre, p);
    let fk = model::foot_kinematics(pre, p);
    let sigma_min = fk.sigma_min();
    if sigma_min < 1e-8 {
        return Err(Error::ImpactSingularity { sigma_min });
    }
    let mut kkt = SMatrix::<f64, 11, 11>::zeros();
    kkt.fixed_view_mut::<7, 7>(0, 0).copy_from(&d);
    kkt.fixed_view_mut::<7, 4>(0, 7).copy_from(&(-fk.jac.transpose()));
    kkt.fixed_view_mut::<4, 7>(7, 0).copy_from(&fk.jac);
    let mut rhs = SVector::<f64, 11>::zeros();
    rhs.fixed_rows_mut::<7>(0).copy_from(&(d * pre.dq));
    let sol = kkt.lu().solve(&rhs).ok_or(Error::ImpactSingularity { sigma_min })?;
    Ok(ImpactResult {
        dq_plus: sol.fixed_rows::<7>(0).into_owned(),
        impulse: sol.fixed_rows::<4>(7).into_owned(),
    })
}

/// Exchange the right and left leg coordinates (and their velocities);
/// torso angle and hip position are untouched. Involutive.
pub fn swap_legs(x: &ExtState) -> ExtState {
    let mut out = *x;
    out.q.swap_rows(IDX_Q1R, IDX_Q1L);
    out.q.swap_rows(IDX_Q2R, IDX_Q2L);
    out.dq.swap_rows(IDX_Q1R, IDX_Q1L);
    out.dq.swap_rows(IDX_Q2R, IDX_Q2L);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ext_energies, foot_kinematics};
    use approx::assert_relative_eq;

    fn params() -> RobotParams {
        RobotParams::default()
    }

    fn random_pre_impact(seed: u64) -> ExtState {
        let mut x = seed.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
        let mut next = || {
            x = x.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut q = Vec7::zeros();
        q[0] = next() * 0.5;
        q[1] = next() * 0.6;
        q[2] = next() * 0.6;
        q[3] = 0.3 + 0.5 * (next() + 1.0);
        q[4] = 0.3 + 0.5 * (next() + 1.0);
        q[5] = next() * 0.3;
        q[6] = 0.35 + 0.1 * next();
        let dq = Vec7::from_fn(|_, _| 1.5 * {
            x = x.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            ((x >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        });
        ExtState::new(q, dq)
    }

    #[test]
    fn rest_impact_is_trivial() {
        let p = params();
        let mut s = random_pre_impact(4);
        s.dq = Vec7::zeros();
        let r = impact_map(&s, &p).unwrap();
        assert!(r.dq_plus.norm() < 1e-12);
        assert!(r.impulse.norm() < 1e-12);
    }

    #[test]
    fn both_feet_stationary_after_impact() {
        let p = params();
        for seed in 0..1000 {
            let s = random_pre_impact(seed);
            let r = impact_map(&s, &p).unwrap();
            let fk = foot_kinematics(&s, &p);
            let residual = (fk.jac * r.dq_plus).norm();
            assert!(residual < 1e-9, "|J dq+| = {residual:.3e} at seed {seed}");
        }
    }

    #[test]
    fn kinetic_energy_never_increases() {
        let p = params();
        for seed in 0..1000 {
            let s = random_pre_impact(seed);
            let r = impact_map(&s, &p).unwrap();
            let post = ExtState::new(s.q, r.dq_plus);
            let (k_pre, _) = ext_energies(&s, &p);
            let (k_post, _) = ext_energies(&post, &p);
            assert!(
                k_post <= k_pre * (1.0 + 1e-12) + 1e-12,
                "impact created energy at seed {seed}: {k_pre} -> {k_post}"
            );
        }
    }

    #[test]
    fn swap_is_an_involution() {
        let s = random_pre_impact(11);
        let twice = swap_legs(&swap_legs(&s));
        assert_eq!(twice.q, s.q);
        assert_eq!(twice.dq, s.dq);
    }

    #[test]
    fn symmetric_posture_is_a_fixed_point_of_swap() {
        let mut s = random_pre_impact(12);
        s.q[IDX_Q1L] = s.q[IDX_Q1R];
        s.q[IDX_Q2L] = s.q[IDX_Q2R];
        s.dq[IDX_Q1L] = s.dq[IDX_Q1R];
        s.dq[IDX_Q2L] = s.dq[IDX_Q2R];
        let sw = swap_legs(&s);
        assert_eq!(sw.q, s.q);
        assert_eq!(sw.dq, s.dq);
    }

    #[test]
    fn energies_invariant_under_swap() {
        let p = params();
        let s = random_pre_impact(13);
        let sw = swap_legs(&s);
        let (k0, v0) = ext_energies(&s, &p);
        let (k1, v1) = ext_energies(&sw, &p);
        assert_relative_eq!(k0, k1, epsilon = 1e-12);
        assert_relative_eq!(v0, v1, epsilon = 1e-12);
    }
}
