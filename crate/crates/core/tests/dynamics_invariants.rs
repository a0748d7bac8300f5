//! Structural invariants of the rigid-body model checked against
//! independent numerical routes.

use nalgebra::{DMatrix, DVector};
use thrustwalk_core::hybrid::{ss_accel, step_ss};
use thrustwalk_core::model::{ext_energies, extended_matrices, foot_kinematics, ss_matrices};
use thrustwalk_core::params::RobotParams;
use thrustwalk_core::state::{ExtState, SsState, Vec4, Vec5, Vec7};

fn lcg(seed: u64) -> impl FnMut() -> f64 {
    let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(12345);
    move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

fn admissible_state(next: &mut impl FnMut() -> f64) -> SsState {
    let mut q = Vec5::from_fn(|_, _| next() * 0.7);
    q[3] = 0.3 + 0.5 * (next() + 1.0);
    q[4] = 0.3 + 0.5 * (next() + 1.0);
    let dq = Vec5::from_fn(|_, _| next() * 1.5);
    SsState::new(q, dq)
}

fn inertia(q: &Vec5, p: &RobotParams) -> DMatrix<f64> {
    ss_matrices(&SsState::new(*q, Vec5::zeros()), p).unwrap().d
}

/// Coriolis matrix from Christoffel symbols with finite-difference
/// derivatives of the inertia matrix.
fn christoffel_coriolis(q: &Vec5, dq: &Vec5, p: &RobotParams) -> DMatrix<f64> {
    let h = 1e-6;
    let mut d_d = Vec::with_capacity(5);
    for i in 0..5 {
        let mut qp = *q;
        let mut qm = *q;
        qp[i] += h;
        qm[i] -= h;
        d_d.push((inertia(&qp, p) - inertia(&qm, p)) / (2.0 * h));
    }
    let mut c = DMatrix::zeros(5, 5);
    for k in 0..5 {
        for j in 0..5 {
            let mut acc = 0.0;
            for i in 0..5 {
                acc += 0.5
                    * (d_d[i][(k, j)] + d_d[j][(k, i)] - d_d[k][(i, j)])
                    * dq[i];
            }
            c[(k, j)] = acc;
        }
    }
    c
}

#[test]
fn d_dot_minus_two_c_is_skew_symmetric() {
    let p = RobotParams::default();
    let mut next = lcg(11);
    for _ in 0..10 {
        let s = admissible_state(&mut next);
        let h = 1e-6;
        let d_dot = (inertia(&(s.q + h * s.dq), &p) - inertia(&(s.q - h * s.dq), &p)) / (2.0 * h);
        let c = christoffel_coriolis(&s.q, &s.dq, &p);
        let m = &d_dot - 2.0 * &c;
        let sym = (&m + m.transpose()).norm();
        assert!(sym < 1e-9, "skew-symmetry residual {sym:.3e}");
    }
}

#[test]
fn coriolis_vector_matches_christoffel_route() {
    // H(q, dq) - H(q, 0) must equal C(q, dq) * dq with Christoffel C.
    let p = RobotParams::default();
    let mut next = lcg(23);
    for _ in 0..10 {
        let s = admissible_state(&mut next);
        let h_full = ss_matrices(&s, &p).unwrap().h;
        let h_grav = ss_matrices(&SsState::new(s.q, Vec5::zeros()), &p).unwrap().h;
        let c = christoffel_coriolis(&s.q, &s.dq, &p);
        let dq = DVector::from_fn(5, |i, _| s.dq[i]);
        let coriolis = &c * &dq;
        let direct = &h_full - &h_grav;
        let err = (&coriolis - &direct).amax();
        assert!(err < 1e-7, "Coriolis route mismatch {err:.3e}");
    }
}

#[test]
fn foot_velocity_matches_jacobian_along_trajectory() {
    let p = RobotParams::default();
    let mut next = lcg(31);
    let s0 = admissible_state(&mut next);
    let u = Vec4::new(0.4, -0.2, 0.3, -0.1);
    let dt = 1e-5;
    let mut states = vec![s0];
    for _ in 0..400 {
        states.push(step_ss(states.last().unwrap(), &u, dt, &p).unwrap());
    }
    for k in 1..states.len() - 1 {
        let lift = |s: &SsState| {
            let hip = thrustwalk_core::model::chain::ss_hip(&s.q, &s.dq, &p);
            ExtState::from_parts(s, hip.pos, hip.velocity(&s.dq))
        };
        let prev = foot_kinematics(&lift(&states[k - 1]), &p).p;
        let here = foot_kinematics(&lift(&states[k]), &p);
        let nxt = foot_kinematics(&lift(&states[k + 1]), &p).p;
        let fd = (nxt - prev) / (2.0 * dt);
        let ext = lift(&states[k]);
        let analytic = here.jac * ext.dq;
        let scale = analytic.amax().max(1e-3);
        let rel = (fd - analytic).amax() / scale;
        assert!(rel < 1e-4, "Jacobian consistency {rel:.3e} at sample {k}");
    }
}

#[test]
fn stiffly_held_extended_model_approaches_pinned_model() {
    // Hold the stance foot with a spring-damper of growing stiffness; the
    // trajectory must approach the pinned single-support model.
    let p = RobotParams::default();
    let mut next = lcg(47);
    let s0 = admissible_state(&mut next);
    let u = Vec4::new(0.3, -0.4, 0.2, 0.1);

    // pinned reference over a short horizon
    let dt = 1e-5;
    let n = 1000; // 10 ms
    let mut pinned = s0;
    for _ in 0..n {
        pinned = step_ss(&pinned, &u, dt, &p).unwrap();
    }

    let run_held = |stiffness: f64| -> Vec5 {
        let hip = thrustwalk_core::model::chain::ss_hip(&s0.q, &s0.dq, &p);
        let mut q = Vec7::zeros();
        let mut dq = Vec7::zeros();
        for i in 0..5 {
            q[i] = s0.q[i];
            dq[i] = s0.dq[i];
        }
        q[5] = hip.pos.x;
        q[6] = hip.pos.y;
        let v = hip.velocity(&s0.dq);
        dq[5] = v.x;
        dq[6] = v.y;
        let mut state = ExtState::new(q, dq);
        let damping = 2.0 * stiffness.sqrt();
        let deriv = |st: &ExtState| -> Vec7 {
            let m = extended_matrices(st, &p).unwrap();
            let fk = foot_kinematics(st, &p);
            // spring-damper on the stance (right) foot rows only
            let foot_p = nalgebra::Vector2::new(fk.p[0], fk.p[1]);
            let foot_v = {
                let v = fk.jac * st.dq;
                nalgebra::Vector2::new(v[0], v[1])
            };
            let f = -stiffness * foot_p - damping * foot_v;
            let mut rhs = DVector::zeros(7);
            for i in 0..7 {
                rhs[i] = -m.h[i]
                    + (0..4).map(|j| m.b[(i, j)] * u[j]).sum::<f64>()
                    + fk.jac[(0, i)] * f.x
                    + fk.jac[(1, i)] * f.y;
            }
            let ddq = m.d.clone().cholesky().unwrap().solve(&rhs);
            Vec7::from_fn(|i, _| ddq[i])
        };
        // symplectic Euler keeps the stiff spring stable at small steps
        let h = 2e-6;
        for _ in 0..(n * 5) {
            let a = deriv(&state);
            state.dq += h * a;
            state.q += h * state.dq;
        }
        state.q.fixed_rows::<5>(0).into_owned()
    };

    let err = |q: &Vec5| (q - pinned.q).amax();
    let soft = err(&run_held(1e5));
    let stiff = err(&run_held(1e7));
    assert!(
        stiff < soft,
        "stiffer constraint should track the pinned model better: {soft:.3e} -> {stiff:.3e}"
    );
    assert!(stiff < 5e-3, "held model too far from pinned: {stiff:.3e}");
}

#[test]
fn unforced_flow_preserves_energy_and_the_pinned_foot() {
    let p = RobotParams::default();
    let mut next = lcg(53);
    let s0 = admissible_state(&mut next);
    let (k0, v0) = thrustwalk_core::model::ss_energies(&s0, &p);
    let mut s = s0;
    for _ in 0..2000 {
        s = step_ss(&s, &Vec4::zeros(), 5e-5, &p).unwrap();
    }
    let (k1, v1) = thrustwalk_core::model::ss_energies(&s, &p);
    let rel = ((k1 + v1) - (k0 + v0)).abs() / (k0 + v0).abs().max(1.0);
    assert!(rel < 1e-6, "energy drift {rel:.3e}");
    let _ = ext_energies;
    let _ = ss_accel;
}
