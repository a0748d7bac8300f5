//! Rigid-body quantities of the planar biped: inertia, Coriolis/gravity,
//! input maps, foot Jacobians, center of mass and energies for the
//! single-support (pinned), extended and double-support models.

pub mod chain;

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector2, Vector4};

use crate::error::{Error, Result};
use crate::params::RobotParams;
use crate::state::{ExtState, SsState};

use chain::{ext_feet, ext_mass_points, ext_torso_and_thrust_dir, ss_mass_points, MassPoints};

pub type Matrix5 = SMatrix<f64, 5, 5>;
pub type Matrix7 = SMatrix<f64, 7, 7>;
pub type Matrix5x4 = SMatrix<f64, 5, 4>;
pub type Matrix7x4 = SMatrix<f64, 7, 4>;
pub type Matrix7x5 = SMatrix<f64, 7, 5>;
pub type Matrix4x7 = SMatrix<f64, 4, 7>;

/// Inertia matrix `D`, Coriolis-plus-gravity vector `H` and input map `B`
/// for one of the three models (`n` is 5 or 7, `m` is 4 or 5).
#[derive(Debug, Clone)]
pub struct DynMatrices {
    pub d: DMatrix<f64>,
    pub h: DVector<f64>,
    pub b: DMatrix<f64>,
}

/// Stacked foot-end kinematics `p = [p_1; p_2]` with Jacobian and the
/// `Jdot * qdot` quadratic-velocity terms.
#[derive(Debug, Clone)]
pub struct FootKinematics {
    pub p: Vector4<f64>,
    pub jac: Matrix4x7,
    pub djdq: Vector4<f64>,
}

impl FootKinematics {
    /// Smallest singular value of the Jacobian (rank diagnostic).
    pub fn sigma_min(&self) -> f64 {
        self.jac
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn assemble<const N: usize>(
    mp: &MassPoints<N>,
    dq: &SVector<f64, N>,
    g: f64,
) -> (SMatrix<f64, N, N>, SVector<f64, N>) {
    let mut d = SMatrix::<f64, N, N>::zeros();
    let mut h = SVector::<f64, N>::zeros();
    for (m, pk) in &mp.points {
        d += *m * pk.jac.transpose() * pk.jac;
        // Coriolis/centrifugal part: m * J^T (Jdot qdot); gravity: g m * (dy/dq)^T.
        h += *m * pk.jac.transpose() * pk.jdq;
        h += g * *m * pk.jac.row(1).transpose();
    }
    let _ = dq;
    (d, h)
}

/// Input map of the single-support model: four joint torques, zero row for
/// the unactuated torso angle.
fn input_map_ss() -> Matrix5x4 {
    let mut b = Matrix5x4::zeros();
    for (col, row) in crate::state::ACTUATED.iter().enumerate() {
        b[(*row, col)] = 1.0;
    }
    b
}

fn input_map_ext() -> Matrix7x4 {
    let mut b = Matrix7x4::zeros();
    for (col, row) in crate::state::ACTUATED.iter().enumerate() {
        b[(*row, col)] = 1.0;
    }
    b
}

/// Static kernels used by the integrators; the public `*_matrices` functions
/// wrap these into [`DynMatrices`].
pub(crate) fn ss_dynamics(
    state: &SsState,
    p: &RobotParams,
) -> (Matrix5, SVector<f64, 5>, Matrix5x4) {
    let mp = ss_mass_points(&state.q, &state.dq, p);
    let (d, h) = assemble(&mp, &state.dq, p.g);
    (d, h, input_map_ss())
}

pub(crate) fn ext_dynamics(
    state: &ExtState,
    p: &RobotParams,
) -> (Matrix7, SVector<f64, 7>, Matrix7x4) {
    let mp = ext_mass_points(&state.q, &state.dq, p);
    let (d, h) = assemble(&mp, &state.dq, p.g);
    (d, h, input_map_ext())
}

/// Thrust column of the double-support input map: generalized force of a
/// unit thrust along the torso link applied at the torso point.
pub(crate) fn thrust_column(state: &ExtState, p: &RobotParams) -> SVector<f64, 7> {
    let (torso, t_dir) = ext_torso_and_thrust_dir(&state.q, &state.dq, p);
    torso.jac.transpose() * t_dir
}

pub(crate) fn ds_input_map(state: &ExtState, p: &RobotParams) -> Matrix7x5 {
    let mut b = Matrix7x5::zeros();
    b.fixed_columns_mut::<4>(0).copy_from(&input_map_ext());
    b.fixed_columns_mut::<1>(4)
        .copy_from(&thrust_column(state, p));
    b
}

fn to_dyn<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_fn(R, C, |i, j| m[(i, j)])
}

fn vec_to_dyn<const R: usize>(v: &SVector<f64, R>) -> DVector<f64> {
    DVector::from_fn(R, |i, _| v[i])
}

/// `D_s`, `H_s`, `B_s` of the pinned single-support model (Eq. of motion
/// `D_s qdd + H_s = B_s u`).
pub fn ss_matrices(state: &SsState, p: &RobotParams) -> Result<DynMatrices> {
    state.check_finite()?;
    let (d, h, b) = ss_dynamics(state, p);
    Ok(DynMatrices {
        d: to_dyn(&d),
        h: vec_to_dyn(&h),
        b: to_dyn(&b),
    })
}

/// `D_e`, `H_e`, `B_e` of the unpinned extended model.
pub fn extended_matrices(state: &ExtState, p: &RobotParams) -> Result<DynMatrices> {
    state.check_finite()?;
    let (d, h, b) = ext_dynamics(state, p);
    Ok(DynMatrices {
        d: to_dyn(&d),
        h: vec_to_dyn(&h),
        b: to_dyn(&b),
    })
}

/// Double-support matrices: same `D`, `H` as the extended model, with the
/// input map widened by the thrust column (`eta = [u, F_th]`).
pub fn ds_matrices(state: &ExtState, p: &RobotParams) -> Result<DynMatrices> {
    state.check_finite()?;
    let (d, h, _) = ext_dynamics(state, p);
    let b = ds_input_map(state, p);
    Ok(DynMatrices {
        d: to_dyn(&d),
        h: vec_to_dyn(&h),
        b: to_dyn(&b),
    })
}

/// Stacked kinematics of both foot ends in extended coordinates.
pub fn foot_kinematics(state: &ExtState, p: &RobotParams) -> FootKinematics {
    let (foot_r, foot_l) = ext_feet(&state.q, &state.dq, p);
    let mut jac = Matrix4x7::zeros();
    jac.fixed_rows_mut::<2>(0).copy_from(&foot_r.jac);
    jac.fixed_rows_mut::<2>(2).copy_from(&foot_l.jac);
    FootKinematics {
        p: Vector4::new(foot_r.pos.x, foot_r.pos.y, foot_l.pos.x, foot_l.pos.y),
        jac,
        djdq: Vector4::new(foot_r.jdq.x, foot_r.jdq.y, foot_l.jdq.x, foot_l.jdq.y),
    }
}

/// Center of mass with position, full Jacobian and `Jdot*qdot` term.
#[derive(Debug, Clone)]
pub struct ComKinematics<const N: usize> {
    pub pos: Vector2<f64>,
    pub jac: SMatrix<f64, 2, N>,
    pub jdq: Vector2<f64>,
}

fn com_from_points<const N: usize>(mp: &MassPoints<N>) -> ComKinematics<N> {
    let mut pos = Vector2::zeros();
    let mut jac = SMatrix::<f64, 2, N>::zeros();
    let mut jdq = Vector2::zeros();
    let mut total = 0.0;
    for (m, pk) in &mp.points {
        pos += *m * pk.pos;
        jac += *m * pk.jac;
        jdq += *m * pk.jdq;
        total += *m;
    }
    ComKinematics {
        pos: pos / total,
        jac: jac / total,
        jdq: jdq / total,
    }
}

/// COM of the pinned single-support model, relative to the stance foot.
pub fn com_ss(state: &SsState, p: &RobotParams) -> ComKinematics<5> {
    com_from_points(&ss_mass_points(&state.q, &state.dq, p))
}

/// COM of the extended model in its own frame.
pub fn com_ext(state: &ExtState, p: &RobotParams) -> ComKinematics<7> {
    com_from_points(&ext_mass_points(&state.q, &state.dq, p))
}

/// Kinetic and potential energy of the single-support model. The potential
/// datum is `y = 0` at ground level.
pub fn ss_energies(state: &SsState, p: &RobotParams) -> (f64, f64) {
    let mp = ss_mass_points(&state.q, &state.dq, p);
    energies_of(&mp, &state.dq, p.g)
}

/// Kinetic and potential energy of the extended model.
pub fn ext_energies(state: &ExtState, p: &RobotParams) -> (f64, f64) {
    let mp = ext_mass_points(&state.q, &state.dq, p);
    energies_of(&mp, &state.dq, p.g)
}

fn energies_of<const N: usize>(
    mp: &MassPoints<N>,
    dq: &SVector<f64, N>,
    g: f64,
) -> (f64, f64) {
    let mut k = 0.0;
    let mut v = 0.0;
    for (m, pk) in &mp.points {
        let vel = pk.velocity(dq);
        k += 0.5 * m * vel.norm_squared();
        v += g * m * pk.pos.y;
    }
    (k, v)
}

/// Solve `D qdd = rhs` for the single-support model.
pub(crate) fn solve_spd5(d: &Matrix5, rhs: &SVector<f64, 5>) -> Result<SVector<f64, 5>> {
    d.cholesky()
        .map(|ch| ch.solve(rhs))
        .ok_or_else(|| Error::Singular {
            context: "single-support inertia matrix".into(),
        })
}
