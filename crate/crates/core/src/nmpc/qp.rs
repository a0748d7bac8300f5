//! Dense strictly convex quadratic programming by the dual active-set
//! method: start from the unconstrained minimizer and add violated
//! constraints one at a time, taking dual steps that keep the working set
//! consistent. Suited to the small, mostly-inactive problems the
//! double-support controller produces.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    /// Max-norm KKT residual (stationarity, feasibility, complementarity).
    pub kkt_residual: f64,
    pub active_set_size: usize,
    pub iterations: usize,
}

/// Solve `min 1/2 x^T Q x + a^T x  s.t.  G x <= h` with `Q` symmetric
/// positive definite.
pub fn solve_qp(
    q: &DMatrix<f64>,
    a: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
) -> Result<QpSolution> {
    let n = q.nrows();
    if q.ncols() != n || a.len() != n || g.ncols() != n || g.nrows() != h.len() {
        return Err(Error::Precondition("inconsistent QP dimensions".into()));
    }
    let m = g.nrows();
    let chol = q
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular {
            context: "QP Hessian (must be positive definite)".into(),
        })?;

    // unconstrained minimizer
    let mut x = chol.solve(&(-a));
    let mut active: Vec<usize> = Vec::new();
    let mut duals: Vec<f64> = Vec::new();

    let feas_tol = 1e-10;
    let max_iter = 50 * (n + m + 1);
    let mut iterations = 0;

    'outer: loop {
        iterations += 1;
        if iterations > max_iter {
            return Ok(finish(q, a, g, h, x, &active, &duals, QpStatus::MaxIter, iterations));
        }
        // most violated inactive constraint
        let slack = h - g * &x;
        let mut worst = None;
        let mut worst_val = -feas_tol;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            if slack[i] < worst_val {
                worst_val = slack[i];
                worst = Some(i);
            }
        }
        let p = match worst {
            None => {
                return Ok(finish(q, a, g, h, x, &active, &duals, QpStatus::Optimal, iterations))
            }
            Some(p) => p,
        };
        // normal of the violated constraint, as a >= -style normal (-g_p)
        let n_p: DVector<f64> = -g.row(p).transpose();
        let mut u_p = 0.0f64;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Ok(finish(q, a, g, h, x, &active, &duals, QpStatus::MaxIter, iterations));
            }
            // z: primal step direction; r: dual adjustment for active rows
            let qinv_np = chol.solve(&n_p);
            let (z, r) = if active.is_empty() {
                (qinv_np.clone(), DVector::zeros(0))
            } else {
                let k = active.len();
                let mut n_act = DMatrix::zeros(n, k);
                for (col, &ci) in active.iter().enumerate() {
                    n_act.set_column(col, &(-g.row(ci).transpose()));
                }
                let qinv_n = chol.solve(&n_act);
                let m_small = n_act.transpose() * &qinv_n;
                let rhs = n_act.transpose() * &qinv_np;
                let r = m_small
                    .lu()
                    .solve(&rhs)
                    .ok_or_else(|| Error::Singular {
                        context: "QP active-set system".into(),
                    })?;
                let z = &qinv_np - &qinv_n * &r;
                (z, r)
            };

            let slack_p = (h[p] - g.row(p).dot(&x.transpose())).min(0.0);
            let z_dot_np = z.dot(&n_p);

            // partial (dual) step length
            let mut t1 = f64::INFINITY;
            let mut drop_idx = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > 1e-14 {
                    let step = duals[j] / rj;
                    if step < t1 {
                        t1 = step;
                        drop_idx = Some(j);
                    }
                }
            }
            // full (primal) step length
            let t2 = if z_dot_np > 1e-14 {
                -slack_p / z_dot_np
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                // the violated constraint cannot be satisfied
                return Ok(finish(q, a, g, h, x, &active, &duals, QpStatus::Infeasible, iterations));
            }
            if t2.is_finite() {
                x += t * &z;
            }
            u_p += t;
            for (j, d) in duals.iter_mut().enumerate() {
                *d -= t * r[j];
            }
            if t < t2 {
                // dual-only step: remove the blocking constraint and retry
                let j = drop_idx.expect("finite t1 implies a blocking row");
                active.remove(j);
                duals.remove(j);
                continue;
            }
            active.push(p);
            duals.push(u_p);
            continue 'outer;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    q: &DMatrix<f64>,
    a: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    x: DVector<f64>,
    active: &[usize],
    duals: &[f64],
    status: QpStatus,
    iterations: usize,
) -> QpSolution {
    // KKT residual: stationarity with the recovered multipliers, primal
    // feasibility and complementary slackness.
    let mut grad = q * &x + a;
    let mut mu = DVector::zeros(g.nrows());
    for (&ci, &ui) in active.iter().zip(duals) {
        mu[ci] = ui;
        grad += g.row(ci).transpose() * ui;
    }
    let stationarity = grad.amax();
    let slack = h - g * &x;
    let mut primal = 0.0f64;
    let mut compl = 0.0f64;
    for i in 0..g.nrows() {
        primal = primal.max((-slack[i]).max(0.0));
        compl = compl.max((mu[i] * slack[i]).abs());
    }
    let kkt = if status == QpStatus::Infeasible {
        f64::INFINITY
    } else {
        stationarity.max(primal).max(compl)
    };
    QpSolution {
        x,
        status,
        kkt_residual: kkt,
        active_set_size: active.len(),
        iterations,
    }
}

/// Projected-gradient reference solver for box-constrained QPs
/// (`lo <= x <= hi`), run to convergence. Test oracle only: slow but
/// independent of the active-set path.
pub fn projected_gradient_box(
    q: &DMatrix<f64>,
    a: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    iters: usize,
) -> DVector<f64> {
    let n = q.nrows();
    // step from the largest eigenvalue (power iteration)
    let mut v = DVector::from_element(n, 1.0).normalize();
    for _ in 0..200 {
        v = (q * &v).normalize();
    }
    let lip = (q * &v).norm();
    let step = 1.0 / (lip * 1.01);
    let mut x = DVector::zeros(n);
    for i in 0..n {
        x[i] = 0.5 * (lo[i] + hi[i]);
    }
    for _ in 0..iters {
        let grad = q * &x + a;
        x -= step * grad;
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    }
    x
}

/// Stack box bounds into `G x <= h` rows.
pub fn box_rows(lo: &DVector<f64>, hi: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = lo.len();
    let mut g = DMatrix::zeros(2 * n, n);
    let mut h = DVector::zeros(2 * n);
    for i in 0..n {
        g[(i, i)] = 1.0;
        h[i] = hi[i];
        g[(n + i, i)] = -1.0;
        h[n + i] = -lo[i];
    }
    (g, h)
}
