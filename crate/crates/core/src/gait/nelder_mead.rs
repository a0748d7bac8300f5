//! Derivative-free simplex minimizer. The tuning objective runs through an
//! event-driven hybrid simulation, so gradients are unavailable and the
//! landscape is only piecewise smooth.

/// Result of one optimization run.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// Best objective after each evaluation (for convergence reports).
    pub history: Vec<f64>,
}

/// Nelder-Mead with standard coefficients. `scales` sets the initial simplex
/// edge per coordinate; the budget counts objective evaluations.
pub fn nelder_mead(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    scales: &[f64],
    max_evals: usize,
) -> MinimizeResult {
    let n = x0.len();
    assert_eq!(scales.len(), n);
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut evaluations = 0usize;
    let mut history = Vec::new();
    let mut eval = |x: &[f64], evaluations: &mut usize, history: &mut Vec<f64>, best: &mut f64| {
        let v = f(x);
        *evaluations += 1;
        if v < *best {
            *best = v;
        }
        history.push(*best);
        v
    };
    let mut best = f64::INFINITY;

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0, &mut evaluations, &mut history, &mut best);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += scales[i];
        let fx = eval(&x, &mut evaluations, &mut history, &mut best);
        simplex.push((x, fx));
    }

    while evaluations < max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let reflected: Vec<f64> = (0..n)
            .map(|j| centroid[j] + alpha * (centroid[j] - worst.0[j]))
            .collect();
        let f_r = eval(&reflected, &mut evaluations, &mut history, &mut best);
        if f_r < simplex[0].1 {
            // try expanding further
            let expanded: Vec<f64> = (0..n)
                .map(|j| centroid[j] + gamma * (reflected[j] - centroid[j]))
                .collect();
            let f_e = eval(&expanded, &mut evaluations, &mut history, &mut best);
            simplex[n] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
            continue;
        }
        if f_r < simplex[n - 1].1 {
            simplex[n] = (reflected, f_r);
            continue;
        }
        // contract toward the better of worst/reflected
        let (base, f_base) = if f_r < worst.1 {
            (&reflected, f_r)
        } else {
            (&worst.0, worst.1)
        };
        let contracted: Vec<f64> = (0..n)
            .map(|j| centroid[j] + rho * (base[j] - centroid[j]))
            .collect();
        let f_c = eval(&contracted, &mut evaluations, &mut history, &mut best);
        if f_c < f_base {
            simplex[n] = (contracted, f_c);
            continue;
        }
        // shrink toward the best vertex
        let best_x = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            for j in 0..n {
                vertex.0[j] = best_x[j] + sigma * (vertex.0[j] - best_x[j]);
            }
            vertex.1 = eval(&vertex.0, &mut evaluations, &mut history, &mut best);
            if evaluations >= max_evals {
                break;
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    MinimizeResult {
        x: simplex[0].0.clone(),
        f: simplex[0].1,
        evaluations,
        history,
    }
}
