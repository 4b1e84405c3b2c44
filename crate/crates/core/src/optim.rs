//! Small bounded optimizers: a projected quasi-Newton ascent with
//! backtracking for smooth likelihood surfaces, and a derivative-free
//! simplex search for the center-placement objective. Problem dimensions
//! here are tiny (1 to ~10), so dense updates are fine.

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct AscentOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub converged: bool,
    pub iters: usize,
}

fn clamp_into<T: Scalar>(x: &mut [T], lo: &[T], hi: &[T]) {
    for i in 0..x.len() {
        x[i] = x[i].max(lo[i]).min(hi[i]);
    }
}

/// Infinity norm of the gradient with components pointing out of the box
/// zeroed at active bounds.
fn projected_grad_norm<T: Scalar>(x: &[T], g: &[T], lo: &[T], hi: &[T]) -> T {
    let mut m = T::zero();
    for i in 0..x.len() {
        let blocked_low = x[i] <= lo[i] && g[i] < T::zero();
        let blocked_high = x[i] >= hi[i] && g[i] > T::zero();
        if !(blocked_low || blocked_high) {
            m = m.max(g[i].abs());
        }
    }
    m
}

/// Maximizes a smooth objective over a box with a BFGS-style inverse
/// Hessian and a backtracking line search. The objective returns `None`
/// for points it cannot evaluate (for example a failed factorization),
/// which the line search treats as a rejected step.
pub fn maximize_projected_ascent<T, F>(
    f: &mut F,
    x0: &[T],
    lo: &[T],
    hi: &[T],
    max_iters: usize,
    grad_tol: T,
) -> Option<AscentOutcome<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Option<(T, Vec<T>)>,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    clamp_into(&mut x, lo, hi);
    let (mut val, mut grad) = f(&x)?;

    // inverse Hessian approximation, dense row-major
    let mut h = vec![T::zero(); d * d];
    let reset = |h: &mut Vec<T>| {
        h.iter_mut().for_each(|v| *v = T::zero());
        for i in 0..d {
            h[i * d + i] = T::one();
        }
    };
    reset(&mut h);

    let mut iters = 0;
    let mut converged = false;
    while iters < max_iters {
        iters += 1;
        if projected_grad_norm(&x, &grad, lo, hi) < grad_tol {
            converged = true;
            break;
        }
        // ascent direction H g
        let mut dir = vec![T::zero(); d];
        for i in 0..d {
            let mut s = T::zero();
            for j in 0..d {
                s = s + h[i * d + j] * grad[j];
            }
            dir[i] = s;
        }
        // guard against a non-ascent direction from a stale H
        let slope = crate::linalg::dot(&dir, &grad);
        if !(slope > T::zero()) {
            dir.copy_from_slice(&grad);
            reset(&mut h);
        }

        let c1 = T::of(1e-4);
        // Near the maximum the remaining objective gain drops below the
        // evaluation noise of `f` (rounding amplified by the conditioning of
        // whatever `f` computes) while the gradient is still above tolerance.
        // Function values locate an optimum only to sqrt(eps) precision, the
        // gradient to full precision, so a step whose value change sits inside
        // a sqrt(eps)-scale band is still admissible when it at least halves
        // the projected gradient.
        let polish_slack = (val.abs() + T::one()) * T::epsilon().sqrt();
        let g_norm = projected_grad_norm(&x, &grad, lo, hi);
        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<T> = x.iter().zip(&dir).map(|(&a, &b)| a + step * b).collect();
            clamp_into(&mut xn, lo, hi);
            if xn == x {
                break;
            }
            if let Some((vn, gn)) = f(&xn) {
                let gain: T = xn
                    .iter()
                    .zip(&x)
                    .zip(&grad)
                    .fold(T::zero(), |acc, ((&a, &b), &g)| acc + (a - b) * g);
                let uphill = vn >= val + c1 * gain.max(T::zero()) && vn > val;
                let polishing = vn >= val - polish_slack
                    && projected_grad_norm(&xn, &gn, lo, hi) < T::of(0.5) * g_norm;
                if uphill || polishing {
                    accepted = Some((xn, vn, gn));
                    break;
                }
            }
            step = step * T::of(0.5);
        }
        let Some((xn, vn, gn)) = accepted else {
            // no admissible uphill step left
            converged = projected_grad_norm(&x, &grad, lo, hi) < grad_tol;
            break;
        };

        let clamped_before: Vec<bool> = x
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&v, (&l, &u))| v <= l || v >= u)
            .collect();
        let clamped_after: Vec<bool> = xn
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&v, (&l, &u))| v <= l || v >= u)
            .collect();

        let s: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let yv: Vec<T> = gn.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        let sy = crate::linalg::dot(&s, &yv);

        if clamped_before != clamped_after {
            reset(&mut h);
        } else if sy < -T::of(1e-12) {
            // BFGS update on the inverse Hessian for a maximization:
            // with y = g_new - g_old, s^T y < 0 along an ascent path
            let rho = T::one() / sy;
            let mut hy = vec![T::zero(); d];
            for i in 0..d {
                let mut acc = T::zero();
                for j in 0..d {
                    acc = acc + h[i * d + j] * yv[j];
                }
                hy[i] = acc;
            }
            let yhy = crate::linalg::dot(&yv, &hy);
            for i in 0..d {
                for j in 0..d {
                    let upd = (s[i] * hy[j] + hy[i] * s[j]) * rho
                        - s[i] * s[j] * rho * rho * yhy
                        + s[i] * s[j] * rho;
                    h[i * d + j] = h[i * d + j] - upd;
                }
            }
        }

        x = xn;
        val = vn;
        grad = gn;
    }

    Some(AscentOutcome {
        x,
        value: val,
        converged,
        iters,
    })
}

/// Maximizes a (possibly non-smooth) objective over a box with a
/// Nelder-Mead simplex, clamping every trial point into the box. Stops
/// after `max_evals` objective evaluations or when the simplex collapses.
pub fn maximize_simplex<T, F>(
    f: &mut F,
    x0: &[T],
    lo: &[T],
    hi: &[T],
    max_evals: usize,
) -> (Vec<T>, T)
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let d = x0.len();
    let mut evals = 0;
    let mut eval = |p: &[T], evals: &mut usize| {
        *evals += 1;
        f(p)
    };

    // initial simplex: x0 plus a 5%-of-box step per dimension
    let mut pts: Vec<Vec<T>> = Vec::with_capacity(d + 1);
    let mut start = x0.to_vec();
    clamp_into(&mut start, lo, hi);
    pts.push(start.clone());
    for i in 0..d {
        let mut p = start.clone();
        let w = (hi[i] - lo[i]) * T::of(0.05);
        let step = if w > T::zero() { w } else { T::of(0.05) };
        p[i] = if p[i] + step <= hi[i] {
            p[i] + step
        } else {
            p[i] - step
        };
        clamp_into(&mut p, lo, hi);
        pts.push(p);
    }
    let mut vals: Vec<T> = pts.iter().map(|p| eval(p, &mut evals)).collect();

    let (alpha, gamma, beta, sigma) = (T::one(), T::of(2.0), T::of(0.5), T::of(0.5));
    while evals < max_evals {
        // order descending by value (we maximize)
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
        let best = order[0];
        let worst = order[d];
        let second_worst = order[d - 1];

        let spread = (vals[best] - vals[worst]).abs();
        if spread < T::of(1e-12) {
            break;
        }

        let mut centroid = vec![T::zero(); d];
        for &i in order.iter().take(d) {
            for j in 0..d {
                centroid[j] = centroid[j] + pts[i][j];
            }
        }
        let inv = T::one() / T::of_usize(d);
        centroid.iter_mut().for_each(|v| *v = *v * inv);

        let mk = |coef: T, base: &[T], away: &[T]| -> Vec<T> {
            let mut p: Vec<T> = base
                .iter()
                .zip(away)
                .map(|(&c, &w)| c + coef * (c - w))
                .collect();
            clamp_into(&mut p, lo, hi);
            p
        };

        let refl = mk(alpha, &centroid, &pts[worst]);
        let v_refl = eval(&refl, &mut evals);
        if v_refl > vals[best] {
            let exp_pt = mk(gamma, &centroid, &pts[worst]);
            let v_exp = eval(&exp_pt, &mut evals);
            if v_exp > v_refl {
                pts[worst] = exp_pt;
                vals[worst] = v_exp;
            } else {
                pts[worst] = refl;
                vals[worst] = v_refl;
            }
        } else if v_refl > vals[second_worst] {
            pts[worst] = refl;
            vals[worst] = v_refl;
        } else {
            let contr = mk(-beta, &centroid, &pts[worst]);
            let v_contr = eval(&contr, &mut evals);
            if v_contr > vals[worst] {
                pts[worst] = contr;
                vals[worst] = v_contr;
            } else {
                // shrink toward the best vertex
                let best_pt = pts[best].clone();
                for i in 0..pts.len() {
                    if i == best {
                        continue;
                    }
                    for j in 0..d {
                        pts[i][j] = best_pt[j] + sigma * (pts[i][j] - best_pt[j]);
                    }
                    vals[i] = eval(&pts[i].clone(), &mut evals);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..pts.len() {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    (pts.swap_remove(best), vals[best])
}
