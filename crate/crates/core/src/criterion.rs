//! Evaluation of the cost functional
//! `J(x) = integral over [0, T] of F(t, x_t, x'(t))` and of its directional
//! derivative
//! `DJ(x) . h = integral of (d2 . h_t + d3 . h'(t))`,
//! discretized by the node-grid Simpson rule.
//!
//! The gradient over a perturbation basis reuses one `(d2, d3)` evaluation
//! per quadrature point; component `i` is arithmetically identical to
//! `directional_derivative` on `basis[i]` because both walk the same point
//! list in the same order.

use crate::measures::Covector;
use crate::problem::DelayLagrangian;
use crate::quadrature::QuadratureRule;
use crate::scalar::Real;
use crate::trajectory::{Perturbation, Trajectory};

/// Breakpoints the node-grid rule should register for this problem: the
/// times where a `d2` atom location crosses the history junction, and the
/// advance truncation time `T - r`.
pub fn problem_breakpoints<T: Real>(problem: &(impl DelayLagrangian<T> + ?Sized)) -> Vec<T> {
    let horizon = problem.horizon();
    let mut pts: Vec<T> = problem
        .d2_atom_locations()
        .into_iter()
        .map(|theta| -theta)
        .collect();
    pts.push(horizon - problem.delay());
    pts.retain(|&t| t > T::zero() && t < horizon);
    pts
}

/// Node-grid Simpson rule with the standard breakpoints for `problem`.
pub fn rule_for<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    subsamples: usize,
) -> QuadratureRule<T> {
    QuadratureRule::new(subsamples)
        .expect("subsample count is validated by callers")
        .with_breakpoints(problem_breakpoints(problem))
}

/// Quadrature of `t -> F(t, x_t, x'(t))` over `[0, T]`.
pub fn evaluate_j<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    x: &Trajectory<T>,
    rule: &QuadratureRule<T>,
) -> T {
    let nodes = x.node_times();
    rule.integrate(&nodes, T::zero(), problem.horizon(), |t| {
        problem.eval(t, &x.segment(t), &x.derivative(t))
    })
}

/// Quadrature of `t -> d2[t] . h_t + d3[t] . h'(t)` for a direction `h`
/// vanishing on the history window and at the horizon.
pub fn directional_derivative<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    x: &Trajectory<T>,
    h: &Perturbation<T>,
    rule: &QuadratureRule<T>,
) -> T {
    let nodes = x.node_times();
    let pts = rule.points(&nodes, T::zero(), problem.horizon());
    let mut acc = T::zero();
    for (t, w) in pts {
        let seg = x.segment(t);
        let velocity = x.derivative(t);
        let measure = problem.d2(t, &seg, &velocity);
        let d3 = problem.d3(t, &seg, &velocity);
        acc = acc + w * (measure.pair(&h.segment(t)) + d3.apply(&h.derivative(t)));
    }
    acc
}

/// Directional derivatives along every basis element, sharing the `(d2, d3)`
/// evaluations across the basis. Component `i` equals
/// `directional_derivative(problem, x, &basis[i], rule)` exactly.
pub fn gradient<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    x: &Trajectory<T>,
    basis: &[Perturbation<T>],
    rule: &QuadratureRule<T>,
) -> Vec<T> {
    let nodes = x.node_times();
    let pts = rule.points(&nodes, T::zero(), problem.horizon());
    let mut acc = vec![T::zero(); basis.len()];
    for (t, w) in pts {
        let seg = x.segment(t);
        let velocity = x.derivative(t);
        let measure = problem.d2(t, &seg, &velocity);
        let d3 = problem.d3(t, &seg, &velocity);
        for (g, h) in acc.iter_mut().zip(basis) {
            *g = *g + w * (measure.pair(&h.segment(t)) + d3.apply(&h.derivative(t)));
        }
    }
    acc
}

/// The covector `d2[t]` cumulated at `0`: the full mass of the segment
/// differential, and the integrand of the running term of the stationarity
/// condition.
pub fn mass_at<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    x: &Trajectory<T>,
    t: T,
) -> Covector<T> {
    problem
        .d2(t, &x.segment(t), &x.derivative(t))
        .total_mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::PointDelayLagrangian;
    use crate::trajectory::{affine_initial_guess, basis_perturbations, HistoryFunction};

    fn speed_cost(delay: f64, horizon: f64) -> PointDelayLagrangian<f64> {
        // F = v^2 / 2
        PointDelayLagrangian::new(
            1,
            delay,
            horizon,
            |_, _, _, v| 0.5 * v[0] * v[0],
            |_, _, _, _| vec![0.0],
            None,
            |_, _, _, v| vec![v[0]],
        )
        .unwrap()
    }

    fn ramp(delay: f64, horizon: f64, intervals: usize) -> Trajectory<f64> {
        let hist = HistoryFunction::constant(delay, vec![0.0]).unwrap();
        Trajectory::from_fn(hist, horizon, intervals, |t| vec![t], |_| vec![1.0]).unwrap()
    }

    #[test]
    fn constant_integrand_gives_horizon() {
        let p = PointDelayLagrangian::new(
            1,
            0.5,
            2.0,
            |_, _, _, _| 1.0,
            |_, _, _, _| vec![0.0],
            None,
            |_, _, _, _| vec![0.0],
        )
        .unwrap();
        let x = ramp(0.5, 2.0, 8);
        let rule = rule_for(&p, 4);
        assert!((evaluate_j(&p, &x, &rule) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quadratic_speed_cost_of_the_ramp() {
        // F = v^2 / 2 along x(t) = t on [0, 1]: J = 1/2.
        let p = speed_cost(0.5, 1.0);
        let x = ramp(0.5, 1.0, 16);
        let rule = rule_for(&p, 4);
        assert!((evaluate_j(&p, &x, &rule) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn pure_velocity_integrand_is_the_endpoint_gap() {
        // F = v: J = x(T) - x(0) = 1 along the unit ramp.
        let p = PointDelayLagrangian::new(
            1,
            0.5,
            1.0,
            |_, _, _, v| v[0],
            |_, _, _, _| vec![0.0],
            None,
            |_, _, _, _| vec![1.0],
        )
        .unwrap();
        let x = ramp(0.5, 1.0, 8);
        let rule = rule_for(&p, 4);
        assert!((evaluate_j(&p, &x, &rule) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_direction_has_zero_derivative() {
        let p = speed_cost(0.5, 1.0);
        let x = ramp(0.5, 1.0, 8);
        let rule = rule_for(&p, 4);
        let h = Perturbation::zero(1, 1.0, 8);
        assert_eq!(directional_derivative(&p, &x, &h, &rule), 0.0);
    }

    #[test]
    fn straight_line_is_stationary_for_the_speed_cost() {
        // DJ(x) . h = integral of h' = h(T) - h(0) = 0 for every admissible h.
        let p = speed_cost(0.5, 1.0);
        let x = ramp(0.5, 1.0, 8);
        let rule = rule_for(&p, 4);
        for h in basis_perturbations::<f64>(8, 1, 1.0).unwrap() {
            let d = directional_derivative(&p, &x, &h, &rule);
            assert!(d.abs() < 1e-13, "non-stationary direction: {d}");
        }
    }

    #[test]
    fn quadratic_state_cost_matches_hand_expansion_and_difference() {
        // F = phi(0)^2 along x = c: DJ(x) . h = integral of 2 c h(t).
        let c = 0.7;
        let p = PointDelayLagrangian::new(
            1,
            0.25,
            1.0,
            |_, a, _, _| a[0] * a[0],
            |_, a, _, _| vec![2.0 * a[0]],
            None,
            |_, _, _, _| vec![0.0],
        )
        .unwrap();
        let hist = HistoryFunction::constant(0.25, vec![c]).unwrap();
        let x = Trajectory::from_fn(hist, 1.0, 8, |_| vec![c], |_| vec![0.0]).unwrap();
        let rule = rule_for(&p, 4);
        let basis = basis_perturbations::<f64>(8, 1, 1.0).unwrap();
        let h = &basis[3];
        let analytic = directional_derivative(&p, &x, h, &rule);
        // Independent evaluation of the expansion: 2c * integral of h.
        let nodes = x.node_times();
        let expected = rule.integrate(&nodes, 0.0, 1.0, |t| 2.0 * c * h.value(t)[0]);
        assert!((analytic - expected).abs() < 1e-13);
        // Central difference of J in the same direction.
        let eps = 1e-5;
        let plus = evaluate_j(&p, &x.offset_by(h, eps), &rule);
        let minus = evaluate_j(&p, &x.offset_by(h, -eps), &rule);
        let fd = (plus - minus) / (2.0 * eps);
        assert!((analytic - fd).abs() < 1e-9, "gap {}", (analytic - fd).abs());
    }

    #[test]
    fn gradient_vanishes_at_the_classical_minimizer() {
        let p = speed_cost(0.25, 1.0);
        let x = ramp(0.25, 1.0, 16);
        let rule = rule_for(&p, 4);
        let basis = basis_perturbations::<f64>(16, 1, 1.0).unwrap();
        let g = gradient(&p, &x, &basis, &rule);
        for v in g {
            assert!(v.abs() <= 1e-10, "gradient component {v}");
        }
    }

    #[test]
    fn gradient_components_equal_directional_derivatives_exactly() {
        let p = PointDelayLagrangian::new(
            1,
            0.5,
            1.0,
            |_, a, b, v| 0.5 * v[0] * v[0] + 0.5 * b[0] * b[0] + 0.2 * a[0] * v[0],
            |_, _, _, v| vec![0.2 * v[0]],
            Some(std::sync::Arc::new(|_, _: &[f64], b: &[f64], _: &[f64]| {
                vec![b[0]]
            })),
            |_, a, _, v| vec![v[0] + 0.2 * a[0]],
        )
        .unwrap();
        let hist = HistoryFunction::constant(0.5, vec![1.0]).unwrap();
        let x = affine_initial_guess(&hist, &[2.0], 1.0, 8).unwrap();
        let rule = rule_for(&p, 4);
        let basis = basis_perturbations::<f64>(8, 1, 1.0).unwrap();
        let g = gradient(&p, &x, &basis, &rule);
        for (i, h) in basis.iter().enumerate() {
            assert_eq!(g[i], directional_derivative(&p, &x, h, &rule));
        }
    }

    #[test]
    fn gradient_scales_linearly_with_the_problem() {
        let alpha = 3.5;
        let base = speed_cost(0.5, 1.0);
        let scaled = PointDelayLagrangian::new(
            1,
            0.5,
            1.0,
            move |_, _, _, v: &[f64]| alpha * 0.5 * v[0] * v[0],
            |_, _, _, _| vec![0.0],
            None,
            move |_, _, _, v: &[f64]| vec![alpha * v[0]],
        )
        .unwrap();
        let hist = HistoryFunction::constant(0.5, vec![0.0]).unwrap();
        let mut x = affine_initial_guess(&hist, &[1.0], 1.0, 8).unwrap();
        let basis = basis_perturbations::<f64>(8, 1, 1.0).unwrap();
        // Move off the stationary point so the gradient is nonzero.
        x = x.offset_by(&basis[2], 0.3);
        let rule = rule_for(&base, 4);
        let g0 = gradient(&base, &x, &basis, &rule);
        let g1 = gradient(&scaled, &x, &basis, &rule);
        for (a, b) in g0.iter().zip(&g1) {
            assert!((alpha * a - b).abs() < 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn directional_derivative_is_linear_in_the_direction() {
        let p = speed_cost(0.5, 1.0);
        let hist = HistoryFunction::constant(0.5, vec![0.0]).unwrap();
        let mut x = affine_initial_guess(&hist, &[1.0], 1.0, 8).unwrap();
        let basis = basis_perturbations::<f64>(8, 1, 1.0).unwrap();
        x = x.offset_by(&basis[5], -0.4);
        let rule = rule_for(&p, 4);
        let (a, b) = (1.7, -0.6);
        let combo = basis[2].scaled(a).plus_scaled(b, &basis[9]);
        let direct = directional_derivative(&p, &x, &combo, &rule);
        let split = a * directional_derivative(&p, &x, &basis[2], &rule)
            + b * directional_derivative(&p, &x, &basis[9], &rule);
        assert!((direct - split).abs() < 1e-12);
    }

    #[test]
    fn quadrature_error_drops_at_fourth_order_in_subsamples() {
        // Smooth integrand (no history crossing: constant history, smooth
        // trajectory): halving the step should cut the error ~16x.
        let p = PointDelayLagrangian::new(
            1,
            0.5,
            1.0,
            |t, a, b, v| (t + a[0]).sin() * b[0] + v[0] * v[0] * (1.0 + t),
            |t, a, b, _| vec![(t + a[0]).cos() * b[0]],
            Some(std::sync::Arc::new(|t: f64, a: &[f64], _: &[f64], _: &[f64]| {
                vec![(t + a[0]).sin()]
            })),
            |t, _, _, v| vec![2.0 * v[0] * (1.0 + t)],
        )
        .unwrap();
        let hist = HistoryFunction::from_rule(0.5, 1, |theta: f64| vec![(theta).exp()]).unwrap();
        let x = Trajectory::from_fn(hist, 1.0, 8, |t: f64| vec![(t).exp()], |t: f64| {
            vec![(t).exp()]
        })
        .unwrap();
        let reference = evaluate_j(&p, &x, &rule_for(&p, 64));
        let e2 = (evaluate_j(&p, &x, &rule_for(&p, 2)) - reference).abs();
        let e4 = (evaluate_j(&p, &x, &rule_for(&p, 4)) - reference).abs();
        assert!(e2 / e4 > 10.0, "observed ratio {}", e2 / e4);
    }
}
