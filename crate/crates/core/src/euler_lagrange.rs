//! First-order stationarity diagnostics for delay variational problems.
//!
//! Along a candidate trajectory, define
//!
//! * `p(t)`: the cumulative of the segment differential at `0` (its full
//!   mass);
//! * `advance(t)`: the integral over `s` in `[t, min(t+r, T)]` of the
//!   cumulative of `d2[s]` evaluated at `t - s` (a coupling to *future*
//!   times, the mirror image of the delay);
//! * `q(t) = d3[t] - advance(t)`.
//!
//! The trajectory satisfies the first-order condition in integral form
//! exactly when `q(t) - integral of p over [0, t]` is constant in `t`. The
//! free constant is estimated as the grid mean, and the reported residual is
//! the oscillation around it, which vanishes iff the condition holds with
//! some constant.
//!
//! The advance integrand jumps where `t - s` crosses an atom and kinks where
//! it crosses a density grid node; quadrature panels split there, and panel
//! edges are evaluated by one-sided limits of the cumulative so that
//! atom-only data is integrated exactly. In particular, a measure carrying
//! only an atom at `0` has a vanishing advance integral, which reduces the
//! condition to its classical undelayed form.

use crate::criterion::{directional_derivative, mass_at};
use crate::measures::{Covector, PanelSide};
use crate::problem::DelayLagrangian;
use crate::quadrature::{panel_edges, QuadratureRule};
use crate::scalar::{count, lit, Real};
use crate::trajectory::{Perturbation, Trajectory};

/// Stationarity diagnostics on the node grid.
#[derive(Debug, Clone)]
pub struct ElReport<T> {
    /// Node times.
    pub times: Vec<T>,
    /// `p(t_j)`: full mass of the segment differential.
    pub mass: Vec<Covector<T>>,
    /// `q(t_j) = d3[t_j] - advance(t_j)`.
    pub q: Vec<Covector<T>>,
    /// `advance(t_j)`.
    pub advance: Vec<Covector<T>>,
    /// Running integral of `p` up to each node.
    pub mass_integral: Vec<Covector<T>>,
    /// Grid mean of `q - mass_integral`: the estimated free constant.
    pub constant: Covector<T>,
    /// Max over nodes of the dual norm of `q - mass_integral - constant`.
    pub residual_osc: T,
    /// Normalized weak-form residuals per basis element, when computed.
    pub weak_residuals: Vec<(usize, T)>,
}

impl<T: Real> ElReport<T> {
    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    /// Residual covector `q(t_j) - P(t_j) - c` at node `j`.
    pub fn residual_at(&self, j: usize) -> Covector<T> {
        let mut r = self.q[j].clone();
        r.axpy(-T::one(), &self.mass_integral[j]);
        r.axpy(-T::one(), &self.constant);
        r
    }
}

/// The advance integral at time `t`: quadrature over `s` in
/// `[t, min(t+r, T)]` of the cumulative of `d2[s]` at `t - s`. Empty at
/// `t = T`.
pub fn advance_integral<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    x: &Trajectory<T>,
    t: T,
    rule: &QuadratureRule<T>,
) -> Covector<T> {
    let dim = problem.dim();
    let horizon = problem.horizon();
    let upper = (t + problem.delay()).min(horizon);
    if upper - t <= horizon * lit(1e-14) {
        return Covector::zeros(dim);
    }
    // Split where t - s crosses an atom or a density grid node.
    let splits: Vec<T> = problem
        .d2_breakpoints()
        .into_iter()
        .map(|theta| t - theta)
        .collect();
    let nodes = x.node_times();
    let mut all_edges = nodes.clone();
    all_edges.extend(splits);
    let edges = panel_edges(&all_edges, rule.breakpoints(), t, upper);

    let mut acc = Covector::zeros(dim);
    let sub = rule.subsamples();
    let third = lit::<T>(1.0 / 3.0);
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let h = (b - a) / count::<T>(sub);
        for i in 0..=sub {
            let (s, side) = if i == 0 {
                (a, PanelSide::Start)
            } else if i == sub {
                (b, PanelSide::End)
            } else {
                (a + h * count(i), PanelSide::Interior)
            };
            let measure = problem.d2(s, &x.segment(s), &x.derivative(s));
            let theta = t - s;
            // Inside a panel, theta decreases as s grows: the interior limit
            // at the panel start comes from below, at the panel end from
            // above.
            let value = match side {
                PanelSide::Start => measure.cumulative_left_limit(theta),
                PanelSide::End => measure.cumulative_right_limit(theta),
                PanelSide::Interior => measure.cumulative(theta),
            };
            let coeff = if i == 0 || i == sub {
                T::one()
            } else if i % 2 == 1 {
                lit(4.0)
            } else {
                lit(2.0)
            };
            acc.axpy(coeff * h * third, &value);
        }
    }
    acc
}

/// Full stationarity data on the node grid. `weak_residuals` is left empty;
/// see [`weak_stationarity`].
pub fn el_data<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    x: &Trajectory<T>,
    rule: &QuadratureRule<T>,
) -> ElReport<T> {
    let dim = problem.dim();
    let times = x.node_times();
    let n = x.intervals();

    let mass: Vec<Covector<T>> = times.iter().map(|&t| mass_at(problem, x, t)).collect();
    let advance: Vec<Covector<T>> = times
        .iter()
        .map(|&t| advance_integral(problem, x, t, rule))
        .collect();
    let q: Vec<Covector<T>> = times
        .iter()
        .zip(&advance)
        .map(|(&t, adv)| {
            let mut v = problem.d3(t, &x.segment(t), &x.derivative(t));
            v.axpy(-T::one(), adv);
            v
        })
        .collect();

    // Running integral of p by per-interval composite Simpson.
    let sub = rule.subsamples();
    let third = lit::<T>(1.0 / 3.0);
    let mut mass_integral = Vec::with_capacity(n + 1);
    let mut running = Covector::zeros(dim);
    mass_integral.push(running.clone());
    for j in 0..n {
        let (a, b) = (times[j], times[j + 1]);
        let h = (b - a) / count::<T>(sub);
        for i in 0..=sub {
            let t = if i == sub { b } else { a + h * count(i) };
            let value = if i == 0 {
                mass[j].clone()
            } else if i == sub {
                mass[j + 1].clone()
            } else {
                mass_at(problem, x, t)
            };
            let coeff = if i == 0 || i == sub {
                T::one()
            } else if i % 2 == 1 {
                lit(4.0)
            } else {
                lit(2.0)
            };
            running.axpy(coeff * h * third, &value);
        }
        mass_integral.push(running.clone());
    }

    // Least-squares constant: the grid mean of q - P.
    let mut constant = Covector::zeros(dim);
    for (qj, pj) in q.iter().zip(&mass_integral) {
        constant.axpy(T::one(), qj);
        constant.axpy(-T::one(), pj);
    }
    constant = constant.scaled(T::one() / count::<T>(n + 1));

    let mut residual_osc = T::zero();
    for (qj, pj) in q.iter().zip(&mass_integral) {
        let mut r = qj.clone();
        r.axpy(-T::one(), pj);
        r.axpy(-T::one(), &constant);
        residual_osc = residual_osc.max(r.dual_norm());
    }

    ElReport {
        times,
        mass,
        q,
        advance,
        mass_integral,
        constant,
        residual_osc,
        weak_residuals: Vec::new(),
    }
}

/// Weak-form stationarity: the largest `|DJ(x) . h_i| / norm(h_i)` over the
/// basis, with the per-element values.
pub struct WeakStationarity<T> {
    pub max_normalized: T,
    pub per_basis: Vec<T>,
}

pub fn weak_stationarity<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    x: &Trajectory<T>,
    basis: &[Perturbation<T>],
    rule: &QuadratureRule<T>,
) -> WeakStationarity<T> {
    let mut per_basis = Vec::with_capacity(basis.len());
    let mut max_normalized = T::zero();
    for h in basis {
        let raw = directional_derivative(problem, x, h, rule).abs();
        let norm = h.norm();
        let normalized = if norm > T::zero() { raw / norm } else { raw };
        max_normalized = max_normalized.max(normalized);
        per_basis.push(normalized);
    }
    WeakStationarity {
        max_normalized,
        per_basis,
    }
}

/// Both sides of the order-swap identity
///
/// `integral of d2[t] . h_t  =  integral of p(t) . h(t)
///    - integral of advance(t) . h'(t)`
///
/// over `[0, T]`, each by its own quadrature. The gap bounds the quadrature
/// error; the identity is exact in the continuum. (The sign is forced by the
/// per-time parts integration together with `q = d3 - advance`: for an atom
/// at `-r` with unit weight, the left side is the integral of `h(t - r)`,
/// and only the minus reproduces it.)
pub fn fubini_identity_check<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    x: &Trajectory<T>,
    h: &Perturbation<T>,
    rule: &QuadratureRule<T>,
) -> (T, T) {
    let horizon = problem.horizon();
    let nodes = x.node_times();

    // Rich breakpoint set: junction crossings and advance-exit times for
    // every atom, the truncation time, and every node-crossing time of
    // every atom (the direction's curvature jumps at nodes).
    let atom_locations = problem.d2_atom_locations();
    let mut extra: Vec<T> = Vec::new();
    extra.push(horizon - problem.delay());
    for &theta in &atom_locations {
        extra.push(-theta);
        extra.push(horizon + theta);
        for &tj in &nodes {
            let crossing = tj - theta;
            if crossing > T::zero() && crossing < horizon {
                extra.push(crossing);
            }
        }
    }
    // The two sides are independent quadratures of quantities with
    // derivative jumps; quadruple the subsample count so the reported gap
    // reflects the identity, not the ambient rule's truncation.
    let refined = QuadratureRule::new(rule.subsamples() * 4)
        .expect("validated subsamples")
        .with_breakpoints(rule.breakpoints().iter().copied())
        .with_breakpoints(extra);

    let lhs = refined.integrate(&nodes, T::zero(), horizon, |t| {
        let seg = x.segment(t);
        let velocity = x.derivative(t);
        problem.d2(t, &seg, &velocity).pair(&h.segment(t))
    });

    let running = refined.integrate(&nodes, T::zero(), horizon, |t| {
        mass_at(problem, x, t).apply(&h.value(t))
    });
    let advance_part = refined.integrate(&nodes, T::zero(), horizon, |t| {
        advance_integral(problem, x, t, rule).apply(&h.derivative(t))
    });

    (lhs, running - advance_part)
}
