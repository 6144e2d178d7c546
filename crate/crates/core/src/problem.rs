//! Problem definitions: the running cost `F(t, phi, v)` together with its
//! segment differential (supplied as a [`CovectorMeasure`]) and its velocity
//! differential (a [`Covector`]).
//!
//! Supported integrands factor their segment dependence through finitely many
//! point evaluations plus kernel-weighted integrals, which realizes every
//! measure shape the crate stores. Differentials are supplied, never derived
//! automatically; [`validate_d2`] and [`validate_d3`] cross-check them by
//! central finite differences.
//!
//! `eval`, `d2`, `d3` must be pure: problem values are shared immutably and
//! may be evaluated concurrently.

use std::sync::Arc;

use crate::error::{CoreError, CoreResult};
use crate::measures::{
    integrate_panels, Covector, CovectorMeasure, SegmentFn, DENSITY_SUBDIV,
};
use crate::quadrature::panel_edges;
use crate::scalar::{count, Real};

/// A running cost over segments and velocities.
pub trait DelayLagrangian<T: Real> {
    fn dim(&self) -> usize;

    /// Delay window length `r`.
    fn delay(&self) -> T;

    /// Final time `T`.
    fn horizon(&self) -> T;

    /// The integrand `F(t, phi, v)`.
    fn eval(&self, t: T, seg: &dyn SegmentFn<T>, velocity: &[T]) -> T;

    /// Segment differential at `(t, phi, v)` as a measure on `[-r, 0]`.
    fn d2(&self, t: T, seg: &dyn SegmentFn<T>, velocity: &[T]) -> CovectorMeasure<T>;

    /// Velocity differential at `(t, phi, v)`.
    fn d3(&self, t: T, seg: &dyn SegmentFn<T>, velocity: &[T]) -> Covector<T>;

    /// Atom locations of `d2`, fixed across `(t, phi, v)`; used to register
    /// quadrature breakpoints.
    fn d2_atom_locations(&self) -> Vec<T> {
        Vec::new()
    }

    /// Every location where the cumulative function of `d2` is non-smooth
    /// (atoms plus density grid nodes).
    fn d2_breakpoints(&self) -> Vec<T> {
        self.d2_atom_locations()
    }
}

type CoreFn<T> = Arc<dyn Fn(T, &[T], &[T], &[T]) -> T + Send + Sync>;
type GradFn<T> = Arc<dyn Fn(T, &[T], &[T], &[T]) -> Vec<T> + Send + Sync>;

/// Integrand whose segment dependence is through `phi(0)` and `phi(-r)`:
/// `F(t, phi, v) = L(t, phi(0), phi(-r), v)` with supplied partials. The
/// segment differential is one atom at `0` plus (when the delayed partial is
/// supplied) one atom at `-r`.
#[derive(Clone)]
pub struct PointDelayLagrangian<T> {
    dim: usize,
    delay: T,
    horizon: T,
    core: CoreFn<T>,
    grad_current: GradFn<T>,
    grad_delayed: Option<GradFn<T>>,
    grad_velocity: GradFn<T>,
}

impl<T: Real> PointDelayLagrangian<T> {
    /// Arguments of the core and its partials are `(t, a, b, v)` with
    /// `a = phi(0)` and `b = phi(-r)`. Pass `grad_delayed = None` when the
    /// core does not depend on `b`; the `-r` atom is then omitted entirely,
    /// which is the undelayed (classical) case.
    pub fn new(
        dim: usize,
        delay: T,
        horizon: T,
        core: impl Fn(T, &[T], &[T], &[T]) -> T + Send + Sync + 'static,
        grad_current: impl Fn(T, &[T], &[T], &[T]) -> Vec<T> + Send + Sync + 'static,
        grad_delayed: Option<GradFn<T>>,
        grad_velocity: impl Fn(T, &[T], &[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> CoreResult<Self> {
        check_window(delay, horizon)?;
        Ok(Self {
            dim,
            delay,
            horizon,
            core: Arc::new(core),
            grad_current: Arc::new(grad_current),
            grad_delayed,
            grad_velocity: Arc::new(grad_velocity),
        })
    }
}

impl<T: Real> DelayLagrangian<T> for PointDelayLagrangian<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn delay(&self) -> T {
        self.delay
    }

    fn horizon(&self) -> T {
        self.horizon
    }

    fn eval(&self, t: T, seg: &dyn SegmentFn<T>, velocity: &[T]) -> T {
        let a = seg.eval(T::zero());
        let b = seg.eval(-self.delay);
        (self.core)(t, &a, &b, velocity)
    }

    fn d2(&self, t: T, seg: &dyn SegmentFn<T>, velocity: &[T]) -> CovectorMeasure<T> {
        let a = seg.eval(T::zero());
        let b = seg.eval(-self.delay);
        let mut atoms = Vec::with_capacity(2);
        if let Some(gb) = &self.grad_delayed {
            atoms.push((-self.delay, Covector::new(gb(t, &a, &b, velocity))));
        }
        atoms.push((T::zero(), Covector::new((self.grad_current)(t, &a, &b, velocity))));
        CovectorMeasure::from_atoms(self.dim, self.delay, atoms)
            .expect("point-delay atoms are well-formed")
    }

    fn d3(&self, t: T, seg: &dyn SegmentFn<T>, velocity: &[T]) -> Covector<T> {
        let a = seg.eval(T::zero());
        let b = seg.eval(-self.delay);
        Covector::new((self.grad_velocity)(t, &a, &b, velocity))
    }

    fn d2_atom_locations(&self) -> Vec<T> {
        if self.grad_delayed.is_some() {
            vec![-self.delay, T::zero()]
        } else {
            vec![T::zero()]
        }
    }
}

/// Scalar piecewise-linear kernel on `[-r, 0]`, sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct Kernel<T> {
    delay: T,
    samples: Vec<T>,
}

impl<T: Real> Kernel<T> {
    pub fn from_samples(delay: T, samples: Vec<T>) -> CoreResult<Self> {
        if delay <= T::zero() {
            return Err(CoreError::NonPositiveHorizon {
                horizon: delay.to_f64().unwrap_or(f64::NAN),
            });
        }
        if samples.len() < 2 {
            return Err(CoreError::DensityTooShort { got: samples.len() });
        }
        Ok(Self { delay, samples })
    }

    /// Samples `k` on `intervals + 1` uniform grid points.
    pub fn from_rule(delay: T, intervals: usize, k: impl Fn(T) -> T) -> CoreResult<Self> {
        let samples = (0..=intervals)
            .map(|g| k(-delay + delay * count::<T>(g) / count::<T>(intervals)))
            .collect();
        Self::from_samples(delay, samples)
    }

    pub fn constant(delay: T, value: T, intervals: usize) -> CoreResult<Self> {
        Self::from_rule(delay, intervals, |_| value)
    }

    pub fn intervals(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn grid_nodes(&self) -> Vec<T> {
        (0..=self.intervals()).map(|g| self.node(g)).collect()
    }

    fn node(&self, g: usize) -> T {
        -self.delay + self.delay * count::<T>(g) / count::<T>(self.intervals())
    }

    pub fn value(&self, theta: T) -> T {
        let step = self.delay / count::<T>(self.intervals());
        let pos = (theta + self.delay) / step;
        let g = pos
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.intervals() - 1);
        let s = ((theta - self.node(g)) / step).max(T::zero()).min(T::one());
        self.samples[g] * (T::one() - s) + self.samples[g + 1] * s
    }

    /// `integral over [-r, 0] of k(theta) * seg(theta) d theta`, coordinate
    /// by coordinate, with the same panels and subdivision as measure
    /// pairing so kernel problems and their `d2` measures stay consistent to
    /// rounding.
    pub fn weighted_segment_integral(&self, seg: &dyn SegmentFn<T>, dim: usize) -> Vec<T> {
        let grid = self.grid_nodes();
        let edges = panel_edges(&grid, &seg.kinks(), -self.delay, T::zero());
        let mut out = vec![T::zero(); dim];
        for k in 0..dim {
            out[k] = integrate_panels(&edges, DENSITY_SUBDIV, |theta| {
                self.value(theta) * seg.eval(theta)[k]
            });
        }
        out
    }
}

/// Integrand with a distributed delay: `F(t, phi, v) = L(t, phi(0), w, v)`
/// where `w` is the kernel-weighted segment integral. The segment
/// differential is an atom at `0` plus the density `theta -> dL/dw * k(theta)`.
#[derive(Clone)]
pub struct DistributedDelayLagrangian<T> {
    dim: usize,
    delay: T,
    horizon: T,
    kernel: Kernel<T>,
    core: CoreFn<T>,
    grad_current: GradFn<T>,
    grad_weighted: GradFn<T>,
    grad_velocity: GradFn<T>,
}

impl<T: Real> DistributedDelayLagrangian<T> {
    /// Arguments of the core and its partials are `(t, a, w, v)`.
    pub fn new(
        dim: usize,
        delay: T,
        horizon: T,
        kernel: Kernel<T>,
        core: impl Fn(T, &[T], &[T], &[T]) -> T + Send + Sync + 'static,
        grad_current: impl Fn(T, &[T], &[T], &[T]) -> Vec<T> + Send + Sync + 'static,
        grad_weighted: impl Fn(T, &[T], &[T], &[T]) -> Vec<T> + Send + Sync + 'static,
        grad_velocity: impl Fn(T, &[T], &[T], &[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> CoreResult<Self> {
        check_window(delay, horizon)?;
        if kernel.delay != delay {
            return Err(CoreError::BadProblem(format!(
                "kernel window {} does not match problem delay {}",
                kernel.delay, delay
            )));
        }
        Ok(Self {
            dim,
            delay,
            horizon,
            kernel,
            core: Arc::new(core),
            grad_current: Arc::new(grad_current),
            grad_weighted: Arc::new(grad_weighted),
            grad_velocity: Arc::new(grad_velocity),
        })
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    fn stage(&self, seg: &dyn SegmentFn<T>) -> (Vec<T>, Vec<T>) {
        let a = seg.eval(T::zero());
        let w = self.kernel.weighted_segment_integral(seg, self.dim);
        (a, w)
    }
}

impl<T: Real> DelayLagrangian<T> for DistributedDelayLagrangian<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn delay(&self) -> T {
        self.delay
    }

    fn horizon(&self) -> T {
        self.horizon
    }

    fn eval(&self, t: T, seg: &dyn SegmentFn<T>, velocity: &[T]) -> T {
        let (a, w) = self.stage(seg);
        (self.core)(t, &a, &w, velocity)
    }

    fn d2(&self, t: T, seg: &dyn SegmentFn<T>, velocity: &[T]) -> CovectorMeasure<T> {
        let (a, w) = self.stage(seg);
        let atom = Covector::new((self.grad_current)(t, &a, &w, velocity));
        let gw = Covector::new((self.grad_weighted)(t, &a, &w, velocity));
        let samples: Vec<Covector<T>> = self
            .kernel
            .samples
            .iter()
            .map(|&k| gw.scaled(k))
            .collect();
        CovectorMeasure::new(
            self.dim,
            self.delay,
            vec![(T::zero(), atom)],
            Some(samples),
        )
        .expect("distributed-delay measure is well-formed")
    }

    fn d3(&self, t: T, seg: &dyn SegmentFn<T>, velocity: &[T]) -> Covector<T> {
        let (a, w) = self.stage(seg);
        Covector::new((self.grad_velocity)(t, &a, &w, velocity))
    }

    fn d2_atom_locations(&self) -> Vec<T> {
        vec![T::zero()]
    }

    fn d2_breakpoints(&self) -> Vec<T> {
        let mut pts = self.kernel.grid_nodes();
        pts.push(T::zero());
        pts.sort_by(|a, b| a.partial_cmp(b).expect("non-finite kernel node"));
        pts.dedup();
        pts
    }
}

fn check_window<T: Real>(delay: T, horizon: T) -> CoreResult<()> {
    if delay <= T::zero() || horizon <= T::zero() {
        return Err(CoreError::NonPositiveHorizon {
            horizon: delay.min(horizon).to_f64().unwrap_or(f64::NAN),
        });
    }
    if delay >= horizon {
        return Err(CoreError::BadProblem(format!(
            "delay r = {delay} must be smaller than the horizon T = {horizon}"
        )));
    }
    Ok(())
}

/// Segment `base + scale * direction`, used by the differential validators.
struct ShiftedSegment<'a, T> {
    base: &'a dyn SegmentFn<T>,
    direction: &'a dyn SegmentFn<T>,
    scale: T,
}

impl<T: Real> SegmentFn<T> for ShiftedSegment<'_, T> {
    fn eval(&self, theta: T) -> Vec<T> {
        self.base
            .eval(theta)
            .into_iter()
            .zip(self.direction.eval(theta))
            .map(|(b, d)| b + self.scale * d)
            .collect()
    }

    fn kinks(&self) -> Vec<T> {
        let mut pts = self.base.kinks();
        pts.extend(self.direction.kinks());
        pts
    }
}

/// Worst relative mismatch between `pair(d2, direction)` and the central
/// finite difference of `eval` along each supplied segment direction.
///
/// The relative error divides by `max(1, |analytic|, |difference|)`; a large
/// value is a finding about the supplied differentials, not a failure.
pub fn validate_d2<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    t: T,
    seg: &dyn SegmentFn<T>,
    velocity: &[T],
    directions: &[&dyn SegmentFn<T>],
    step: T,
) -> T {
    assert!(step > T::zero(), "finite-difference step must be positive");
    let measure = problem.d2(t, seg, velocity);
    let mut worst = T::zero();
    for dir in directions {
        let analytic = measure.pair(*dir);
        let plus = problem.eval(
            t,
            &ShiftedSegment {
                base: seg,
                direction: *dir,
                scale: step,
            },
            velocity,
        );
        let minus = problem.eval(
            t,
            &ShiftedSegment {
                base: seg,
                direction: *dir,
                scale: -step,
            },
            velocity,
        );
        let difference = (plus - minus) / (step + step);
        worst = worst.max(relative_gap(analytic, difference));
    }
    worst
}

/// Worst relative mismatch between `d3` and central finite differences of
/// `eval` along the velocity coordinate directions.
pub fn validate_d3<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    t: T,
    seg: &dyn SegmentFn<T>,
    velocity: &[T],
    step: T,
) -> T {
    assert!(step > T::zero(), "finite-difference step must be positive");
    let analytic = problem.d3(t, seg, velocity);
    let mut worst = T::zero();
    let mut shifted = velocity.to_vec();
    for k in 0..problem.dim() {
        shifted[k] = velocity[k] + step;
        let plus = problem.eval(t, seg, &shifted);
        shifted[k] = velocity[k] - step;
        let minus = problem.eval(t, seg, &shifted);
        shifted[k] = velocity[k];
        let difference = (plus - minus) / (step + step);
        worst = worst.max(relative_gap(analytic.get(k), difference));
    }
    worst
}

fn relative_gap<T: Real>(a: T, b: T) -> T {
    (a - b).abs() / T::one().max(a.abs()).max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::SegmentClosure;

    const FD_STEP: f64 = 1e-5;

    fn bilinear_problem() -> PointDelayLagrangian<f64> {
        // F = phi(0) * v (n = 1): d2 = v at 0, d3 = phi(0).
        PointDelayLagrangian::new(
            1,
            0.5,
            1.0,
            |_, a, _, v| a[0] * v[0],
            |_, _, _, v| vec![v[0]],
            None,
            |_, a, _, _| vec![a[0]],
        )
        .unwrap()
    }

    #[test]
    fn point_delay_d2_is_exact_for_bilinear_core() {
        let p = bilinear_problem();
        let seg = SegmentClosure(|theta: f64| vec![1.0 + theta]);
        let dirs: Vec<Box<dyn SegmentFn<f64>>> = vec![
            Box::new(SegmentClosure(|theta: f64| vec![theta.cos()])),
            Box::new(SegmentClosure(|_| vec![1.0])),
        ];
        let refs: Vec<&dyn SegmentFn<f64>> = dirs.iter().map(|d| d.as_ref()).collect();
        let err = validate_d2(&p, 0.25, &seg, &[2.0], &refs, FD_STEP);
        assert!(err < 1e-10, "relative error {err}");
    }

    #[test]
    fn d2_of_segment_independent_core_pairs_to_zero() {
        let p = PointDelayLagrangian::new(
            1,
            0.5,
            1.0,
            |t, _, _, v| t + 0.5 * v[0] * v[0],
            |_, _, _, _| vec![0.0],
            None,
            |_, _, _, v| vec![v[0]],
        )
        .unwrap();
        let seg = SegmentClosure(|theta: f64| vec![theta.exp()]);
        let m = p.d2(0.5, &seg, &[1.0]);
        let dir = SegmentClosure(|theta: f64| vec![theta * theta + 1.0]);
        assert_eq!(m.pair(&dir), 0.0);
    }

    #[test]
    fn distributed_quadratic_weighted_pairing() {
        // L = w^2 with k = 1, phi = 1 on [-1, 0]: w = 1 and pairing the
        // density against a unit direction gives 2 w * integral(k) = 2.
        let kernel = Kernel::constant(1.0, 1.0, 16).unwrap();
        let p = DistributedDelayLagrangian::new(
            1,
            1.0,
            2.0,
            kernel,
            |_, _, w, _| w[0] * w[0],
            |_, _, _, _| vec![0.0],
            |_, _, w, _| vec![2.0 * w[0]],
            |_, _, _, _| vec![0.0],
        )
        .unwrap();
        let seg = SegmentClosure(|_: f64| vec![1.0]);
        let m = p.d2(0.0, &seg, &[0.0]);
        let unit = SegmentClosure(|_: f64| vec![1.0]);
        assert!((m.pair(&unit) - 2.0).abs() < 1e-12);

        let refs: Vec<&dyn SegmentFn<f64>> = vec![&unit];
        let err = validate_d2(&p, 0.0, &seg, &[0.0], &refs, FD_STEP);
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn velocity_gradient_of_quadratic_speed_cost() {
        // F = |v|^2 / 2: d3 = v, exact for the central difference.
        let p = PointDelayLagrangian::new(
            2,
            0.5,
            1.0,
            |_, _, _, v| 0.5 * (v[0] * v[0] + v[1] * v[1]),
            |_, _, _, _| vec![0.0, 0.0],
            None,
            |_, _, _, v| v.to_vec(),
        )
        .unwrap();
        let seg = SegmentClosure(|_| vec![0.0, 0.0]);
        let err = validate_d3(&p, 0.3, &seg, &[1.5, -2.0], FD_STEP);
        assert!(err < 1e-9, "relative error {err}");
    }

    #[test]
    fn velocity_independent_core_has_zero_d3() {
        let p = PointDelayLagrangian::new(
            1,
            0.5,
            1.0,
            |_, a: &[f64], b: &[f64], _: &[f64]| a[0] * a[0] + b[0],
            |_, a, _, _| vec![2.0 * a[0]],
            Some(Arc::new(|_, _, _, _| vec![1.0])),
            |_, _, _, _| vec![0.0],
        )
        .unwrap();
        let seg = SegmentClosure(|theta: f64| vec![theta + 2.0]);
        assert_eq!(p.d3(0.1, &seg, &[3.0]).get(0), 0.0);
        let err = validate_d3(&p, 0.1, &seg, &[3.0], FD_STEP);
        assert!(err < 1e-10);
    }

    #[test]
    fn delayed_bilinear_velocity_gradient() {
        // F = phi(-r) * v (n = 1): d3 = phi(-r).
        let p = PointDelayLagrangian::new(
            1,
            0.5,
            1.0,
            |_, _, b, v| b[0] * v[0],
            |_, _, _, _| vec![0.0],
            Some(Arc::new(|_, _, _, v: &[f64]| vec![v[0]])),
            |_, _, b, _| vec![b[0]],
        )
        .unwrap();
        let seg = SegmentClosure(|theta: f64| vec![theta.sin() + 2.0]);
        let expected = (-0.5f64).sin() + 2.0;
        assert!((p.d3(0.2, &seg, &[1.0]).get(0) - expected).abs() < 1e-15);
        let err = validate_d3(&p, 0.2, &seg, &[1.0], FD_STEP);
        assert!(err < 1e-9);
    }

    #[test]
    fn point_pairing_matches_two_point_expansion_identically() {
        // For point-delay integrands the pairing is exactly
        // da . dphi(0) + db . dphi(-r).
        let p = PointDelayLagrangian::new(
            2,
            0.5,
            1.0,
            |_, a, b, _| a[0] * b[1] + a[1] * b[0],
            |_, _, b, _| vec![b[1], b[0]],
            Some(Arc::new(|_, a: &[f64], _: &[f64], _: &[f64]| vec![a[1], a[0]])),
            |_, _, _, _| vec![0.0, 0.0],
        )
        .unwrap();
        let seg = SegmentClosure(|theta: f64| vec![theta + 1.0, theta * theta]);
        let dir = SegmentClosure(|theta: f64| vec![theta.cos(), theta.sin() + 0.5]);
        let m = p.d2(0.0, &seg, &[0.0, 0.0]);
        let a = seg.eval(0.0);
        let b = seg.eval(-0.5);
        let da = [b[1], b[0]];
        let db = [a[1], a[0]];
        let expected: f64 = da
            .iter()
            .zip(dir.eval(0.0))
            .map(|(p, d)| p * d)
            .chain(db.iter().zip(dir.eval(-0.5)).map(|(p, d)| p * d))
            .sum();
        assert!((m.pair(&dir) - expected).abs() < 1e-15);
    }

    #[test]
    fn central_difference_error_shrinks_quadratically() {
        // Non-quadratic smooth core, so the finite-difference truncation is
        // genuinely second order across three decades of step size.
        let p = PointDelayLagrangian::new(
            1,
            0.5,
            1.0,
            |_, a: &[f64], _: &[f64], v: &[f64]| (a[0] + 0.3 * v[0]).exp(),
            |_, a: &[f64], _: &[f64], v: &[f64]| vec![(a[0] + 0.3 * v[0]).exp()],
            None,
            |_, a: &[f64], _: &[f64], v: &[f64]| vec![0.3 * (a[0] + 0.3 * v[0]).exp()],
        )
        .unwrap();
        let seg = SegmentClosure(|theta: f64| vec![0.4 - theta]);
        let dir = SegmentClosure(|_| vec![1.0]);
        let refs: Vec<&dyn SegmentFn<f64>> = vec![&dir];
        let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| validate_d2(&p, 0.0, &seg, &[1.0], &refs, eps))
            .collect();
        assert!(errs[0] / errs[1] > 30.0, "ratios {errs:?}");
        assert!(errs[1] / errs[2] > 30.0, "ratios {errs:?}");
    }

    #[test]
    fn rejects_delay_not_smaller_than_horizon() {
        let bad = PointDelayLagrangian::new(
            1,
            1.0,
            1.0,
            |_, _, _, _| 0.0,
            |_, _, _, _| vec![0.0],
            None,
            |_, _, _, _| vec![0.0],
        );
        assert!(matches!(bad, Err(CoreError::BadProblem(_))));
    }
}
