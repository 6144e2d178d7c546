//! Trajectories on `[-r, T]`: a continuous history on `[-r, 0]` glued to a
//! C1 cubic Hermite spline on `[0, T]`, plus the admissible perturbations
//! (zero on the history window and at the right endpoint).
//!
//! Grids must be delay-commensurate: with `h = T/N` the delay must satisfy
//! `r = m*h` exactly for an integer `m >= 1`, so segment evaluation at nodes
//! lands on nodes and the advance integrals see no interpolation asymmetry.

use std::sync::Arc;

use crate::error::{CoreError, CoreResult};
use crate::measures::SegmentFn;
use crate::scalar::{count, lit, Real};

/// Number of evaluation points per grid interval used by the sampled
/// sup-norms; they are lower bounds within interpolation error.
const NORM_SAMPLES_PER_INTERVAL: usize = 8;

/// Returns the integer `m` with `r = m*(T/N)` exactly, or a diagnostic error.
///
/// Exact binary equality is required: a nearly-commensurate delay silently
/// shifts every delayed evaluation off the node grid.
pub fn delay_steps<T: Real>(delay: T, horizon: T, intervals: usize) -> CoreResult<usize> {
    let h = horizon / count::<T>(intervals);
    let nearest = (delay / h).round();
    let snapped = h * nearest;
    let m = nearest.to_u64().unwrap_or(0);
    if snapped == delay && m >= 1 && m <= intervals as u64 {
        Ok(m as usize)
    } else {
        Err(CoreError::NonCommensurateGrid {
            delay: delay.to_f64().unwrap_or(f64::NAN),
            horizon: horizon.to_f64().unwrap_or(f64::NAN),
            intervals,
            nearest: m,
            snapped: snapped.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Cubic Hermite basis values at local coordinate `s` in `[0, 1]`.
#[inline]
fn hermite_basis<T: Real>(s: T) -> (T, T, T, T) {
    let one = T::one();
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let s2 = s * s;
    let s3 = s2 * s;
    (
        two * s3 - three * s2 + one,
        s3 - two * s2 + s,
        -two * s3 + three * s2,
        s3 - s2,
    )
}

/// Derivatives of the Hermite basis with respect to `s`.
#[inline]
fn hermite_basis_deriv<T: Real>(s: T) -> (T, T, T, T) {
    let one = T::one();
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let four = lit::<T>(4.0);
    let six = lit::<T>(6.0);
    let s2 = s * s;
    (
        six * s2 - six * s,
        three * s2 - four * s + one,
        six * s - six * s2,
        three * s2 - two * s,
    )
}

/// Piecewise cubic Hermite data on a uniform grid: values and derivatives at
/// the nodes. Shared by trajectories, perturbations, and sampled histories.
#[derive(Debug, Clone)]
struct HermiteSpline<T> {
    start: T,
    step: T,
    values: Vec<Vec<T>>,
    derivs: Vec<Vec<T>>,
}

impl<T: Real> HermiteSpline<T> {
    fn dim(&self) -> usize {
        self.values[0].len()
    }

    fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    fn node(&self, j: usize) -> T {
        self.start + self.step * count::<T>(j)
    }

    fn locate(&self, t: T) -> (usize, T) {
        let pos = (t - self.start) / self.step;
        let j = pos
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.intervals() - 1);
        let s = ((t - self.node(j)) / self.step)
            .max(T::zero())
            .min(T::one());
        (j, s)
    }

    fn value(&self, t: T) -> Vec<T> {
        let (j, s) = self.locate(t);
        let (b0, b1, b2, b3) = hermite_basis(s);
        let h = self.step;
        (0..self.dim())
            .map(|k| {
                b0 * self.values[j][k]
                    + b1 * h * self.derivs[j][k]
                    + b2 * self.values[j + 1][k]
                    + b3 * h * self.derivs[j + 1][k]
            })
            .collect()
    }

    fn derivative(&self, t: T) -> Vec<T> {
        let (j, s) = self.locate(t);
        let (d0, d1, d2, d3) = hermite_basis_deriv(s);
        let h = self.step;
        (0..self.dim())
            .map(|k| {
                (d0 * self.values[j][k]
                    + d1 * h * self.derivs[j][k]
                    + d2 * self.values[j + 1][k]
                    + d3 * h * self.derivs[j + 1][k])
                    / h
            })
            .collect()
    }
}

enum HistoryRepr<T> {
    Rule(Arc<dyn Fn(T) -> Vec<T> + Send + Sync>),
    Samples(HermiteSpline<T>),
}

impl<T: Clone> Clone for HistoryRepr<T> {
    fn clone(&self) -> Self {
        match self {
            HistoryRepr::Rule(f) => HistoryRepr::Rule(f.clone()),
            HistoryRepr::Samples(s) => HistoryRepr::Samples(s.clone()),
        }
    }
}

impl<T> std::fmt::Debug for HistoryRepr<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HistoryRepr::Rule(_) => f.write_str("Rule(..)"),
            HistoryRepr::Samples(_) => f.write_str("Samples(..)"),
        }
    }
}

/// Continuous function on `[-r, 0]`: either a closed-form rule or uniform
/// samples interpolated by a C1 cubic (finite-difference slopes).
#[derive(Debug, Clone)]
pub struct HistoryFunction<T> {
    delay: T,
    dim: usize,
    repr: HistoryRepr<T>,
}

impl<T: Real> HistoryFunction<T> {
    pub fn from_rule(
        delay: T,
        dim: usize,
        rule: impl Fn(T) -> Vec<T> + Send + Sync + 'static,
    ) -> CoreResult<Self> {
        if delay <= T::zero() {
            return Err(CoreError::NonPositiveHorizon {
                horizon: delay.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            delay,
            dim,
            repr: HistoryRepr::Rule(Arc::new(rule)),
        })
    }

    /// Uniform samples on `[-r, 0]`, first row at `-r`, last at `0`. Slopes
    /// come from second-order finite differences (one-sided at the ends).
    pub fn from_samples(delay: T, samples: Vec<Vec<T>>) -> CoreResult<Self> {
        if delay <= T::zero() {
            return Err(CoreError::NonPositiveHorizon {
                horizon: delay.to_f64().unwrap_or(f64::NAN),
            });
        }
        if samples.len() < 2 {
            return Err(CoreError::DensityTooShort { got: samples.len() });
        }
        let dim = samples[0].len();
        for s in &samples {
            if s.len() != dim {
                return Err(CoreError::DimensionMismatch {
                    expected: dim,
                    got: s.len(),
                });
            }
        }
        let n = samples.len() - 1;
        let h = delay / count::<T>(n);
        let half = lit::<T>(0.5);
        let mut derivs = Vec::with_capacity(samples.len());
        for j in 0..=n {
            let row: Vec<T> = (0..dim)
                .map(|k| {
                    if j == 0 {
                        if n == 1 {
                            (samples[1][k] - samples[0][k]) / h
                        } else {
                            (-lit::<T>(3.0) * samples[0][k] + lit::<T>(4.0) * samples[1][k]
                                - samples[2][k])
                                * half
                                / h
                        }
                    } else if j == n {
                        if n == 1 {
                            (samples[1][k] - samples[0][k]) / h
                        } else {
                            (lit::<T>(3.0) * samples[n][k] - lit::<T>(4.0) * samples[n - 1][k]
                                + samples[n - 2][k])
                                * half
                                / h
                        }
                    } else {
                        (samples[j + 1][k] - samples[j - 1][k]) * half / h
                    }
                })
                .collect();
            derivs.push(row);
        }
        Ok(Self {
            delay,
            dim,
            repr: HistoryRepr::Samples(HermiteSpline {
                start: -delay,
                step: h,
                values: samples,
                derivs,
            }),
        })
    }

    pub fn constant(delay: T, value: Vec<T>) -> CoreResult<Self> {
        let dim = value.len();
        Self::from_rule(delay, dim, move |_| value.clone())
    }

    pub fn delay(&self) -> T {
        self.delay
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, theta: T) -> Vec<T> {
        let slack = self.delay * lit(1e-12);
        debug_assert!(
            theta >= -self.delay - slack && theta <= slack,
            "history evaluated at {theta} outside [-{}, 0]",
            self.delay
        );
        let theta = theta.max(-self.delay).min(T::zero());
        match &self.repr {
            HistoryRepr::Rule(f) => {
                let v = f(theta);
                debug_assert_eq!(v.len(), self.dim);
                v
            }
            HistoryRepr::Samples(s) => s.value(theta),
        }
    }
}

/// Element of the trajectory space: continuous on `[-r, T]`, C1 on `[0, T]`,
/// represented by its history and nodal values/derivatives of a cubic
/// Hermite spline on a uniform, delay-commensurate grid.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    history: HistoryFunction<T>,
    horizon: T,
    spline: HermiteSpline<T>,
    delay_steps: usize,
}

impl<T: Real> Trajectory<T> {
    /// `values` and `derivs` hold one row per node, `N + 1` rows total.
    /// The first value row must match the history at `0`; it is replaced by
    /// the exact history value so the junction is continuous by construction.
    pub fn new(
        history: HistoryFunction<T>,
        horizon: T,
        mut values: Vec<Vec<T>>,
        derivs: Vec<Vec<T>>,
    ) -> CoreResult<Self> {
        if horizon <= T::zero() {
            return Err(CoreError::NonPositiveHorizon {
                horizon: horizon.to_f64().unwrap_or(f64::NAN),
            });
        }
        if values.len() < 2 {
            return Err(CoreError::GridTooCoarse {
                min: 1,
                got: values.len().saturating_sub(1),
            });
        }
        if derivs.len() != values.len() {
            return Err(CoreError::DimensionMismatch {
                expected: values.len(),
                got: derivs.len(),
            });
        }
        let dim = history.dim();
        for row in values.iter().chain(derivs.iter()) {
            if row.len() != dim {
                return Err(CoreError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        let n = values.len() - 1;
        let m = delay_steps(history.delay(), horizon, n)?;
        let start = history.eval(T::zero());
        let tol = lit::<T>(1e-9);
        for k in 0..dim {
            let gap = (values[0][k] - start[k]).abs();
            if gap > tol * (T::one() + start[k].abs()) {
                return Err(CoreError::JunctionMismatch {
                    value: values[0][k].to_f64().unwrap_or(f64::NAN),
                    expected: start[k].to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        values[0] = start;
        let step = horizon / count::<T>(n);
        Ok(Self {
            history,
            horizon,
            spline: HermiteSpline {
                start: T::zero(),
                step,
                values,
                derivs,
            },
            delay_steps: m,
        })
    }

    /// Samples a closed-form curve (with its exact derivative) on `N`
    /// intervals.
    pub fn from_fn(
        history: HistoryFunction<T>,
        horizon: T,
        intervals: usize,
        value: impl Fn(T) -> Vec<T>,
        derivative: impl Fn(T) -> Vec<T>,
    ) -> CoreResult<Self> {
        let nodes: Vec<T> = (0..=intervals)
            .map(|j| horizon * count::<T>(j) / count::<T>(intervals))
            .collect();
        let values = nodes.iter().map(|&t| value(t)).collect();
        let derivs = nodes.iter().map(|&t| derivative(t)).collect();
        Self::new(history, horizon, values, derivs)
    }

    pub fn history(&self) -> &HistoryFunction<T> {
        &self.history
    }

    pub fn dim(&self) -> usize {
        self.history.dim()
    }

    pub fn delay(&self) -> T {
        self.history.delay()
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.spline.intervals()
    }

    /// `r = m * h`; the number of grid steps spanned by the delay.
    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    pub fn step(&self) -> T {
        self.spline.step
    }

    pub fn node_times(&self) -> Vec<T> {
        let n = self.intervals();
        (0..=n)
            .map(|j| self.horizon * count::<T>(j) / count::<T>(n))
            .collect()
    }

    pub fn node_value(&self, j: usize) -> &[T] {
        &self.spline.values[j]
    }

    pub fn node_derivative(&self, j: usize) -> &[T] {
        &self.spline.derivs[j]
    }

    /// Value anywhere on `[-r, T]`; history for negative times, spline
    /// otherwise.
    pub fn value(&self, t: T) -> Vec<T> {
        if t < T::zero() {
            self.history.eval(t)
        } else {
            self.spline.value(t.min(self.horizon))
        }
    }

    /// Exact derivative of the spline part; `t` must lie in `[0, T]`.
    pub fn derivative(&self, t: T) -> Vec<T> {
        let slack = self.horizon * lit(1e-12);
        debug_assert!(
            t >= -slack && t <= self.horizon + slack,
            "derivative queried at {t} outside [0, {}]",
            self.horizon
        );
        self.spline.derivative(t.max(T::zero()).min(self.horizon))
    }

    /// The segment view at time `t`: `theta -> x(t + theta)` on `[-r, 0]`.
    pub fn segment(&self, t: T) -> Segment<'_, T> {
        let slack = self.horizon * lit(1e-12);
        debug_assert!(
            t >= -slack && t <= self.horizon + slack,
            "segment requested at {t} outside [0, {}]",
            self.horizon
        );
        Segment {
            trajectory: self,
            at: t.max(T::zero()).min(self.horizon),
        }
    }

    /// Sampled trajectory-space norm: sup of the value max-norm over
    /// `[-r, T]` plus sup of the derivative max-norm over `[0, T]`, both by
    /// dense sampling (a lower bound within interpolation error).
    pub fn norm(&self) -> T {
        let mut sup_val = T::zero();
        let n = self.intervals();
        let sub = NORM_SAMPLES_PER_INTERVAL;
        // History part: m grid-sized intervals over [-r, 0].
        for j in 0..self.delay_steps {
            for i in 0..sub {
                let theta = -self.delay()
                    + self.step() * (count::<T>(j) + count::<T>(i) / count::<T>(sub));
                sup_val = sup_val.max(vec_max(&self.history.eval(theta)));
            }
        }
        let mut sup_deriv = T::zero();
        for j in 0..n {
            for i in 0..=sub {
                let t = self.spline.node(j) + self.step() * count::<T>(i) / count::<T>(sub);
                sup_val = sup_val.max(vec_max(&self.spline.value(t)));
                sup_deriv = sup_deriv.max(vec_max(&self.spline.derivative(t)));
            }
        }
        sup_val + sup_deriv
    }

    /// Returns the trajectory shifted by `scale` times the perturbation. The
    /// history and both endpoint constraints are untouched because the
    /// perturbation vanishes there.
    pub fn offset_by(&self, p: &Perturbation<T>, scale: T) -> Self {
        debug_assert_eq!(p.dim(), self.dim());
        debug_assert_eq!(p.intervals(), self.intervals());
        let mut out = self.clone();
        for (row, prow) in out.spline.values.iter_mut().zip(&p.spline.values) {
            for (v, &dv) in row.iter_mut().zip(prow) {
                *v = *v + scale * dv;
            }
        }
        for (row, prow) in out.spline.derivs.iter_mut().zip(&p.spline.derivs) {
            for (v, &dv) in row.iter_mut().zip(prow) {
                *v = *v + scale * dv;
            }
        }
        out
    }
}

/// The straight-line admissible trajectory: history `psi` followed by the
/// segment from `psi(0)` to `zeta`.
pub fn affine_initial_guess<T: Real>(
    history: &HistoryFunction<T>,
    target: &[T],
    horizon: T,
    intervals: usize,
) -> CoreResult<Trajectory<T>> {
    if target.len() != history.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: history.dim(),
            got: target.len(),
        });
    }
    delay_steps(history.delay(), horizon, intervals)?;
    let start = history.eval(T::zero());
    let slope: Vec<T> = target
        .iter()
        .zip(&start)
        .map(|(&z, &s)| (z - s) / horizon)
        .collect();
    let nodes: Vec<T> = (0..=intervals)
        .map(|j| horizon * count::<T>(j) / count::<T>(intervals))
        .collect();
    let values: Vec<Vec<T>> = nodes
        .iter()
        .map(|&t| {
            start
                .iter()
                .zip(&slope)
                .map(|(&s, &b)| s + b * t)
                .collect()
        })
        .collect();
    let derivs = vec![slope; intervals + 1];
    Trajectory::new(history.clone(), horizon, values, derivs)
}

/// Admissible direction: zero on `[-r, 0]` and at `T`, C1 on `[0, T]`,
/// stored like the spline part of a trajectory.
#[derive(Debug, Clone)]
pub struct Perturbation<T> {
    horizon: T,
    spline: HermiteSpline<T>,
}

impl<T: Real> Perturbation<T> {
    pub fn new(horizon: T, values: Vec<Vec<T>>, derivs: Vec<Vec<T>>) -> CoreResult<Self> {
        if values.len() < 2 || derivs.len() != values.len() {
            return Err(CoreError::GridTooCoarse {
                min: 1,
                got: values.len().saturating_sub(1),
            });
        }
        let dim = values[0].len();
        let n = values.len() - 1;
        for row in values.iter().chain(derivs.iter()) {
            if row.len() != dim {
                return Err(CoreError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
        }
        let zero = |row: &[T]| row.iter().all(|&x| x == T::zero());
        if !zero(&values[0]) || !zero(&values[n]) {
            return Err(CoreError::BadProblem(
                "perturbation must vanish at 0 and at the horizon".into(),
            ));
        }
        let step = horizon / count::<T>(n);
        Ok(Self {
            horizon,
            spline: HermiteSpline {
                start: T::zero(),
                step,
                values,
                derivs,
            },
        })
    }

    pub fn zero(dim: usize, horizon: T, intervals: usize) -> Self {
        Self::new(
            horizon,
            vec![vec![T::zero(); dim]; intervals + 1],
            vec![vec![T::zero(); dim]; intervals + 1],
        )
        .expect("zero perturbation is valid")
    }

    /// Builds a perturbation from a packed coefficient vector in the
    /// [`dof_layout`] ordering.
    pub fn from_dofs(dim: usize, horizon: T, intervals: usize, dofs: &[T]) -> Self {
        let expected = dof_count(intervals, dim);
        assert_eq!(dofs.len(), expected, "dof vector has wrong length");
        let mut values = vec![vec![T::zero(); dim]; intervals + 1];
        let mut derivs = vec![vec![T::zero(); dim]; intervals + 1];
        let mut idx = 0;
        for j in 1..intervals {
            for k in 0..dim {
                values[j][k] = dofs[idx];
                idx += 1;
            }
        }
        for row in derivs.iter_mut() {
            for v in row.iter_mut() {
                *v = dofs[idx];
                idx += 1;
            }
        }
        Self::new(horizon, values, derivs).expect("dof layout preserves the constraints")
    }

    pub fn dim(&self) -> usize {
        self.spline.dim()
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.spline.intervals()
    }

    /// Value on `[-r, T]`: identically zero for `t <= 0`.
    pub fn value(&self, t: T) -> Vec<T> {
        if t <= T::zero() {
            vec![T::zero(); self.dim()]
        } else {
            self.spline.value(t.min(self.horizon))
        }
    }

    pub fn derivative(&self, t: T) -> Vec<T> {
        self.spline.derivative(t.max(T::zero()).min(self.horizon))
    }

    pub fn segment(&self, t: T) -> PerturbationSegment<'_, T> {
        PerturbationSegment {
            perturbation: self,
            at: t.max(T::zero()).min(self.horizon),
        }
    }

    /// Sampled norm, as for trajectories; the history part is zero.
    pub fn norm(&self) -> T {
        let n = self.intervals();
        let sub = NORM_SAMPLES_PER_INTERVAL;
        let mut sup_val = T::zero();
        let mut sup_deriv = T::zero();
        for j in 0..n {
            for i in 0..=sub {
                let t = self.spline.node(j) + self.spline.step * count::<T>(i) / count::<T>(sub);
                sup_val = sup_val.max(vec_max(&self.spline.value(t)));
                sup_deriv = sup_deriv.max(vec_max(&self.spline.derivative(t)));
            }
        }
        sup_val + sup_deriv
    }

    pub fn scaled(&self, factor: T) -> Self {
        let scale_rows = |rows: &Vec<Vec<T>>| {
            rows.iter()
                .map(|row| row.iter().map(|&x| x * factor).collect())
                .collect()
        };
        Self {
            horizon: self.horizon,
            spline: HermiteSpline {
                start: T::zero(),
                step: self.spline.step,
                values: scale_rows(&self.spline.values),
                derivs: scale_rows(&self.spline.derivs),
            },
        }
    }

    /// `self + factor * other`
    pub fn plus_scaled(&self, factor: T, other: &Self) -> Self {
        debug_assert_eq!(self.intervals(), other.intervals());
        let add_rows = |a: &Vec<Vec<T>>, b: &Vec<Vec<T>>| {
            a.iter()
                .zip(b)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(&x, &y)| x + factor * y).collect())
                .collect()
        };
        Self {
            horizon: self.horizon,
            spline: HermiteSpline {
                start: T::zero(),
                step: self.spline.step,
                values: add_rows(&self.spline.values, &other.spline.values),
                derivs: add_rows(&self.spline.derivs, &other.spline.derivs),
            },
        }
    }
}

/// Number of free degrees of freedom: interior values plus all derivatives,
/// per coordinate.
pub fn dof_count(intervals: usize, dim: usize) -> usize {
    dim * ((intervals - 1) + (intervals + 1))
}

/// Nodal basis of the free degrees of freedom, in the packed ordering used by
/// [`Perturbation::from_dofs`]: value dofs at interior nodes `1..N-1` (all
/// coordinates per node), then derivative dofs at nodes `0..N`.
pub fn basis_perturbations<T: Real>(
    intervals: usize,
    dim: usize,
    horizon: T,
) -> CoreResult<Vec<Perturbation<T>>> {
    if intervals < 2 {
        return Err(CoreError::GridTooCoarse {
            min: 2,
            got: intervals,
        });
    }
    let total = dof_count(intervals, dim);
    let mut out = Vec::with_capacity(total);
    for i in 0..total {
        let mut dofs = vec![T::zero(); total];
        dofs[i] = T::one();
        out.push(Perturbation::from_dofs(dim, horizon, intervals, &dofs));
    }
    Ok(out)
}

/// Segment view `theta -> x(t + theta)` of a trajectory.
pub struct Segment<'a, T> {
    trajectory: &'a Trajectory<T>,
    at: T,
}

impl<T: Real> Segment<'_, T> {
    pub fn at(&self) -> T {
        self.at
    }
}

impl<T: Real> SegmentFn<T> for Segment<'_, T> {
    fn eval(&self, theta: T) -> Vec<T> {
        self.trajectory.value(self.at + theta)
    }

    fn kinks(&self) -> Vec<T> {
        // The only O(1) derivative jump is the history/spline junction.
        let junction = -self.at;
        if junction > -self.trajectory.delay() && junction < T::zero() {
            vec![junction]
        } else {
            Vec::new()
        }
    }
}

/// Segment view of a perturbation; zero for `t + theta <= 0`.
pub struct PerturbationSegment<'a, T> {
    perturbation: &'a Perturbation<T>,
    at: T,
}

impl<T: Real> SegmentFn<T> for PerturbationSegment<'_, T> {
    fn eval(&self, theta: T) -> Vec<T> {
        self.perturbation.value(self.at + theta)
    }

    fn kinks(&self) -> Vec<T> {
        let junction = -self.at;
        if junction < T::zero() {
            vec![junction]
        } else {
            Vec::new()
        }
    }
}

#[inline]
fn vec_max<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_history(r: f64) -> HistoryFunction<f64> {
        HistoryFunction::constant(r, vec![0.0]).unwrap()
    }

    #[test]
    fn commensurate_grids_accept_exact_multiples() {
        assert_eq!(delay_steps(0.5, 1.0, 64).unwrap(), 32);
        assert_eq!(delay_steps(0.25, 1.0, 16).unwrap(), 4);
    }

    #[test]
    fn non_commensurate_grid_is_rejected_with_diagnostics() {
        // 0.3 is not an exact binary multiple of 1/10.
        let err = delay_steps(0.3, 1.0, 10).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("0.3"), "{msg}");
        assert!(msg.contains("10"), "{msg}");
        assert!(msg.contains('1'), "{msg}");
    }

    #[test]
    fn segment_at_zero_is_the_history() {
        let hist = HistoryFunction::from_rule(0.5, 1, |theta: f64| vec![theta.sin()]).unwrap();
        let x = Trajectory::from_fn(hist.clone(), 1.0, 8, |t| vec![t], |_| vec![1.0]).unwrap();
        let seg = x.segment(0.0);
        for &theta in &[-0.5, -0.3, -0.1] {
            assert_eq!(seg.eval(theta), hist.eval(theta));
        }
    }

    #[test]
    fn segment_at_delay_uses_only_the_spline() {
        let x = Trajectory::from_fn(zero_history(0.5), 1.0, 8, |t| vec![t * t], |t| vec![2.0 * t])
            .unwrap();
        let seg = x.segment(0.5);
        for &theta in &[-0.5, -0.25, 0.0] {
            let t = 0.5 + theta;
            assert!((seg.eval(theta)[0] - t * t).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_trajectory_has_constant_segments() {
        let hist = HistoryFunction::constant(0.5, vec![3.0]).unwrap();
        let x = Trajectory::from_fn(hist, 1.0, 4, |_| vec![3.0], |_| vec![0.0]).unwrap();
        for &t in &[0.0f64, 0.3, 0.77, 1.0] {
            let seg = x.segment(t);
            for &theta in &[-0.5, -0.21, 0.0] {
                assert!((seg.eval(theta)[0] - 3.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivative_reproduces_linear_and_nodes() {
        let x = Trajectory::from_fn(
            HistoryFunction::constant(0.25, vec![2.0]).unwrap(),
            1.0,
            8,
            |t: f64| vec![2.0 + 3.0 * t],
            |_| vec![3.0],
        )
        .unwrap();
        for &t in &[0.0, 0.1, 0.5, 0.93, 1.0] {
            assert!((x.derivative(t)[0] - 3.0).abs() < 1e-13);
        }
        assert_eq!(x.derivative(x.node_times()[3])[0], x.node_derivative(3)[0]);
    }

    #[test]
    fn hermite_reproduces_cubics_exactly() {
        // x(t) = t^2 sampled with consistent derivatives: derivative is 2t
        // everywhere, because cubics are reproduced exactly.
        let x = Trajectory::from_fn(zero_history(0.5), 1.0, 4, |t| vec![t * t], |t| {
            vec![2.0 * t]
        })
        .unwrap();
        for &t in &[0.05, 0.33, 0.61, 0.99] {
            assert!((x.derivative(t)[0] - 2.0 * t).abs() < 1e-14);
            assert!((x.value(t)[0] - t * t).abs() < 1e-15);
        }
    }

    #[test]
    fn norm_of_zero_is_zero_and_scaling_is_homogeneous() {
        let zero = Trajectory::from_fn(zero_history(0.5), 1.0, 4, |_| vec![0.0], |_| vec![0.0])
            .unwrap();
        assert_eq!(zero.norm(), 0.0);

        let x = Trajectory::from_fn(zero_history(0.5), 1.0, 8, |t| vec![t * (1.0 - t)], |t| {
            vec![1.0 - 2.0 * t]
        })
        .unwrap();
        let doubled = Trajectory::from_fn(zero_history(0.5), 1.0, 8, |t| {
            vec![2.0 * t * (1.0 - t)]
        }, |t| vec![2.0 - 4.0 * t])
        .unwrap();
        assert!((doubled.norm() - 2.0 * x.norm()).abs() < 1e-14);
    }

    #[test]
    fn norm_of_identity_ramp_is_two() {
        // x(t) = t on [0, 1] with zero history: sup|x| = 1, sup|x'| = 1.
        let x = Trajectory::from_fn(zero_history(0.5), 1.0, 8, |t| vec![t], |_| vec![1.0]).unwrap();
        assert!((x.norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn affine_guess_matches_hand_formula() {
        // psi(0) = 1, zeta = 3, T = 2 gives the line 1 + t.
        let hist = HistoryFunction::constant(0.5, vec![1.0]).unwrap();
        let y = affine_initial_guess(&hist, &[3.0], 2.0, 8).unwrap();
        for &t in &[0.0f64, 0.37, 1.0, 2.0] {
            assert!((y.value(t)[0] - (1.0 + t)).abs() < 1e-14);
        }
        assert_eq!(y.value(2.0)[0], 3.0);
    }

    #[test]
    fn affine_guess_zero_data_gives_zero() {
        let y = affine_initial_guess(&zero_history(0.5), &[0.0], 1.0, 4).unwrap();
        for &t in &[0.0, 0.5, 1.0] {
            assert_eq!(y.value(t)[0], 0.0);
        }
    }

    #[test]
    fn affine_guess_rejects_non_commensurate_grid() {
        let hist = HistoryFunction::constant(0.3, vec![0.0]).unwrap();
        let err = affine_initial_guess(&hist, &[1.0], 1.0, 10).unwrap_err();
        assert!(matches!(err, CoreError::NonCommensurateGrid { .. }));
    }

    #[test]
    fn basis_counts_and_constraints() {
        let n = 6;
        let dim = 2;
        let basis = basis_perturbations::<f64>(n, dim, 1.0).unwrap();
        assert_eq!(basis.len(), dim * ((n - 1) + (n + 1)));
        for h in &basis {
            assert_eq!(h.value(0.0), vec![0.0; dim]);
            assert_eq!(h.value(1.0), vec![0.0; dim]);
            assert_eq!(h.value(-0.2), vec![0.0; dim]);
        }
    }

    #[test]
    fn value_basis_element_is_nodal() {
        let n = 4;
        let basis = basis_perturbations::<f64>(n, 1, 1.0).unwrap();
        // First (n-1) elements are interior value dofs for coordinate 0.
        let h = &basis[1]; // node j = 2
        let nodes: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
        for (j, &t) in nodes.iter().enumerate() {
            let expected = if j == 2 { 1.0 } else { 0.0 };
            assert_eq!(h.value(t.max(1e-300))[0], expected);
            assert_eq!(h.derivative(t)[0], 0.0);
        }
    }

    #[test]
    fn segments_are_continuous_across_the_junction() {
        let hist = HistoryFunction::from_rule(0.5, 1, |theta: f64| vec![1.0 + theta]).unwrap();
        let x = Trajectory::from_fn(hist, 1.0, 8, |t: f64| vec![1.0 + t.sin()], |t: f64| vec![t.cos()])
            .unwrap();
        for &t in &[0.125, 0.25, 0.375] {
            let seg = x.segment(t);
            let below = seg.eval(-t - 1e-12)[0];
            let above = seg.eval(-t + 1e-12)[0];
            assert!((below - above).abs() < 1e-10);
            assert_eq!(seg.kinks(), vec![-t]);
        }
    }

    #[test]
    fn linear_everywhere_segments_shift_exactly() {
        // Continuous linear function across the junction: segment values are
        // x(t) + theta * slope exactly.
        let hist = HistoryFunction::from_rule(0.5, 1, |theta: f64| vec![2.0 * theta + 1.0]).unwrap();
        let x = Trajectory::from_fn(hist, 1.0, 4, |t| vec![2.0 * t + 1.0], |_| vec![2.0]).unwrap();
        for &t in &[0.0, 0.25, 0.8, 1.0] {
            let seg = x.segment(t);
            for &theta in &[-0.5, -0.3, -0.125, 0.0] {
                let expected = 2.0 * (t + theta) + 1.0;
                assert!((seg.eval(theta)[0] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn one_sided_derivative_limits_agree_at_nodes() {
        let x = Trajectory::from_fn(zero_history(0.25), 1.0, 8, |t: f64| vec![(3.0 * t).sin()], |t: f64| {
            vec![3.0 * (3.0 * t).cos()]
        })
        .unwrap();
        for j in 1..8 {
            let t = x.node_times()[j];
            let left = x.derivative(t - 1e-13)[0];
            let right = x.derivative(t + 1e-13)[0];
            assert!((left - right).abs() < 1e-10);
        }
    }

    #[test]
    fn perturbing_keeps_admissibility() {
        let hist = HistoryFunction::constant(0.5, vec![1.0]).unwrap();
        let x = affine_initial_guess(&hist, &[2.0], 1.0, 8).unwrap();
        let basis = basis_perturbations::<f64>(8, 1, 1.0).unwrap();
        let mut y = x.clone();
        for (i, h) in basis.iter().enumerate() {
            y = y.offset_by(h, 0.1 * (i as f64 + 1.0));
        }
        assert_eq!(y.value(0.0), vec![1.0]);
        assert_eq!(y.value(1.0), vec![2.0]);
        assert_eq!(y.value(-0.25), vec![1.0]);
    }

    #[test]
    fn junction_mismatch_is_rejected() {
        let hist = HistoryFunction::constant(0.5, vec![1.0]).unwrap();
        let bad = Trajectory::new(
            hist,
            1.0,
            vec![vec![2.0], vec![1.0], vec![1.0]],
            vec![vec![0.0]; 3],
        );
        assert!(matches!(bad, Err(CoreError::JunctionMismatch { .. })));
    }

    #[test]
    fn sampled_history_interpolates_smoothly() {
        let r = 0.5;
        let samples: Vec<Vec<f64>> = (0..=10)
            .map(|j| vec![(-r + r * j as f64 / 10.0).powi(2)])
            .collect();
        let hist = HistoryFunction::from_samples(r, samples).unwrap();
        for &theta in &[-0.5, -0.33, -0.18, 0.0] {
            assert!((hist.eval(theta)[0] - theta * theta).abs() < 1e-3);
        }
    }
}
