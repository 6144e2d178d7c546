//! Covector-valued measures on the delay window `[-r, 0]`.
//!
//! A measure is a finite list of atoms plus an absolutely continuous part
//! given by a piecewise-linear density sampled on a uniform grid. The
//! cumulative function of a measure is the normalized bounded-variation
//! representative: left-continuous on the interior, zero at `-r`, and equal
//! to the total mass at `0` (an atom sitting exactly at `0` is counted at
//! `0`, so pairing always sees the full measure).
//!
//! Pairing against a continuous test function integrates the density part by
//! composite Simpson on the density grid (each grid interval subdivided
//! further, with panels split at the test function's registered kinks), and
//! sums atom contributions exactly.

use std::ops::{Add, Sub};

use crate::error::{CoreError, CoreResult};
use crate::quadrature::panel_edges;
use crate::scalar::{count, lit, Real};

/// Simpson sub-intervals per density-grid panel used by [`CovectorMeasure::pair`].
///
/// Kernel-weighted segment integrals elsewhere in the crate must use the same
/// subdivision so that analytic differentials and pairings of their measure
/// representations agree to rounding, not just to quadrature accuracy.
pub const DENSITY_SUBDIV: usize = 8;

/// Element of the dual space: one real weight per coordinate.
///
/// The dual norm is the sum of absolute components; the primal vector norm is
/// the max of absolute components.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector<T> {
    components: Vec<T>,
}

impl<T: Real> Covector<T> {
    pub fn new(components: Vec<T>) -> Self {
        assert!(!components.is_empty(), "covector needs dimension >= 1");
        Self { components }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![T::zero(); dim])
    }

    /// k-th dual basis covector.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut c = vec![T::zero(); dim];
        c[k] = T::one();
        Self::new(c)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[T] {
        &self.components
    }

    pub fn get(&self, k: usize) -> T {
        self.components[k]
    }

    /// Applies the covector to a primal vector.
    pub fn apply(&self, v: &[T]) -> T {
        debug_assert_eq!(v.len(), self.dim());
        self.components
            .iter()
            .zip(v)
            .fold(T::zero(), |acc, (&p, &x)| acc + p * x)
    }

    /// Sum-of-absolute-components norm.
    pub fn dual_norm(&self) -> T {
        self.components
            .iter()
            .fold(T::zero(), |acc, &p| acc + p.abs())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self::new(self.components.iter().map(|&p| p * factor).collect())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, &b) in self.components.iter_mut().zip(&other.components) {
            *a = *a + alpha * b;
        }
    }
}

impl<T: Real> Add for &Covector<T> {
    type Output = Covector<T>;
    fn add(self, rhs: Self) -> Covector<T> {
        let mut out = self.clone();
        out.axpy(T::one(), rhs);
        out
    }
}

impl<T: Real> Sub for &Covector<T> {
    type Output = Covector<T>;
    fn sub(self, rhs: Self) -> Covector<T> {
        let mut out = self.clone();
        out.axpy(-T::one(), rhs);
        out
    }
}

/// Continuous test function on `[-r, 0]` with values in the primal space.
///
/// `kinks` reports interior points where the function is not smooth (for a
/// trajectory segment, the junction between history and the spline part);
/// pairing splits its quadrature panels there.
pub trait SegmentFn<T> {
    fn eval(&self, theta: T) -> Vec<T>;

    fn kinks(&self) -> Vec<T> {
        Vec::new()
    }
}

/// Adapter so plain closures can be used as segment functions.
pub struct SegmentClosure<F>(pub F);

impl<T: Real, F: Fn(T) -> Vec<T>> SegmentFn<T> for SegmentClosure<F> {
    fn eval(&self, theta: T) -> Vec<T> {
        (self.0)(theta)
    }
}

/// Piecewise-linear covector density on a uniform grid over `[-r, 0]`.
#[derive(Debug, Clone)]
struct Density<T> {
    samples: Vec<Covector<T>>,
    /// Exact integrals of the interpolant from `-r` up to each grid node.
    prefix: Vec<Covector<T>>,
    horizon: T,
}

impl<T: Real> Density<T> {
    fn new(samples: Vec<Covector<T>>, horizon: T) -> Self {
        let dim = samples[0].dim();
        let step = horizon / count::<T>(samples.len() - 1);
        let half = lit::<T>(0.5);
        let mut prefix = Vec::with_capacity(samples.len());
        let mut acc = Covector::zeros(dim);
        prefix.push(acc.clone());
        for pair in samples.windows(2) {
            let mut trap = pair[0].clone();
            trap.axpy(T::one(), &pair[1]);
            acc.axpy(half * step, &trap);
            prefix.push(acc.clone());
        }
        Self {
            samples,
            prefix,
            horizon,
        }
    }

    fn intervals(&self) -> usize {
        self.samples.len() - 1
    }

    fn step(&self) -> T {
        self.horizon / count::<T>(self.intervals())
    }

    fn node(&self, g: usize) -> T {
        -self.horizon + self.step() * count::<T>(g)
    }

    /// Linear interpolation of the stored samples.
    fn value(&self, theta: T) -> Covector<T> {
        let step = self.step();
        let pos = (theta + self.horizon) / step;
        let g = pos
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.intervals() - 1);
        let s = ((theta - self.node(g)) / step).max(T::zero()).min(T::one());
        let mut out = self.samples[g].scaled(T::one() - s);
        out.axpy(s, &self.samples[g + 1]);
        out
    }

    /// Exact integral of the interpolant over `[-r, theta]`.
    fn cumulative(&self, theta: T) -> Covector<T> {
        let step = self.step();
        let pos = (theta + self.horizon) / step;
        let g = pos
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.intervals() - 1);
        let left = self.node(g);
        let width = theta - left;
        let mut out = self.prefix[g].clone();
        if width > T::zero() {
            let mut trap = self.samples[g].clone();
            trap.axpy(T::one(), &self.value(theta));
            out.axpy(lit::<T>(0.5) * width, &trap);
        }
        out
    }

    fn total(&self) -> Covector<T> {
        self.prefix[self.intervals()].clone()
    }

    /// Exact integral of the coordinate-wise absolute value (the interpolant
    /// is linear per segment, so sign changes are handled in closed form).
    fn abs_integral(&self, k: usize) -> T {
        let step = self.step();
        let half = lit::<T>(0.5);
        let mut acc = T::zero();
        for pair in self.samples.windows(2) {
            let a = pair[0].get(k);
            let b = pair[1].get(k);
            if a * b >= T::zero() {
                acc = acc + step * half * (a.abs() + b.abs());
            } else {
                acc = acc + step * half * (a * a + b * b) / (a.abs() + b.abs());
            }
        }
        acc
    }
}

/// Atoms plus a piecewise-linear density on `[-r, 0]`, with covector weights.
#[derive(Debug, Clone)]
pub struct CovectorMeasure<T> {
    dim: usize,
    horizon: T,
    atoms: Vec<(T, Covector<T>)>,
    density: Option<Density<T>>,
}

impl<T: Real> CovectorMeasure<T> {
    pub fn new(
        dim: usize,
        horizon: T,
        atoms: Vec<(T, Covector<T>)>,
        density_samples: Option<Vec<Covector<T>>>,
    ) -> CoreResult<Self> {
        if horizon <= T::zero() {
            return Err(CoreError::NonPositiveHorizon {
                horizon: horizon.to_f64().unwrap_or(f64::NAN),
            });
        }
        for (loc, w) in &atoms {
            if *loc < -horizon || *loc > T::zero() {
                return Err(CoreError::AtomOutOfRange {
                    location: loc.to_f64().unwrap_or(f64::NAN),
                    horizon: horizon.to_f64().unwrap_or(f64::NAN),
                });
            }
            if w.dim() != dim {
                return Err(CoreError::DimensionMismatch {
                    expected: dim,
                    got: w.dim(),
                });
            }
        }
        for pair in atoms.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(CoreError::AtomsNotSorted {
                    prev: pair[0].0.to_f64().unwrap_or(f64::NAN),
                    next: pair[1].0.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let density = match density_samples {
            None => None,
            Some(samples) => {
                if samples.len() < 2 {
                    return Err(CoreError::DensityTooShort { got: samples.len() });
                }
                for s in &samples {
                    if s.dim() != dim {
                        return Err(CoreError::DimensionMismatch {
                            expected: dim,
                            got: s.dim(),
                        });
                    }
                }
                Some(Density::new(samples, horizon))
            }
        };
        Ok(Self {
            dim,
            horizon,
            atoms,
            density,
        })
    }

    pub fn zero(dim: usize, horizon: T) -> CoreResult<Self> {
        Self::new(dim, horizon, Vec::new(), None)
    }

    pub fn from_atoms(dim: usize, horizon: T, atoms: Vec<(T, Covector<T>)>) -> CoreResult<Self> {
        Self::new(dim, horizon, atoms, None)
    }

    pub fn from_density(dim: usize, horizon: T, samples: Vec<Covector<T>>) -> CoreResult<Self> {
        Self::new(dim, horizon, Vec::new(), Some(samples))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn atoms(&self) -> impl Iterator<Item = (T, &Covector<T>)> {
        self.atoms.iter().map(|(loc, w)| (*loc, w))
    }

    pub fn atom_locations(&self) -> Vec<T> {
        self.atoms.iter().map(|(loc, _)| *loc).collect()
    }

    pub fn has_density(&self) -> bool {
        self.density.is_some()
    }

    /// Interior grid nodes of the density (empty without a density); these
    /// are the points where the cumulative function is not smooth.
    pub fn density_grid(&self) -> Vec<T> {
        match &self.density {
            None => Vec::new(),
            Some(d) => (1..d.intervals()).map(|g| d.node(g)).collect(),
        }
    }

    /// All interior non-smooth points of this measure's cumulative function:
    /// atom locations and density grid nodes.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut pts = self.atom_locations();
        pts.extend(self.density_grid());
        pts.sort_by(|a, b| a.partial_cmp(b).expect("non-finite breakpoint"));
        pts.dedup();
        pts
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            dim: self.dim,
            horizon: self.horizon,
            atoms: self
                .atoms
                .iter()
                .map(|(loc, w)| (*loc, w.scaled(factor)))
                .collect(),
            density: self.density.as_ref().map(|d| {
                Density::new(
                    d.samples.iter().map(|s| s.scaled(factor)).collect(),
                    self.horizon,
                )
            }),
        }
    }

    /// Sum of two measures over the same window. Atoms at exactly equal
    /// locations merge; densities must share the grid (or one side has none).
    pub fn try_add(&self, other: &Self) -> CoreResult<Self> {
        if self.dim != other.dim {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if self.horizon != other.horizon {
            return Err(CoreError::IncompatibleMeasures(format!(
                "horizons differ: {} vs {}",
                self.horizon, other.horizon
            )));
        }
        let mut atoms: Vec<(T, Covector<T>)> = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.atoms.len() || j < other.atoms.len() {
            let take_left = match (self.atoms.get(i), other.atoms.get(j)) {
                (Some(a), Some(b)) => {
                    if a.0 == b.0 {
                        let mut w = a.1.clone();
                        w.axpy(T::one(), &b.1);
                        atoms.push((a.0, w));
                        i += 1;
                        j += 1;
                        continue;
                    }
                    a.0 < b.0
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => unreachable!(),
            };
            if take_left {
                atoms.push(self.atoms[i].clone());
                i += 1;
            } else {
                atoms.push(other.atoms[j].clone());
                j += 1;
            }
        }
        let density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(d), None) | (None, Some(d)) => Some(d.samples.clone()),
            (Some(a), Some(b)) => {
                if a.samples.len() != b.samples.len() {
                    return Err(CoreError::IncompatibleMeasures(format!(
                        "density grids differ: {} vs {} samples",
                        a.samples.len(),
                        b.samples.len()
                    )));
                }
                Some(
                    a.samples
                        .iter()
                        .zip(&b.samples)
                        .map(|(x, y)| x + y)
                        .collect(),
                )
            }
        };
        Self::new(self.dim, self.horizon, atoms, density)
    }

    /// Total variation: sum of atom dual norms plus the exact integral of the
    /// density's coordinate-wise absolute value.
    pub fn total_variation(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, k| acc + self.coordinate_total_variation(k))
    }

    /// Total variation of the k-th scalar coordinate measure.
    pub fn coordinate_total_variation(&self, k: usize) -> T {
        let atoms = self
            .atoms
            .iter()
            .fold(T::zero(), |acc, (_, w)| acc + w.get(k).abs());
        let density = self
            .density
            .as_ref()
            .map(|d| d.abs_integral(k))
            .unwrap_or_else(T::zero);
        atoms + density
    }

    /// Full mass: all atoms plus the whole density integral. Equals the
    /// cumulative function at `0`.
    pub fn total_mass(&self) -> Covector<T> {
        let mut out = Covector::zeros(self.dim);
        for (_, w) in &self.atoms {
            out.axpy(T::one(), w);
        }
        if let Some(d) = &self.density {
            out.axpy(T::one(), &d.total());
        }
        out
    }

    fn cumulative_inner(&self, theta: T, include_at: bool) -> Covector<T> {
        let mut out = Covector::zeros(self.dim);
        for (loc, w) in &self.atoms {
            if *loc < theta || (include_at && *loc == theta) {
                out.axpy(T::one(), w);
            }
        }
        if let Some(d) = &self.density {
            out.axpy(T::one(), &d.cumulative(theta));
        }
        out
    }

    /// The normalized cumulative function `g`: `g(-r) = 0`, left-continuous
    /// on the interior (an atom at `theta` does not count at `theta`), and
    /// `g(0)` equal to the total mass.
    pub fn cumulative(&self, theta: T) -> Covector<T> {
        let theta = self.clamp_theta(theta);
        if theta == -self.horizon {
            Covector::zeros(self.dim)
        } else if theta == T::zero() {
            self.total_mass()
        } else {
            self.cumulative_inner(theta, false)
        }
    }

    /// Limit of the cumulative function from the left; differs from
    /// [`Self::cumulative`] only at `0`, where an atom at `0` is excluded.
    pub fn cumulative_left_limit(&self, theta: T) -> Covector<T> {
        let theta = self.clamp_theta(theta);
        if theta == -self.horizon {
            Covector::zeros(self.dim)
        } else {
            self.cumulative_inner(theta, false)
        }
    }

    /// Limit of the cumulative function from the right: an atom at `theta`
    /// counts (in particular an atom at `-r` counts at `-r`).
    pub fn cumulative_right_limit(&self, theta: T) -> Covector<T> {
        let theta = self.clamp_theta(theta);
        self.cumulative_inner(theta, true)
    }

    fn clamp_theta(&self, theta: T) -> T {
        let slack = self.horizon * lit(1e-12);
        debug_assert!(
            theta >= -self.horizon - slack && theta <= slack,
            "theta {theta} outside [-{}, 0]",
            self.horizon
        );
        theta.max(-self.horizon).min(T::zero())
    }

    /// Dual pairing against a continuous test function: exact atom sum plus
    /// density quadrature.
    pub fn pair(&self, phi: &dyn SegmentFn<T>) -> T {
        self.pair_with_splits(phi, &[])
    }

    /// Like [`Self::pair`], with extra quadrature split points in `[-r, 0]`
    /// for callers that know additional non-smooth points of `phi`.
    pub fn pair_with_splits(&self, phi: &dyn SegmentFn<T>, extra: &[T]) -> T {
        let mut acc = T::zero();
        for (loc, w) in &self.atoms {
            acc = acc + w.apply(&phi.eval(*loc));
        }
        if let Some(d) = &self.density {
            let mut splits = phi.kinks();
            splits.extend_from_slice(extra);
            let grid: Vec<T> = (0..=d.intervals()).map(|g| d.node(g)).collect();
            let edges = panel_edges(&grid, &splits, -self.horizon, T::zero());
            acc = acc
                + integrate_panels(&edges, DENSITY_SUBDIV, |theta| {
                    d.value(theta).apply(&phi.eval(theta))
                });
        }
        acc
    }

    /// Both sides of the parts-integration identity for the pairing against
    /// `theta -> h(t + theta)`, where `h` is continuously differentiable on
    /// `[t - r, t]`:
    ///
    /// * left: the pairing itself;
    /// * right: `g(0) . h(t) - integral of g(xi - t) . h'(xi) over [t-r, t]`.
    ///
    /// The Stieltjes-side quadrature splits panels at atom locations and
    /// density grid nodes and evaluates the cumulative function by one-sided
    /// limits at panel edges, so atom-only data is exact to rounding.
    pub fn integrate_by_parts_check(
        &self,
        h_value: &dyn Fn(T) -> Vec<T>,
        h_deriv: &dyn Fn(T) -> Vec<T>,
        t: T,
    ) -> (T, T) {
        let shifted = SegmentClosure(|theta: T| h_value(t + theta));
        let lhs = self.pair(&shifted);

        let boundary = self.total_mass().apply(&h_value(t));
        let edges = panel_edges(&self.breakpoints(), &[], -self.horizon, T::zero());
        let tail = integrate_panels_sided(&edges, 16, |theta, side| {
            let g = match side {
                PanelSide::Start => self.cumulative_right_limit(theta),
                PanelSide::End => self.cumulative_left_limit(theta),
                PanelSide::Interior => self.cumulative(theta),
            };
            g.apply(&h_deriv(t + theta))
        });
        (lhs, boundary - tail)
    }
}

/// Where a quadrature point sits in its panel; edge values of a jump
/// integrand must be one-sided limits from the panel interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanelSide {
    Start,
    Interior,
    End,
}

/// Composite Simpson over consecutive panel edges.
pub(crate) fn integrate_panels<T: Real>(
    edges: &[T],
    subsamples: usize,
    mut f: impl FnMut(T) -> T,
) -> T {
    integrate_panels_sided(edges, subsamples, |theta, _| f(theta))
}

/// Composite Simpson over panels with panel-side information passed to the
/// integrand so it can take interior limits at the edges.
pub(crate) fn integrate_panels_sided<T: Real>(
    edges: &[T],
    subsamples: usize,
    mut f: impl FnMut(T, PanelSide) -> T,
) -> T {
    debug_assert!(subsamples >= 2 && subsamples % 2 == 0);
    let mut acc = T::zero();
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let width = b - a;
        if width <= T::zero() {
            continue;
        }
        let h = width / count::<T>(subsamples);
        let third = h / lit::<T>(3.0);
        for i in 0..=subsamples {
            let (x, side) = if i == 0 {
                (a, PanelSide::Start)
            } else if i == subsamples {
                (b, PanelSide::End)
            } else {
                (a + h * count(i), PanelSide::Interior)
            };
            let coeff = if i == 0 || i == subsamples {
                T::one()
            } else if i % 2 == 1 {
                lit(4.0)
            } else {
                lit(2.0)
            };
            acc = acc + coeff * third * f(x, side);
        }
    }
    acc
}
