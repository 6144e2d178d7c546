//! Composite Simpson quadrature aligned with a node grid.
//!
//! Panels are the intervals between consecutive node-grid points, further
//! split at registered breakpoints so that no panel straddles a point where
//! the integrand loses smoothness. Each panel is integrated by composite
//! Simpson with a fixed even number of sub-intervals, which is exact for
//! polynomials of degree <= 3 per panel.

use crate::error::{CoreError, CoreResult};
use crate::scalar::{count, lit, Real};

/// Composite Simpson rule with per-panel subsamples and breakpoint list.
#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    subsamples: usize,
    breakpoints: Vec<T>,
}

impl<T: Real> QuadratureRule<T> {
    /// `subsamples` is the number of Simpson sub-intervals per panel; it must
    /// be even and positive. Four is the usual default.
    pub fn new(subsamples: usize) -> CoreResult<Self> {
        if subsamples == 0 || subsamples % 2 != 0 {
            return Err(CoreError::BadSubsamples { got: subsamples });
        }
        Ok(Self {
            subsamples,
            breakpoints: Vec::new(),
        })
    }

    pub fn with_breakpoints(mut self, pts: impl IntoIterator<Item = T>) -> Self {
        self.breakpoints.extend(pts);
        self
    }

    pub fn subsamples(&self) -> usize {
        self.subsamples
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    /// Panel edges for integration over `[a, b]`: `a`, `b`, every node-grid
    /// point and registered breakpoint strictly inside, sorted, with
    /// near-duplicates (within `1e-12 * (b - a)`) merged.
    pub fn panel_edges(&self, nodes: &[T], a: T, b: T) -> Vec<T> {
        panel_edges(nodes, &self.breakpoints, a, b)
    }

    /// Flattened (point, weight) list over `[a, b]`. Integrating `f` means
    /// summing `w * f(x)` in list order; the deterministic order keeps
    /// repeated runs bit-identical.
    pub fn points(&self, nodes: &[T], a: T, b: T) -> Vec<(T, T)> {
        let edges = self.panel_edges(nodes, a, b);
        let mut out = Vec::new();
        for pair in edges.windows(2) {
            simpson_points(pair[0], pair[1], self.subsamples, &mut out);
        }
        out
    }

    pub fn integrate(&self, nodes: &[T], a: T, b: T, mut f: impl FnMut(T) -> T) -> T {
        self.points(nodes, a, b)
            .into_iter()
            .fold(T::zero(), |acc, (x, w)| acc + w * f(x))
    }

    /// Vector-valued integration; `f` must always return `dim` components.
    pub fn integrate_vec(
        &self,
        nodes: &[T],
        a: T,
        b: T,
        dim: usize,
        mut f: impl FnMut(T) -> Vec<T>,
    ) -> Vec<T> {
        let mut acc = vec![T::zero(); dim];
        for (x, w) in self.points(nodes, a, b) {
            let v = f(x);
            debug_assert_eq!(v.len(), dim);
            for (a_k, v_k) in acc.iter_mut().zip(v) {
                *a_k = *a_k + w * v_k;
            }
        }
        acc
    }
}

/// Appends composite Simpson (point, weight) pairs for one panel.
fn simpson_points<T: Real>(a: T, b: T, subsamples: usize, out: &mut Vec<(T, T)>) {
    let width = b - a;
    if width <= T::zero() {
        return;
    }
    let m = count::<T>(subsamples);
    let h = width / m;
    let third = h / lit::<T>(3.0);
    for i in 0..=subsamples {
        let x = if i == subsamples { b } else { a + h * count(i) };
        let coeff = if i == 0 || i == subsamples {
            T::one()
        } else if i % 2 == 1 {
            lit(4.0)
        } else {
            lit(2.0)
        };
        out.push((x, coeff * third));
    }
}

/// Sorted, deduplicated panel edges over `[a, b]`.
pub fn panel_edges<T: Real>(nodes: &[T], breakpoints: &[T], a: T, b: T) -> Vec<T> {
    let tol = (b - a).abs() * lit(1e-12);
    if b - a <= tol {
        return Vec::new();
    }
    let mut edges: Vec<T> = Vec::with_capacity(nodes.len() + breakpoints.len() + 2);
    edges.push(a);
    edges.push(b);
    for &p in nodes.iter().chain(breakpoints.iter()) {
        if p > a + tol && p < b - tol {
            edges.push(p);
        }
    }
    edges.sort_by(|x, y| x.partial_cmp(y).expect("non-finite panel edge"));
    edges.dedup_by(|next, prev| *next - *prev <= tol);
    // Ensure the last edge is exactly b even after dedup.
    if let Some(last) = edges.last_mut() {
        *last = b;
    }
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(s: usize) -> QuadratureRule<f64> {
        QuadratureRule::new(s).unwrap()
    }

    #[test]
    fn rejects_odd_subsamples() {
        assert!(QuadratureRule::<f64>::new(3).is_err());
        assert!(QuadratureRule::<f64>::new(0).is_err());
    }

    #[test]
    fn exact_on_cubics_per_panel() {
        let nodes = [0.0, 0.5, 1.0];
        let got = rule(2).integrate(&nodes, 0.0, 1.0, |x| x * x * x - 2.0 * x + 1.0);
        // integral of x^3 - 2x + 1 over [0,1] = 1/4 - 1 + 1 = 1/4
        assert!((got - 0.25).abs() < 1e-15);
    }

    #[test]
    fn breakpoints_split_kinks_exactly() {
        // |x - 0.3| is piecewise linear; Simpson is exact once the kink is a
        // panel edge, and inexact otherwise.
        let nodes = [0.0, 1.0];
        let f = |x: f64| (x - 0.3).abs();
        let exact = 0.3f64.powi(2) / 2.0 + 0.7f64.powi(2) / 2.0;
        let plain = rule(2).integrate(&nodes, 0.0, 1.0, f);
        assert!((plain - exact).abs() > 1e-6);
        let split = rule(2)
            .with_breakpoints([0.3])
            .integrate(&nodes, 0.0, 1.0, f);
        assert!((split - exact).abs() < 1e-15);
    }

    #[test]
    fn empty_interval_integrates_to_zero() {
        let nodes = [0.0, 1.0];
        assert_eq!(rule(4).integrate(&nodes, 0.7, 0.7, |_| 1.0), 0.0);
        assert_eq!(rule(4).integrate(&nodes, 0.7, 0.2, |_| 1.0), 0.0);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let nodes = [0.0, 0.25, 0.5, 0.75, 1.0];
        let total: f64 = rule(4)
            .with_breakpoints([0.1, 0.63])
            .points(&nodes, 0.0, 1.0)
            .iter()
            .map(|&(_, w)| w)
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn near_duplicate_edges_are_merged() {
        let nodes = [0.0, 0.5, 1.0];
        let edges = rule(2)
            .with_breakpoints([0.5 + 1e-16, 0.5])
            .panel_edges(&nodes, 0.0, 1.0);
        assert_eq!(edges.len(), 3);
    }

    #[test]
    fn fourth_order_convergence_on_smooth_integrand() {
        let nodes: Vec<f64> = (0..=8).map(|j| j as f64 / 8.0).collect();
        let f = |x: f64| (2.5 * x).sin().exp();
        let reference = rule(64).integrate(&nodes, 0.0, 1.0, f);
        let e2 = (rule(2).integrate(&nodes, 0.0, 1.0, f) - reference).abs();
        let e4 = (rule(4).integrate(&nodes, 0.0, 1.0, f) - reference).abs();
        assert!(e2 / e4 > 10.0, "expected ~16x error drop, got {}", e2 / e4);
    }
}
