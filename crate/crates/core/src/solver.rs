//! Direct minimization of the discretized cost over the admissible set by
//! descent on the free Hermite degrees of freedom (interior nodal values and
//! all nodal derivatives), with Armijo backtracking.
//!
//! Updates live in the span of the admissible perturbations, so every
//! iterate matches the history exactly and hits the endpoint target exactly.
//!
//! By default the descent direction is the gradient mapped through the
//! inverse Gram matrix of the basis in the `integral of (u.v + u'.v')`
//! product. The raw dof gradient mixes value dofs (order `1/h` energies) and
//! derivative dofs (order `h`), which stalls plain descent by a factor that
//! grows with the grid; the Gram map makes the step scale grid-independent
//! while the stopping test stays on the raw gradient sup-norm. Set
//! `riesz_map: false` for raw-gradient descent.

use crate::criterion::{evaluate_j, gradient, rule_for};
use crate::error::{CoreError, CoreResult};
use crate::euler_lagrange::{el_data, weak_stationarity};
use crate::problem::DelayLagrangian;
use crate::scalar::{count, lit, sup_norm, Real};
use crate::trajectory::{
    affine_initial_guess, basis_perturbations, dof_count, HistoryFunction, Perturbation,
    Trajectory,
};

/// Smallest Armijo step before the line search reports failure.
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct SolveConfig<T> {
    /// Grid intervals `N`; must make the delay commensurate.
    pub intervals: usize,
    pub max_iters: usize,
    /// Stopping threshold on the sup-norm of the raw gradient dofs.
    pub grad_tol: T,
    /// Armijo slope factor.
    pub armijo: T,
    /// Backtracking shrink factor in (0, 1).
    pub backtrack: T,
    pub initial_step: T,
    /// Simpson subsamples per grid interval.
    pub subsamples: usize,
    /// Map the gradient through the basis Gram matrix (see module docs).
    pub riesz_map: bool,
    /// Seed for randomized restarts; the plain descent loop is deterministic
    /// and does not consume it.
    pub seed: u64,
}

impl<T: Real> SolveConfig<T> {
    pub fn new(intervals: usize) -> Self {
        Self {
            intervals,
            max_iters: 500,
            grad_tol: lit(1e-8),
            armijo: lit(1e-4),
            backtrack: lit(0.5),
            initial_step: T::one(),
            subsamples: 4,
            riesz_map: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.intervals < 2 {
            return Err(CoreError::GridTooCoarse {
                min: 2,
                got: self.intervals,
            });
        }
        if !(self.grad_tol > T::zero()) {
            return Err(CoreError::BadSolveConfig("grad_tol must be positive".into()));
        }
        if !(self.backtrack > T::zero() && self.backtrack < T::one()) {
            return Err(CoreError::BadSolveConfig(
                "backtrack factor must lie in (0, 1)".into(),
            ));
        }
        if !(self.armijo > T::zero() && self.armijo < T::one()) {
            return Err(CoreError::BadSolveConfig(
                "armijo factor must lie in (0, 1)".into(),
            ));
        }
        if !(self.initial_step > T::zero()) {
            return Err(CoreError::BadSolveConfig(
                "initial step must be positive".into(),
            ));
        }
        if self.subsamples == 0 || self.subsamples % 2 != 0 {
            return Err(CoreError::BadSubsamples {
                got: self.subsamples,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub trajectory: Trajectory<T>,
    /// Cost after the initial guess and after every accepted step;
    /// non-increasing by the Armijo condition.
    pub j_history: Vec<T>,
    pub final_grad_norm: T,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the run stopped for a reason other than the gradient test.
    pub diagnostic: Option<String>,
}

impl<T: Real> SolveResult<T> {
    pub fn j_value(&self) -> T {
        *self.j_history.last().expect("history holds the initial cost")
    }
}

/// One accepted descent step, for progress observers.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub j_value: T,
    pub grad_norm: T,
    pub step: T,
}

pub fn minimize<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    history: &HistoryFunction<T>,
    target: &[T],
    config: &SolveConfig<T>,
) -> CoreResult<SolveResult<T>> {
    minimize_with(problem, history, target, config, |_| {})
}

pub fn minimize_with<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    history: &HistoryFunction<T>,
    target: &[T],
    config: &SolveConfig<T>,
    mut observer: impl FnMut(&IterationRecord<T>),
) -> CoreResult<SolveResult<T>> {
    config.validate()?;
    if history.dim() != problem.dim() || target.len() != problem.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: problem.dim(),
            got: history.dim().max(target.len()),
        });
    }
    let dim = problem.dim();
    let n = config.intervals;
    let horizon = problem.horizon();
    let rule = rule_for(problem, config.subsamples);
    let basis = basis_perturbations::<T>(n, dim, horizon)?;
    let gram = if config.riesz_map {
        Some(GramSolver::new(n, horizon, config.subsamples))
    } else {
        None
    };

    let mut x = affine_initial_guess(history, target, horizon, n)?;
    let mut j_value = evaluate_j(problem, &x, &rule);
    let mut j_history = vec![j_value];
    let min_step = lit::<T>(MIN_STEP);

    let mut iterations = 0;
    let mut converged = false;
    let mut diagnostic = None;
    let mut grad_norm = T::zero();

    while iterations < config.max_iters {
        let grad = gradient(problem, &x, &basis, &rule);
        grad_norm = sup_norm(&grad);
        if grad_norm <= config.grad_tol {
            converged = true;
            break;
        }

        let direction_dofs: Vec<T> = match &gram {
            Some(solver) => solver.apply_inverse(&grad, dim),
            None => grad.clone(),
        };
        let slope = -grad
            .iter()
            .zip(&direction_dofs)
            .fold(T::zero(), |acc, (&g, &d)| acc + g * d);
        debug_assert!(slope < T::zero(), "descent slope must be negative");
        let direction = Perturbation::from_dofs(dim, horizon, n, &direction_dofs);

        let mut step = config.initial_step;
        let mut accepted = None;
        while step >= min_step {
            let candidate = x.offset_by(&direction, -step);
            let j_new = evaluate_j(problem, &candidate, &rule);
            // Compare as a difference: the sum form rounds the tiny negative
            // bound away near the minimum and accepts zero-progress steps.
            if j_new - j_value <= config.armijo * step * slope {
                accepted = Some((candidate, j_new));
                break;
            }
            step = step * config.backtrack;
        }
        let Some((candidate, j_new)) = accepted else {
            diagnostic = Some(format!(
                "line search found no descent above step {MIN_STEP} at iteration {iterations} \
                 (gradient sup-norm {grad_norm})"
            ));
            break;
        };

        x = candidate;
        j_value = j_new;
        j_history.push(j_value);
        iterations += 1;
        observer(&IterationRecord {
            iteration: iterations,
            j_value,
            grad_norm,
            step,
        });
    }

    if !converged && diagnostic.is_none() && iterations >= config.max_iters {
        // Re-test the gradient after the final step.
        let grad = gradient(problem, &x, &basis, &rule);
        grad_norm = sup_norm(&grad);
        if grad_norm <= config.grad_tol {
            converged = true;
        } else {
            diagnostic = Some(format!(
                "stopped at max_iters = {} with gradient sup-norm {grad_norm}",
                config.max_iters
            ));
        }
    }

    Ok(SolveResult {
        trajectory: x,
        j_history,
        final_grad_norm: grad_norm,
        iterations,
        converged,
        diagnostic,
    })
}

/// One row of a grid-refinement study.
#[derive(Debug, Clone)]
pub struct LevelReport<T> {
    pub intervals: usize,
    pub converged: bool,
    pub iterations: usize,
    pub j_value: T,
    pub grad_norm: T,
    pub residual_osc: T,
    pub weak_max: T,
}

/// Runs `minimize` at each grid level and reports the cost, gradient norm,
/// stationarity residual, and weak-form violation per level. Non-convergence
/// at a level is recorded in its row rather than aborting the study.
pub fn convergence_study<T: Real>(
    problem: &(impl DelayLagrangian<T> + ?Sized),
    history: &HistoryFunction<T>,
    target: &[T],
    base: &SolveConfig<T>,
    levels: &[usize],
) -> CoreResult<Vec<LevelReport<T>>> {
    let mut out = Vec::with_capacity(levels.len());
    for &intervals in levels {
        let mut config = base.clone();
        config.intervals = intervals;
        let result = minimize(problem, history, target, &config)?;
        let rule = rule_for(problem, config.subsamples);
        let report = el_data(problem, &result.trajectory, &rule);
        let basis = basis_perturbations::<T>(intervals, problem.dim(), problem.horizon())?;
        let weak = weak_stationarity(problem, &result.trajectory, &basis, &rule);
        out.push(LevelReport {
            intervals,
            converged: result.converged,
            iterations: result.iterations,
            j_value: result.j_value(),
            grad_norm: result.final_grad_norm,
            residual_osc: report.residual_osc,
            weak_max: weak.max_normalized,
        });
    }
    Ok(out)
}

/// Cholesky factor of the per-coordinate Gram matrix of the dof basis in the
/// `integral of (u.v + u'.v')` product. The matrix is identical across
/// coordinates, so one factorization serves all of them.
struct GramSolver<T> {
    factor: Vec<Vec<T>>,
}

impl<T: Real> GramSolver<T> {
    fn new(intervals: usize, horizon: T, subsamples: usize) -> Self {
        let matrix = hermite_gram(intervals, horizon, subsamples.max(8));
        let factor = cholesky(matrix).expect("dof Gram matrix is positive definite");
        Self { factor }
    }

    /// Solves `M d = g` coordinate by coordinate on the packed dof layout.
    fn apply_inverse(&self, packed: &[T], dim: usize) -> Vec<T> {
        let size = self.factor.len();
        debug_assert_eq!(packed.len(), size * dim);
        let mut out = vec![T::zero(); packed.len()];
        for k in 0..dim {
            let rhs: Vec<T> = (0..size).map(|i| packed[i * dim + k]).collect();
            let solved = cholesky_solve(&self.factor, &rhs);
            for (i, v) in solved.into_iter().enumerate() {
                out[i * dim + k] = v;
            }
        }
        out
    }
}

/// Scalar dof index: interior value dofs first (`node 1..N-1`), then
/// derivative dofs (`node 0..N`); matches the packed perturbation layout.
fn scalar_dof_index(intervals: usize, node: usize, is_deriv: bool) -> Option<usize> {
    if is_deriv {
        Some((intervals - 1) + node)
    } else if node >= 1 && node < intervals {
        Some(node - 1)
    } else {
        None
    }
}

fn hermite_gram<T: Real>(intervals: usize, horizon: T, subsamples: usize) -> Vec<Vec<T>> {
    let size = dof_count(intervals, 1);
    let h = horizon / count::<T>(intervals);
    // Local shape functions on [0, 1]: value-left, deriv-left, value-right,
    // deriv-right; derivative dofs carry the step factor.
    let shape = |a: usize, s: T| -> (T, T) {
        let one = T::one();
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let s2 = s * s;
        let s3 = s2 * s;
        match a {
            0 => (two * s3 - three * s2 + one, lit::<T>(6.0) * (s2 - s)),
            1 => (
                h * (s3 - two * s2 + s),
                h * (three * s2 - lit::<T>(4.0) * s + one),
            ),
            2 => (-two * s3 + three * s2, lit::<T>(6.0) * (s - s2)),
            _ => (h * (s3 - s2), h * (three * s2 - two * s)),
        }
    };
    // Local 4x4 value+derivative Gram by composite Simpson in s.
    let mut local = [[T::zero(); 4]; 4];
    let m = count::<T>(subsamples);
    let ds = T::one() / m;
    let third = ds / lit::<T>(3.0);
    for i in 0..=subsamples {
        let s = if i == subsamples {
            T::one()
        } else {
            ds * count(i)
        };
        let coeff = if i == 0 || i == subsamples {
            T::one()
        } else if i % 2 == 1 {
            lit(4.0)
        } else {
            lit(2.0)
        };
        let w = coeff * third;
        let vals: Vec<(T, T)> = (0..4).map(|a| shape(a, s)).collect();
        for a in 0..4 {
            for b in 0..4 {
                // dt = h ds, d/dt = (1/h) d/ds.
                local[a][b] = local[a][b]
                    + w * (h * vals[a].0 * vals[b].0 + vals[a].1 * vals[b].1 / h);
            }
        }
    }

    let mut matrix = vec![vec![T::zero(); size]; size];
    for j in 0..intervals {
        let targets = [
            scalar_dof_index(intervals, j, false),
            scalar_dof_index(intervals, j, true),
            scalar_dof_index(intervals, j + 1, false),
            scalar_dof_index(intervals, j + 1, true),
        ];
        for (a, ia) in targets.iter().enumerate() {
            let Some(ia) = ia else { continue };
            for (b, ib) in targets.iter().enumerate() {
                let Some(ib) = ib else { continue };
                matrix[*ia][*ib] = matrix[*ia][*ib] + local[a][b];
            }
        }
    }
    matrix
}

fn cholesky<T: Real>(mut a: Vec<Vec<T>>) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum = sum - a[i][k] * a[j][k];
            }
            if i == j {
                if sum <= T::zero() {
                    return None;
                }
                a[i][i] = sum.sqrt();
            } else {
                a[i][j] = sum / a[j][j];
            }
        }
        for j in (i + 1)..n {
            a[i][j] = T::zero();
        }
    }
    Some(a)
}

fn cholesky_solve<T: Real>(l: &[Vec<T>], rhs: &[T]) -> Vec<T> {
    let n = l.len();
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut sum = rhs[i];
        for k in 0..i {
            sum = sum - l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum = sum - l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    x
}
