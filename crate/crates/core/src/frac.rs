//! Caputo fractional ODE solver.
//!
//! Integrates `D^mu x = f(x, u)`, `x(0) = x0`, in its Volterra form
//!
//! ```text
//! x(t) = x0 + 1/Gamma(mu) * integral_0^t (t - s)^(mu - 1) f(x(s), u(s)) ds
//! ```
//!
//! with a fractional Adams-Bashforth-Moulton predictor-corrector on a fixed
//! grid. The control is piecewise constant and changes only at grid points,
//! so each step interval `[t_k, t_k+1]` carries its own pair of integrand
//! samples: `f(x_k, u_k)` at the left end and `f(x_k+1^P, u_k)` at the right
//! end, both under the control that was active on that interval. The kernel is
//! product-integrated against the linear interpolant of each pair.
//!
//! For `mu = 1` a step is exactly the classical one-step Adams-Bashforth-Moulton
//! (Euler predictor, trapezoidal corrector) method. For `mu < 1` every step
//! revisits the whole history, so an `n`-step run costs `O(n^2)`.

use thiserror::Error;

use crate::special::gamma;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("memory order must lie in (0, 1], got {0}")]
    InvalidOrder(f64),
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("non-finite state at step {step}: {state:?}")]
    NonFinite { step: usize, state: Vec<f64> },
    #[error("control schedule has {got} entries but the grid has {expected} steps")]
    ScheduleLength { expected: usize, got: usize },
    #[error("rhs history is inconsistent: {left} left samples, {right} right samples")]
    InconsistentHistory { left: usize, right: usize },
}

fn check_order(order: f64) -> Result<(), SolverError> {
    if order > 0.0 && order <= 1.0 {
        Ok(())
    } else {
        Err(SolverError::InvalidOrder(order))
    }
}

/// Fixed integration grid: step size `h` in hours, step count and memory order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracGrid {
    step: f64,
    steps: usize,
    order: f64,
}

impl FracGrid {
    pub fn new(step: f64, steps: usize, order: f64) -> Result<Self, SolverError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(SolverError::InvalidStep(step));
        }
        check_order(order)?;
        Ok(Self { step, steps, order })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }
}

/// Fractional Adams-Bashforth (product rectangle) weights
/// `b_j = (n + 1 - j)^mu - (n - j)^mu`, `j = 0..=n`.
///
/// `h^mu / Gamma(mu + 1) * sum_j b_j f_j` approximates the Caputo integral
/// up to `t_{n+1}` with `f` held at the left end of every interval.
pub fn predictor_weights(order: f64, n: usize) -> Result<Vec<f64>, SolverError> {
    check_order(order)?;
    Ok((0..=n)
        .map(|j| ((n + 1 - j) as f64).powf(order) - ((n - j) as f64).powf(order))
        .collect())
}

/// Fractional Adams-Moulton (product trapezoid) node weights, `j = 0..=n+1`.
///
/// Normalised so that `h^mu * sum_j w_j f_j` approximates
/// `integral_0^{t_{n+1}} (t_{n+1} - s)^(mu - 1) f(s) ds` for the piecewise-linear
/// interpolant of `f`; for `mu = 1` they are the trapezoidal weights
/// `[1/2, 1, ..., 1, 1/2]`. These are the classical closed forms divided by
/// `mu (mu + 1)`.
pub fn corrector_weights(order: f64, n: usize) -> Result<Vec<f64>, SolverError> {
    check_order(order)?;
    let mu = order;
    let p = mu + 1.0;
    let norm = mu * (mu + 1.0);
    let nf = n as f64;
    let mut w = Vec::with_capacity(n + 2);
    w.push((nf.powf(p) - (nf - mu) * (nf + 1.0).powf(mu)) / norm);
    for j in 1..=n {
        let k = (n - j) as f64;
        w.push(((k + 2.0).powf(p) + k.powf(p) - 2.0 * (k + 1.0).powf(p)) / norm);
    }
    w.push(1.0 / norm);
    Ok(w)
}

/// Product-integration weights of one interval at lag `m`.
///
/// For the interval `[t_k, t_{k+1}]` seen from `t_{n+1}` with `m = n - k`,
/// returns `(w_left, w_right)` such that
/// `h^mu * (w_left f(t_k) + w_right f(t_{k+1}))` is the exact integral of the
/// kernel `(t_{n+1} - s)^(mu - 1)` against the linear interpolant.
pub fn interval_weights(order: f64, m: usize) -> (f64, f64) {
    let mu = order;
    let mf = m as f64;
    let i0 = ((mf + 1.0).powf(mu) - mf.powf(mu)) / mu;
    let i1 = ((mf + 1.0).powf(mu + 1.0) - mf.powf(mu + 1.0)) / (mu + 1.0);
    (i1 - mf * i0, (mf + 1.0) * i0 - i1)
}

/// Interval weights cached by lag, grown on demand.
#[derive(Debug, Clone)]
struct WeightCache {
    order: f64,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl WeightCache {
    fn new(order: f64) -> Self {
        Self {
            order,
            left: Vec::new(),
            right: Vec::new(),
        }
    }

    fn ensure(&mut self, lags: usize) {
        while self.left.len() < lags {
            let (l, r) = interval_weights(self.order, self.left.len());
            self.left.push(l);
            self.right.push(r);
        }
    }
}

/// Integrand samples of every completed step, one `(left, right)` pair per
/// step interval. This is the complete solver state besides `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsHistory<const D: usize> {
    left: Vec<[f64; D]>,
    right: Vec<[f64; D]>,
}

impl<const D: usize> Default for RhsHistory<D> {
    fn default() -> Self {
        Self::new()
    }
}

impl<const D: usize> RhsHistory<D> {
    pub fn new() -> Self {
        Self {
            left: Vec::new(),
            right: Vec::new(),
        }
    }

    pub fn with_capacity(steps: usize) -> Self {
        Self {
            left: Vec::with_capacity(steps),
            right: Vec::with_capacity(steps),
        }
    }

    pub fn from_parts(left: Vec<[f64; D]>, right: Vec<[f64; D]>) -> Result<Self, SolverError> {
        if left.len() != right.len() {
            return Err(SolverError::InconsistentHistory {
                left: left.len(),
                right: right.len(),
            });
        }
        Ok(Self { left, right })
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn clear(&mut self) {
        self.left.clear();
        self.right.clear();
    }

    pub fn left(&self) -> &[[f64; D]] {
        &self.left
    }

    pub fn right(&self) -> &[[f64; D]] {
        &self.right
    }

    /// Keeps the first `steps` entries.
    pub fn truncated(&self, steps: usize) -> Self {
        Self {
            left: self.left[..steps.min(self.len())].to_vec(),
            right: self.right[..steps.min(self.len())].to_vec(),
        }
    }

    fn push(&mut self, left: [f64; D], right: [f64; D]) {
        self.left.push(left);
        self.right.push(right);
    }
}

/// Stateful PECE stepper for a `D`-dimensional Caputo system.
#[derive(Debug, Clone)]
pub struct FracSolver<const D: usize> {
    step: f64,
    order: f64,
    /// `h^mu / Gamma(mu)`
    scale: f64,
    x0: [f64; D],
    current: [f64; D],
    history: RhsHistory<D>,
    weights: WeightCache,
    predictor_local: f64,
}

impl<const D: usize> FracSolver<D> {
    pub fn new(step: f64, order: f64, x0: [f64; D]) -> Result<Self, SolverError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(SolverError::InvalidStep(step));
        }
        check_order(order)?;
        Ok(Self {
            step,
            order,
            scale: step.powf(order) / gamma(order),
            x0,
            current: x0,
            history: RhsHistory::new(),
            weights: WeightCache::new(order),
            predictor_local: 1.0 / order,
        })
    }

    pub fn from_grid(grid: &FracGrid, x0: [f64; D]) -> Self {
        let mut solver =
            Self::new(grid.step, grid.order, x0).expect("FracGrid is validated on construction");
        solver.reserve(grid.steps);
        solver
    }

    /// Rebuilds a solver from a stored history. The current state is recomputed
    /// with the same arithmetic as the original step, so continuing from here is
    /// bit-identical to never having stopped.
    pub fn resume(
        step: f64,
        order: f64,
        x0: [f64; D],
        history: RhsHistory<D>,
    ) -> Result<Self, SolverError> {
        let mut solver = Self::new(step, order, x0)?;
        let len = history.len();
        solver.history = history;
        if len > 0 {
            solver.weights.ensure(len);
            let n = len - 1;
            let memory = solver.memory_sum(n);
            solver.current = solver.corrected(
                &memory,
                &solver.history.left[n],
                &solver.history.right[n],
            );
        }
        Ok(solver)
    }

    /// Pre-sizes the weight cache and history for `steps` steps.
    pub fn reserve(&mut self, steps: usize) {
        self.weights.ensure(steps + 1);
        let extra = steps.saturating_sub(self.history.len());
        self.history.left.reserve(extra);
        self.history.right.reserve(extra);
    }

    /// Clears the history and restarts from `x0`.
    pub fn reset(&mut self, x0: [f64; D]) {
        self.x0 = x0;
        self.current = x0;
        self.history.clear();
    }

    pub fn current(&self) -> &[f64; D] {
        &self.current
    }

    pub fn initial(&self) -> &[f64; D] {
        &self.x0
    }

    pub fn history(&self) -> &RhsHistory<D> {
        &self.history
    }

    pub fn steps_taken(&self) -> usize {
        self.history.len()
    }

    pub fn time(&self) -> f64 {
        self.history.len() as f64 * self.step
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    /// `sum_{k<n} w_left(n-k) L_k + w_right(n-k) R_k`
    fn memory_sum(&self, n: usize) -> [f64; D] {
        let mut acc = [0.0; D];
        let wl = &self.weights.left;
        let wr = &self.weights.right;
        for k in 0..n {
            let m = n - k;
            let (l, r) = (&self.history.left[k], &self.history.right[k]);
            for d in 0..D {
                acc[d] += wl[m] * l[d] + wr[m] * r[d];
            }
        }
        acc
    }

    fn corrected(&self, memory: &[f64; D], left: &[f64; D], right: &[f64; D]) -> [f64; D] {
        let (wl0, wr0) = (self.weights.left[0], self.weights.right[0]);
        let mut x = [0.0; D];
        for d in 0..D {
            x[d] = self.x0[d] + self.scale * ((memory[d] + wl0 * left[d]) + wr0 * right[d]);
        }
        x
    }

    /// Advances one grid step with the control `u` held over the step.
    ///
    /// Predict (rectangle rule on the newest interval), evaluate, correct
    /// (trapezoid on the newest interval), and store the interval's integrand
    /// pair. The closing evaluation at the corrected state happens at the start
    /// of the next step, once the next control is known.
    pub fn step<F>(&mut self, rhs: F, u: f64) -> Result<[f64; D], SolverError>
    where
        F: Fn(&[f64; D], f64) -> [f64; D],
    {
        let n = self.history.len();
        self.weights.ensure(n + 1);
        let left = rhs(&self.current, u);
        let memory = self.memory_sum(n);
        let mut predicted = [0.0; D];
        for d in 0..D {
            predicted[d] = self.x0[d] + self.scale * (memory[d] + self.predictor_local * left[d]);
        }
        let right = rhs(&predicted, u);
        let next = self.corrected(&memory, &left, &right);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite {
                step: n + 1,
                state: next.to_vec(),
            });
        }
        self.history.push(left, right);
        self.current = next;
        Ok(next)
    }
}

/// States on every grid point of a piecewise-constant-control run.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<const D: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; D]>,
}

/// Integrates over the whole grid, `schedule[k]` being the control on step `k`.
pub fn integrate_piecewise<const D: usize, F>(
    rhs: F,
    schedule: &[f64],
    x0: [f64; D],
    grid: &FracGrid,
) -> Result<Solution<D>, SolverError>
where
    F: Fn(&[f64; D], f64) -> [f64; D],
{
    if schedule.len() != grid.steps {
        return Err(SolverError::ScheduleLength {
            expected: grid.steps,
            got: schedule.len(),
        });
    }
    let mut solver = FracSolver::from_grid(grid, x0);
    let mut times = Vec::with_capacity(grid.steps + 1);
    let mut states = Vec::with_capacity(grid.steps + 1);
    times.push(0.0);
    states.push(x0);
    for (k, &u) in schedule.iter().enumerate() {
        states.push(solver.step(&rhs, u)?);
        times.push(grid.time(k + 1));
    }
    Ok(Solution { times, states })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictor_weights_examples() {
        assert_eq!(predictor_weights(1.0, 3).unwrap(), vec![1.0; 4]);
        assert_eq!(predictor_weights(0.5, 0).unwrap(), vec![1.0]);
        let w = predictor_weights(0.5, 1).unwrap();
        assert!((w[0] - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert_eq!(w[1], 1.0);
    }

    #[test]
    fn weights_reject_bad_order() {
        for mu in [0.0, -0.3, 1.2, f64::NAN] {
            assert!(predictor_weights(mu, 2).is_err());
            assert!(corrector_weights(mu, 2).is_err());
        }
    }

    #[test]
    fn corrector_weights_trapezoidal_at_unit_order() {
        assert_eq!(corrector_weights(1.0, 0).unwrap(), vec![0.5, 0.5]);
        let w = corrector_weights(1.0, 5).unwrap();
        assert_eq!(w.len(), 7);
        assert_eq!(w[0], 0.5);
        assert_eq!(w[6], 0.5);
        assert!(w[1..6].iter().all(|&x| x == 1.0));
    }

    #[test]
    fn corrector_weights_half_order_first_step() {
        // n = 0: a_0 = 0 - (0 - mu) 1^mu = mu, a_1 = 1, both over mu (mu + 1).
        let w = corrector_weights(0.5, 0).unwrap();
        assert!((w[0] - 0.5 / 0.75).abs() < 1e-15);
        assert!((w[1] - 1.0 / 0.75).abs() < 1e-15);
        // Direct integrals: int_0^1 s^-1/2 s ds = 2/3, int_0^1 s^-1/2 (1 - s) ds = 4/3.
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn corrector_weights_integrate_kernel() {
        let (mu, n) = (0.7, 10usize);
        let h: f64 = 0.01;
        let w = corrector_weights(mu, n).unwrap();
        let quad: f64 = w.iter().sum::<f64>() * h.powf(mu);
        let t = (n + 1) as f64 * h;
        let exact = t.powf(mu) / mu;
        assert!(((quad - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn interval_weights_assemble_corrector_weights() {
        for &mu in &[0.3, 0.5, 0.7, 0.85, 1.0] {
            for n in [0usize, 1, 4, 37] {
                let node = corrector_weights(mu, n).unwrap();
                for j in 0..=n + 1 {
                    let mut w = 0.0;
                    if j <= n {
                        w += interval_weights(mu, n - j).0;
                    }
                    if j >= 1 {
                        w += interval_weights(mu, n + 1 - j).1;
                    }
                    assert!(
                        (w - node[j]).abs() < 1e-12 * node[j].abs().max(1.0),
                        "mu={mu} n={n} j={j}: {w} vs {}",
                        node[j]
                    );
                }
            }
        }
    }

    #[test]
    fn predictor_weights_positive() {
        for &mu in &[0.05, 0.3, 0.5, 0.99, 1.0] {
            assert!(predictor_weights(mu, 200).unwrap().iter().all(|&b| b > 0.0));
        }
    }

    #[test]
    fn zero_rhs_keeps_state() {
        let mut s = FracSolver::new(0.01, 0.6, [3.0, -2.0]).unwrap();
        for _ in 0..50 {
            s.step(|_, _| [0.0, 0.0], 1.0).unwrap();
        }
        assert_eq!(*s.current(), [3.0, -2.0]);
    }

    #[test]
    fn non_finite_state_reports_step() {
        let mut s = FracSolver::new(0.1, 1.0, [1.0]).unwrap();
        s.step(|x, _| [x[0]], 0.0).unwrap();
        let err = s.step(|_, _| [f64::INFINITY], 0.0).unwrap_err();
        assert!(matches!(err, SolverError::NonFinite { step: 2, .. }));
    }

    #[test]
    fn reset_clears_history() {
        let mut s = FracSolver::new(0.01, 0.8, [1.0]).unwrap();
        for _ in 0..10 {
            s.step(|x, _| [-x[0]], 0.0).unwrap();
        }
        s.reset([2.0]);
        assert!(s.history().is_empty());
        assert_eq!(*s.current(), [2.0]);
        assert_eq!(s.time(), 0.0);
    }

    #[test]
    fn schedule_length_checked() {
        let grid = FracGrid::new(0.1, 3, 1.0).unwrap();
        let err = integrate_piecewise(|_: &[f64; 1], _| [0.0], &[0.0; 2], [0.0], &grid);
        assert!(matches!(
            err,
            Err(SolverError::ScheduleLength {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn empty_schedule_returns_initial_state() {
        let grid = FracGrid::new(0.1, 0, 0.5).unwrap();
        let sol = integrate_piecewise(|x: &[f64; 2], _| *x, &[], [4.0, 5.0], &grid).unwrap();
        assert_eq!(sol.states, vec![[4.0, 5.0]]);
        assert_eq!(sol.times, vec![0.0]);
    }

    #[test]
    fn grid_validation() {
        assert!(FracGrid::new(0.0, 1, 0.5).is_err());
        assert!(FracGrid::new(0.1, 1, 0.0).is_err());
        assert!(FracGrid::new(0.1, 1, 1.5).is_err());
        assert!(FracGrid::new(0.1, 0, 1.0).is_ok());
    }
}
