//! Log-barrier interior-point method for `min c^T x` subject to smooth convex
//! constraints `g_i(x) <= 0` with sparse, banded derivatives.

use crate::config::ScaHyperParams;
use crate::error::{Error, Result};

/// Value and derivatives of one constraint `g(x) <= 0`.
#[derive(Clone, Debug, Default)]
pub struct ConstraintEval {
    pub value: f64,
    pub grad: Vec<(usize, f64)>,
    /// Lower and upper triangle entries, duplicates are summed.
    pub hess: Vec<(usize, usize, f64)>,
}

pub trait BarrierProgram {
    fn dim(&self) -> usize;
    /// Cost vector of the linear objective.
    fn cost(&self) -> &[f64];
    fn constraints(&self, x: &[f64]) -> Vec<ConstraintEval>;
    /// Constraint values only; used by the line search.
    fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints(x).into_iter().map(|c| c.value).collect()
    }
}

#[derive(Clone, Debug)]
pub struct BarrierReport {
    pub x: Vec<f64>,
    pub newton_iters: usize,
    pub stages: usize,
    /// `||c + sum lambda_i grad g_i||_inf / ||c||_inf` with `lambda_i = 1 / (t (-g_i))`.
    pub kkt_residual: f64,
    /// Duality gap bound `m / t` of the last centering stage.
    pub gap: f64,
    pub max_violation: f64,
    /// Cost `c^T x` after each stage.
    pub trace: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Symmetric positive definite band matrix, dense row storage.
struct BandMatrix {
    n: usize,
    bw: usize,
    a: Vec<f64>,
}

impl BandMatrix {
    fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix { n, bw, a: vec![0.0; n * n] }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] += v;
    }

    /// Solves `A x = b` in place with a band Cholesky factorization.
    fn solve(&self, b: &mut [f64]) -> Option<()> {
        let (n, bw) = (self.n, self.bw);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let lo = j.saturating_sub(bw);
            let mut s = self.a[j * n + j];
            for k in lo..j {
                s -= l[j * n + k] * l[j * n + k];
            }
            if !(s > 0.0) {
                return None;
            }
            let d = s.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n.min(j + bw + 1) {
                let mut s = self.a[i * n + j];
                for k in i.saturating_sub(bw).max(lo)..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= l[i * n + k] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n.min(i + bw + 1) {
                s -= l[k * n + i] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
        Some(())
    }
}

/// Barrier function `t c^T x - sum log(-g_i(x))`, `None` outside the domain.
fn barrier_value<P: BarrierProgram + ?Sized>(prog: &P, t: f64, x: &[f64]) -> Option<f64> {
    let mut v = t * dot(prog.cost(), x);
    for g in prog.constraint_values(x) {
        if !(g < 0.0) {
            return None;
        }
        v -= (-g).ln();
    }
    Some(v)
}

/// Gradient and Hessian of the barrier function at `x`.
fn barrier_derivatives<P: BarrierProgram + ?Sized>(
    prog: &P,
    t: f64,
    x: &[f64],
    evals: &[ConstraintEval],
) -> (Vec<f64>, BandMatrix) {
    let n = prog.dim();
    let bw = evals
        .iter()
        .map(|c| {
            let lo = c.grad.iter().map(|g| g.0).min().unwrap_or(0);
            let hi = c.grad.iter().map(|g| g.0).max().unwrap_or(0);
            hi - lo
        })
        .max()
        .unwrap_or(0);
    let mut grad: Vec<f64> = prog.cost().iter().map(|c| t * c).collect();
    let mut h = BandMatrix::zeros(n, bw);
    for c in evals {
        let inv = 1.0 / -c.value;
        for &(i, gi) in &c.grad {
            grad[i] += gi * inv;
            for &(j, gj) in &c.grad {
                h.add(i, j, gi * gj * inv * inv);
            }
        }
        for &(i, j, v) in &c.hess {
            h.add(i, j, v * inv);
        }
    }
    debug_assert_eq!(x.len(), n);
    (grad, h)
}

/// Minimizes `c^T x` over the interior of the constraints starting from the
/// strictly feasible `x0`.
pub fn solve_barrier<P: BarrierProgram + ?Sized>(
    prog: &P,
    x0: Vec<f64>,
    params: &ScaHyperParams,
) -> Result<BarrierReport> {
    let n = prog.dim();
    if x0.len() != n {
        return Err(Error::Dimension(format!("start point has {} entries, expected {n}", x0.len())));
    }
    let cost = prog.cost();
    let c_norm = inf_norm(cost);
    let evals = prog.constraints(&x0);
    if let Some(bad) = evals.iter().find(|c| !(c.value < 0.0)) {
        return Err(Error::solver("barrier", format!("start point not strictly feasible (g = {:e})", bad.value)));
    }
    let m = evals.len();
    if c_norm == 0.0 || m == 0 || n == 0 {
        if c_norm > 0.0 {
            return Err(Error::solver("barrier", "unbounded linear objective without constraints"));
        }
        let max_violation = evals.iter().fold(f64::NEG_INFINITY, |a, c| a.max(c.value)).max(0.0);
        return Ok(BarrierReport {
            trace: vec![dot(cost, &x0)],
            x: x0,
            newton_iters: 0,
            stages: 0,
            kkt_residual: 0.0,
            gap: 0.0,
            max_violation,
            converged: true,
        });
    }

    // Initial weight balances the cost against the barrier gradient.
    let (bgrad, _) = barrier_derivatives(prog, 0.0, &x0, &evals);
    let mut t = (inf_norm(&bgrad) / c_norm).clamp(1e-6, 1e6) * 1.0;
    let mut x = x0;
    let mut newton_iters = 0;
    let mut stages = 0;
    let mut trace = Vec::new();
    let mut kkt = f64::INFINITY;
    let mut converged = false;
    let growth = params.barrier_growth.max(1.5);
    loop {
        stages += 1;
        let mut centered = false;
        for _ in 0..params.max_newton_iters {
            let evals = prog.constraints(&x);
            let (grad, mut hess) = barrier_derivatives(prog, t, &x, &evals);
            kkt = inf_norm(&grad) / (t * c_norm);
            let mut dx: Vec<f64> = grad.iter().map(|g| -g).collect();
            let mut reg = 0.0;
            loop {
                let mut trial = dx.clone();
                if hess.solve(&mut trial).is_some() {
                    dx = trial;
                    break;
                }
                let diag = (0..n).map(|i| hess.a[i * n + i].abs()).fold(0.0, f64::max).max(1e-300);
                let next = if reg == 0.0 { diag * 1e-12 } else { reg * 10.0 };
                for i in 0..n {
                    hess.add(i, i, next - reg);
                }
                reg = next;
                if reg > diag * 1e3 {
                    return Err(Error::solver("barrier", "Newton system is not positive definite"));
                }
            }
            newton_iters += 1;
            let decrement = -dot(&grad, &dx);
            if !(decrement > 0.0) || decrement / 2.0 <= 1e-10 {
                centered = true;
                break;
            }
            let f0 = barrier_value(prog, t, &x).expect("iterate stays interior");
            let mut s = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + s * d).collect();
                if let Some(f) = barrier_value(prog, t, &trial) {
                    if f <= f0 - 0.25 * s * decrement {
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                // Rounding floor reached; treat as centered.
                centered = true;
                break;
            }
        }
        trace.push(dot(cost, &x));
        let gap = m as f64 / t;
        if !centered {
            break;
        }
        if gap <= params.gap_tol {
            converged = true;
            break;
        }
        t *= growth;
    }
    let evals = prog.constraints(&x);
    let max_violation = evals.iter().fold(f64::NEG_INFINITY, |a, c| a.max(c.value)).max(0.0);
    Ok(BarrierReport {
        x,
        newton_iters,
        stages,
        kkt_residual: kkt,
        gap: m as f64 / t,
        max_violation,
        trace,
        converged,
    })
}
