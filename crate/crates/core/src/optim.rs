//! Limited-memory BFGS with Armijo backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// L-BFGS settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Number of stored `(s, y)` correction pairs.
    pub memory: usize,
    /// Stop once `max_i |∇f_i|` falls below this.
    pub gradient_tolerance: f64,
    /// Sufficient-decrease constant.
    pub armijo_c: f64,
    pub shrink: f64,
    /// Line search gives up after this many step halvings.
    pub max_shrinks: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 1000,
            memory: 10,
            gradient_tolerance: 1e-6,
            armijo_c: 1e-4,
            shrink: 0.5,
            max_shrinks: 50,
        }
    }
}

impl OptimizerConfig {
    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        if self.memory == 0 {
            return Err(Error::invalid("memory must be >= 1"));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::invalid("gradient tolerance must be > 0"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::invalid("armijo constant must be in (0,1)"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::invalid("shrink factor must be in (0,1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// No step satisfied the Armijo condition; the result is the best point found.
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_max_abs: f64,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

struct History {
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    rho: Vec<f64>,
    cap: usize,
}

impl History {
    fn new(cap: usize) -> Self {
        History {
            s: Vec::with_capacity(cap),
            y: Vec::with_capacity(cap),
            rho: Vec::with_capacity(cap),
            cap,
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>, sy: f64) {
        if self.s.len() == self.cap {
            self.s.remove(0);
            self.y.remove(0);
            self.rho.remove(0);
        }
        self.s.push(s);
        self.y.push(y);
        self.rho.push(1.0 / sy);
    }

    fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
        self.rho.clear();
    }

    /// Two-loop recursion: `−H g` with `H₀ = (sᵀy / yᵀy) I`.
    fn direction(&self, g: &[f64], dir: &mut [f64]) {
        dir.copy_from_slice(g);
        let len = self.s.len();
        let mut alphas = vec![0.0; len];
        for j in (0..len).rev() {
            let a = self.rho[j] * dot(&self.s[j], dir);
            alphas[j] = a;
            dir.iter_mut().zip(&self.y[j]).for_each(|(d, y)| *d -= a * y);
        }
        if let Some(last) = len.checked_sub(1) {
            let gamma = 1.0 / (self.rho[last] * dot(&self.y[last], &self.y[last]));
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for j in 0..len {
            let b = self.rho[j] * dot(&self.y[j], dir);
            let a = alphas[j];
            dir.iter_mut().zip(&self.s[j]).for_each(|(d, s)| *d += (a - b) * s);
        }
        dir.iter_mut().for_each(|d| *d = -*d);
    }
}

/// Minimizes `f` from `x0`. `f(x, grad)` returns the objective and writes its gradient.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, config: &OptimizerConfig) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let dim = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; dim];
    let mut value = f(&x, &mut g);
    let mut trace = vec![value];
    let mut history = History::new(config.memory);
    let mut dir = vec![0.0; dim];
    let mut x_new = vec![0.0; dim];
    let mut g_new = vec![0.0; dim];
    let mut iterations = 0;

    let termination = loop {
        if max_abs(&g) < config.gradient_tolerance {
            break Termination::Converged;
        }
        if iterations >= config.max_iterations {
            break Termination::MaxIterations;
        }
        history.direction(&g, &mut dir);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = -dot(&g, &g);
        }
        let mut step = if history.s.is_empty() {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..=config.max_shrinks {
            x_new
                .iter_mut()
                .zip(&x)
                .zip(&dir)
                .for_each(|((xn, xi), d)| *xn = xi + step * d);
            let candidate = f(&x_new, &mut g_new);
            if candidate <= value + config.armijo_c * step * slope {
                accepted = Some(candidate);
                break;
            }
            step *= config.shrink;
        }
        let Some(new_value) = accepted else {
            break Termination::LineSearchFailed;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            history.push(s, y, sy);
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        value = new_value;
        trace.push(value);
        iterations += 1;
    };

    Minimum {
        gradient_max_abs: max_abs(&g),
        x,
        value,
        trace,
        iterations,
        termination,
    }
}
