//! Damped Newton iteration with backtracking on an open admissible set.
//!
//! Shared by the covariance-fitting and spectrum-approximation duals. The
//! objective decides admissibility before anything else is evaluated, so the
//! iteration never touches a point outside the domain.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Stop once the Euclidean norm of the gradient coordinates drops below this.
    pub tolerance: f64,
    /// Armijo constant, `0 < alpha < 1/2`.
    pub alpha: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "Armijo constant must lie in (0, 1/2), got {}",
                self.alpha
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// One accepted Newton step (or the terminal point, with `step = 0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub value: f64,
    pub gradient_norm: f64,
    pub step: f64,
    pub margin: f64,
}

/// Data cached at an admissible point.
pub trait EvaluatedPoint<T: Real> {
    fn value(&self) -> T;
    fn margin(&self) -> T;
}

pub trait NewtonObjective<T: Real> {
    type Point: EvaluatedPoint<T>;

    /// Evaluates at `x`, or returns `None` when `x` is outside the admissible set.
    fn evaluate(&self, x: &DVector<T>) -> Result<Option<Self::Point>>;

    fn gradient(&self, point: &Self::Point) -> DVector<T>;

    /// Solves `H(x) d = -g` for the search direction `d`.
    fn newton_direction(&self, point: &Self::Point, gradient: &DVector<T>) -> Result<DVector<T>>;
}

pub struct NewtonOutcome<T: Real, P> {
    pub x: DVector<T>,
    pub point: P,
    pub gradient: DVector<T>,
    pub trace: Vec<IterationRecord>,
}

pub fn damped_newton<T: Real, O: NewtonObjective<T>>(
    objective: &O,
    x0: DVector<T>,
    options: &NewtonOptions,
) -> Result<NewtonOutcome<T, O::Point>> {
    options.validate()?;
    let tolerance = T::lit(options.tolerance);
    let alpha = T::lit(options.alpha);
    let half = T::lit(0.5);

    let mut x = x0;
    let mut point = objective.evaluate(&x)?.ok_or(Error::InitialPointInadmissible)?;
    let mut trace = Vec::new();

    for iteration in 0..=options.max_iterations {
        let gradient = objective.gradient(&point);
        let gnorm = gradient.norm();
        if gnorm < tolerance {
            trace.push(record(iteration, &point, gnorm, T::zero()));
            return Ok(NewtonOutcome {
                x,
                point,
                gradient,
                trace,
            });
        }
        if iteration == options.max_iterations {
            trace.push(record(iteration, &point, gnorm, T::zero()));
            return Err(Error::MaxIterationsExceeded {
                iterations: iteration,
                gradient_norm: gnorm.as_f64(),
                trace,
            });
        }

        let direction = objective.newton_direction(&point, &gradient)?;
        let slope = gradient.dot(&direction);
        let current = point.value();
        // Near the optimum the predicted decrease falls below the rounding
        // level of the objective; allow that much slack in the Armijo test.
        let slack = T::lit(64.0) * T::eps() * (T::one() + current.abs());

        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let candidate = &x + &direction * t;
            if let Some(p) = objective.evaluate(&candidate)? {
                if p.value() <= current + alpha * t * slope + slack {
                    accepted = Some((candidate, p));
                    break;
                }
            }
            t *= half;
        }
        let Some((next_x, next_point)) = accepted else {
            trace.push(record(iteration, &point, gnorm, T::zero()));
            return Err(Error::MaxIterationsExceeded {
                iterations: iteration,
                gradient_norm: gnorm.as_f64(),
                trace,
            });
        };
        trace.push(record(iteration, &point, gnorm, t));
        x = next_x;
        point = next_point;
    }
    unreachable!("loop returns on its last iteration")
}

fn record<T: Real, P: EvaluatedPoint<T>>(iteration: usize, p: &P, gnorm: T, step: T) -> IterationRecord {
    IterationRecord {
        iteration,
        value: p.value().as_f64(),
        gradient_norm: gnorm.as_f64(),
        step: step.as_f64(),
        margin: p.margin().as_f64(),
    }
}
