//! Damped Newton iteration with an analytic Jacobian, shared by the
//! equilibrium and saddle-node solvers.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions<F> {
    /// Success when the sup-norm residual drops to this level.
    pub tol: F,
    pub max_iter: usize,
    /// Step halvings allowed per iteration when the residual does not
    /// decrease.
    pub max_damping: usize,
    /// Clamp iterates to the nonnegative orthant.
    pub clamp_nonnegative: bool,
}

impl<F: Real> Default for NewtonOptions<F> {
    fn default() -> Self {
        Self { tol: F::lit(1e-12), max_iter: 100, max_damping: 30, clamp_nonnegative: false }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSolution<F> {
    pub x: DVector<F>,
    pub residual: F,
    pub iterations: usize,
}

/// Non-convergence is a value, not a fault.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonFailure {
    SingularJacobian,
    /// No damped step reduced the residual.
    Stalled,
    IterationCap,
    NonFiniteResidual,
}

fn sup_norm<F: Real>(v: &DVector<F>) -> F {
    v.iter().fold(F::zero(), |acc, x| acc.max(x.abs()))
}

/// Solve `f(x) = 0` from `x0`.
pub fn newton<F, Func, Jac>(
    mut f: Func,
    mut jac: Jac,
    x0: &DVector<F>,
    opts: &NewtonOptions<F>,
) -> Result<NewtonSolution<F>, NewtonFailure>
where
    F: Real,
    Func: FnMut(&DVector<F>) -> DVector<F>,
    Jac: FnMut(&DVector<F>) -> DMatrix<F>,
{
    let clamp = |mut x: DVector<F>| {
        if opts.clamp_nonnegative {
            for v in x.iter_mut() {
                *v = v.max(F::zero());
            }
        }
        x
    };

    let mut x = clamp(x0.clone());
    let mut fx = f(&x);
    let mut res = sup_norm(&fx);
    if !res.is_finite() {
        return Err(NewtonFailure::NonFiniteResidual);
    }

    for iteration in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(NewtonSolution { x, residual: res, iterations: iteration });
        }
        let j = jac(&x);
        let lu = j.lu();
        let step = match lu.solve(&(-&fx)) {
            Some(s) => s,
            None => return Err(NewtonFailure::SingularJacobian),
        };

        let mut t = F::one();
        let mut accepted = false;
        for _ in 0..=opts.max_damping {
            let trial = clamp(&x + &step * t);
            let ftrial = f(&trial);
            let rtrial = sup_norm(&ftrial);
            if rtrial.is_finite() && rtrial < res {
                x = trial;
                fx = ftrial;
                res = rtrial;
                accepted = true;
                break;
            }
            t *= F::lit(0.5);
        }
        if !accepted {
            return Err(NewtonFailure::Stalled);
        }
    }

    if res <= opts.tol {
        return Ok(NewtonSolution { x, residual: res, iterations: opts.max_iter });
    }
    Err(NewtonFailure::IterationCap)
}
