use std::time::Instant;

use nalgebra::DVector;

use crate::error::{PdrError, Result};
use crate::splitting::{
    merit_value, safeguard_update, DivergenceProbe, IterateTriple, PdrConfig, SolveTrace,
    SplittingScheme, StepNorms, Termination,
};

/// One parameterized Douglas–Rachford step from the two proximal maps.
///
/// `prox_g` receives the reflected point `α u⁺ − x` unscaled; regularized variants
/// apply their own scaling inside it.
pub fn pdr_step<F, G>(
    mut prox_f: F,
    mut prox_g: G,
    state: &IterateTriple,
    gamma: f64,
    alpha: f64,
) -> Result<IterateTriple>
where
    F: FnMut(&DVector<f64>, f64) -> Result<DVector<f64>>,
    G: FnMut(&DVector<f64>, f64) -> Result<DVector<f64>>,
{
    if !(gamma > 0.0) {
        return Err(PdrError::InvalidParameter(format!(
            "step requires gamma > 0, got {gamma}"
        )));
    }
    let u = prox_f(&state.x, gamma)?;
    let reflected = &u * alpha - &state.x;
    let v = prox_g(&reflected, gamma)?;
    let x = &state.x + (&v - &u);
    Ok(IterateTriple {
        u,
        v,
        x,
        t: state.t + 1,
    })
}

/// Relative-change test over all three blocks, denominators clamped at one.
pub fn relative_change_stop(prev: &IterateTriple, cur: &IterateTriple, tol: f64) -> bool {
    let change = (&cur.u - &prev.u)
        .norm()
        .max((&cur.v - &prev.v).norm())
        .max((&cur.x - &prev.x).norm());
    let scale = prev.u.norm().max(prev.v.norm()).max(prev.x.norm()).max(1.0);
    change / scale < tol
}

fn step_norms(prev: &IterateTriple, cur: &IterateTriple) -> StepNorms {
    StepNorms {
        du: (&cur.u - &prev.u).norm(),
        dv: (&cur.v - &prev.v).norm(),
        dx: (&cur.x - &prev.x).norm(),
    }
}

/// Run `scheme` from `x0` until its stop rule fires, `max_iter` is reached, or an iterate
/// turns non-finite.
///
/// The step size starts at `cfg.k · gamma0` and is shrunk by the safeguard while it is
/// above `gamma0`; the scheme is told about every change before its next step.
pub fn run_solver<S: SplittingScheme + ?Sized>(
    scheme: &mut S,
    x0: &DVector<f64>,
    cfg: &PdrConfig,
    gamma0: f64,
    record_merit: bool,
) -> Result<SolveTrace> {
    cfg.validate()?;
    if x0.len() != scheme.dim() {
        return Err(PdrError::DimensionMismatch {
            expected: scheme.dim(),
            got: x0.len(),
        });
    }
    if !x0.iter().all(|z| z.is_finite()) {
        return Err(PdrError::InvalidParameter("x0 must be finite".into()));
    }
    if !(gamma0 > 0.0) || !gamma0.is_finite() {
        return Err(PdrError::InvalidParameter(format!(
            "gamma0 must be positive, got {gamma0}"
        )));
    }
    let merit_alpha = if record_merit { scheme.merit_alpha() } else { None };
    if let Some(a) = scheme.merit_alpha() {
        if a != cfg.alpha {
            return Err(PdrError::InvalidParameter(format!(
                "config alpha {} does not match scheme alpha {a}",
                cfg.alpha
            )));
        }
    }

    let started = Instant::now();
    let mut gamma = cfg.k * gamma0;
    scheme.set_gamma(gamma)?;

    let mut trace = SolveTrace {
        iterations: 0,
        final_state: IterateTriple::start(x0),
        merit_history: Vec::new(),
        residual_history: Vec::new(),
        gamma_history: vec![(0, gamma)],
        step_history: Vec::new(),
        termination: Termination::MaxIter,
        wall_time: 0.0,
    };
    let mut state = IterateTriple::start(x0);

    for _ in 0..cfg.max_iter {
        let next = scheme.step(&state, gamma)?;
        let t = next.t;
        trace.iterations = t;
        if !next.is_finite() {
            trace.final_state = next;
            trace.termination = Termination::Diverged;
            trace.wall_time = started.elapsed().as_secs_f64();
            return Ok(trace);
        }
        trace.step_history.push(step_norms(&state, &next));
        trace.residual_history.push((&next.v - &next.u).norm());
        if let Some(alpha) = merit_alpha {
            let m = merit_value(&*scheme, &next, gamma, alpha)?;
            trace.merit_history.push(m.value_primary);
        }

        // safeguard
        if let Some(probe) = scheme.divergence_probe() {
            let (change, sup) = match probe {
                DivergenceProbe::SecondBlock => ((&next.v - &state.v).norm(), next.v.amax()),
                DivergenceProbe::FirstBlockScaled(scale) => {
                    ((&next.u - &state.u).norm() * scale, next.u.amax())
                }
            };
            let updated = safeguard_update(gamma, gamma0, change, sup, t, &cfg.safeguard);
            if updated != gamma {
                gamma = updated;
                scheme.set_gamma(gamma)?;
                trace.gamma_history.push((t, gamma));
            }
        }

        let stop = scheme.should_stop(&state, &next, cfg.tol);
        state = next;
        if stop {
            trace.termination = Termination::Converged;
            break;
        }
    }
    trace.final_state = state;
    trace.wall_time = started.elapsed().as_secs_f64();
    Ok(trace)
}
