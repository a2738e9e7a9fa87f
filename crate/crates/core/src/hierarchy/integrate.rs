//! Classical RK4 time stepping of the truncated hierarchy.

use serde::Serialize;

use super::operators::{Hierarchy, Part};
use super::{CorrelationVector, BLOW_UP_THRESHOLD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Scale parameters at which `‖k_t‖_ϑ` is recorded.
    pub thetas: Vec<f64>,
    /// Steps between recorded samples (`0`: only the endpoints).
    pub record_every: usize,
    /// Existence horizon `T(ϑ, ϑ₀)`; exceeding it only adds a warning.
    pub horizon: Option<f64>,
    pub keep_states: bool,
    /// Generator pieces; all four by default.
    pub parts: Vec<Part>,
    /// Shift used by `B` and `C` when they appear in `parts`.
    pub omega: Option<f64>,
}

impl IntegrateOptions {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            thetas: Vec::new(),
            record_every: 0,
            horizon: None,
            keep_states: false,
            parts: Part::ALL.to_vec(),
            omega: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSample {
    pub time: f64,
    pub theta: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// States at `times` when requested.
    pub states: Vec<CorrelationVector>,
    pub norms: Vec<NormSample>,
    pub warnings: Vec<String>,
    pub final_state: CorrelationVector,
    pub steps: usize,
}

/// Integrates `dk/dt = Σ parts · k` from `k0` with RK4 on a uniform grid of
/// `⌈t_end/dt⌉` steps.
pub fn integrate(
    h: &Hierarchy,
    k0: &CorrelationVector,
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::param(format!("dt must be > 0, got {}", opts.dt)));
    }
    if !(opts.t_end >= 0.0 && opts.t_end.is_finite()) {
        return Err(Error::param(format!(
            "t_end must be >= 0, got {}",
            opts.t_end
        )));
    }
    let mut warnings = Vec::new();
    if let Some(horizon) = opts.horizon {
        if opts.t_end > horizon {
            warnings.push(format!(
                "t_end = {} exceeds the existence horizon T = {horizon}; the truncated flow is integrated anyway",
                opts.t_end
            ));
        }
    }
    let steps = (opts.t_end / opts.dt).ceil() as usize;
    let dt = if steps == 0 {
        0.0
    } else {
        opts.t_end / steps as f64
    };
    let rhs = |k: &CorrelationVector| h.apply_parts(k, &opts.parts, opts.omega);

    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        norms: Vec::new(),
        warnings,
        final_state: k0.clone(),
        steps,
    };
    let record = |traj: &mut Trajectory, t: f64, k: &CorrelationVector| {
        traj.times.push(t);
        for &theta in &opts.thetas {
            traj.norms.push(NormSample {
                time: t,
                theta,
                norm: k.norm_theta(theta),
            });
        }
        if opts.keep_states {
            traj.states.push(k.clone());
        }
    };
    record(&mut traj, 0.0, k0);
    let mut k = k0.clone();
    for step in 1..=steps {
        let k1 = rhs(&k)?;
        let k2 = rhs(&k.axpy(dt / 2.0, &k1))?;
        let k3 = rhs(&k.axpy(dt / 2.0, &k2))?;
        let k4 = rhs(&k.axpy(dt, &k3))?;
        k = k
            .axpy(dt / 6.0, &k1)
            .axpy(dt / 3.0, &k2)
            .axpy(dt / 3.0, &k3)
            .axpy(dt / 6.0, &k4);
        let t = step as f64 * dt;
        let worst = k.max_abs();
        if !(worst <= BLOW_UP_THRESHOLD) {
            return Err(Error::BlowUp {
                time: t,
                value: worst,
            });
        }
        if step == steps || (opts.record_every > 0 && step % opts.record_every == 0) {
            record(&mut traj, t, &k);
        }
    }
    traj.final_state = k;
    Ok(traj)
}
