//! Iterated Duhamel (Picard) solution of the truncated hierarchy:
//! `kⁱ⁺¹_t = S(t)k₀ + ∫₀ᵗ S(t−s)(C^{ω} + D)kⁱ_s ds`, with `S` the flow of
//! `A + B^{ω}`.

use nalgebra::{DMatrix, DVector};

use super::operators::{Hierarchy, Part};
use super::{order_len, CorrelationVector};
use crate::error::{Error, Result};

/// Largest order block (entries) propagated by a dense matrix exponential.
pub const DENSE_EXP_LIMIT: usize = 1_000_000;
/// Inner RK4 steps per quadrature step when no dense exponential is used.
const INNER_RK4_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct PicardOptions {
    pub t: f64,
    pub n_terms: usize,
    pub omega: f64,
    /// Quadrature steps on `[0, t]`.
    pub substeps: usize,
    /// Scale parameter of the reported difference norms.
    pub theta: f64,
    /// When set, `t` must lie below it.
    pub horizon: Option<f64>,
}

impl PicardOptions {
    pub fn new(t: f64, n_terms: usize, omega: f64, theta: f64) -> Self {
        Self {
            t,
            n_terms,
            omega,
            substeps: 200,
            theta,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardResult {
    pub solution: CorrelationVector,
    /// `sup_{s ≤ t} ‖kⁱ_s − kⁱ⁻¹_s‖_ϑ` for `i = 1..=n_terms`.
    pub differences: Vec<f64>,
    /// True when every order used a dense exponential.
    pub dense: bool,
}

/// `e^{Δs(A + B^{ω})}` per order.
enum Propagator {
    Dense(Vec<DMatrix<f64>>),
    Rk4 { ds: f64 },
}

impl Propagator {
    fn build(h: &Hierarchy, omega: f64, ds: f64) -> Self {
        let d = h.model.domain;
        let largest = order_len(&d, h.max_order);
        if largest * largest > DENSE_EXP_LIMIT {
            return Propagator::Rk4 { ds };
        }
        let blocks = (0..=h.max_order)
            .map(|n| {
                if n == 0 {
                    DMatrix::identity(1, 1)
                } else {
                    (h.order_block(&[Part::A, Part::B], n, Some(omega)) * ds).exp()
                }
            })
            .collect();
        Propagator::Dense(blocks)
    }

    fn step(&self, h: &Hierarchy, omega: f64, k: &CorrelationVector) -> Result<CorrelationVector> {
        match self {
            Propagator::Dense(blocks) => {
                let orders = k
                    .orders
                    .iter()
                    .zip(blocks)
                    .map(|(v, b)| (b * DVector::from_column_slice(v)).as_slice().to_vec())
                    .collect();
                Ok(CorrelationVector {
                    domain: k.domain,
                    orders,
                })
            }
            Propagator::Rk4 { ds } => {
                let dt = ds / INNER_RK4_STEPS as f64;
                let parts = [Part::A, Part::B];
                let rhs = |k: &CorrelationVector| h.apply_parts(k, &parts, Some(omega));
                let mut k = k.clone();
                // order 0 is untouched by A and B
                for _ in 0..INNER_RK4_STEPS {
                    let k1 = rhs(&k)?;
                    let k2 = rhs(&k.axpy(dt / 2.0, &k1))?;
                    let k3 = rhs(&k.axpy(dt / 2.0, &k2))?;
                    let k4 = rhs(&k.axpy(dt, &k3))?;
                    k = k
                        .axpy(dt / 6.0, &k1)
                        .axpy(dt / 3.0, &k2)
                        .axpy(dt / 3.0, &k3)
                        .axpy(dt / 6.0, &k4);
                }
                Ok(k)
            }
        }
    }
}

/// Runs `n_terms` Picard iterations starting from the `A + B^{ω}` flow.
/// The Duhamel integral uses the trapezoid rule on `substeps` intervals,
/// propagated recursively. Aborts when the successive differences grow
/// three times in a row.
pub fn picard_solve(
    h: &Hierarchy,
    k0: &CorrelationVector,
    opts: &PicardOptions,
) -> Result<PicardResult> {
    if !(opts.t >= 0.0 && opts.t.is_finite()) {
        return Err(Error::param(format!("t must be >= 0, got {}", opts.t)));
    }
    if let Some(horizon) = opts.horizon {
        if opts.t >= horizon {
            return Err(Error::Horizon { t: opts.t, horizon });
        }
    }
    if opts.substeps == 0 {
        return Err(Error::param("substeps must be >= 1"));
    }
    let j_max = opts.substeps;
    let ds = opts.t / j_max as f64;
    let omega = opts.omega;
    let prop = Propagator::build(h, omega, ds);
    let dense = matches!(prop, Propagator::Dense(_));

    let mut free = Vec::with_capacity(j_max + 1);
    free.push(k0.clone());
    for j in 0..j_max {
        let next = prop.step(h, omega, &free[j])?;
        free.push(next);
    }

    let mut current = free.clone();
    let mut differences: Vec<f64> = Vec::with_capacity(opts.n_terms);
    let zero = CorrelationVector::zeros(k0.domain, h.max_order)?;
    for _ in 0..opts.n_terms {
        let forcing = current
            .iter()
            .map(|k| h.apply_parts(k, &[Part::C, Part::D], Some(omega)))
            .collect::<Result<Vec<_>>>()?;
        let mut integral = zero.clone();
        let mut next = Vec::with_capacity(j_max + 1);
        next.push(free[0].clone());
        for j in 0..j_max {
            let si = prop.step(h, omega, &integral)?;
            let sf = prop.step(h, omega, &forcing[j])?;
            integral = si.axpy(ds / 2.0, &sf).axpy(ds / 2.0, &forcing[j + 1]);
            next.push(free[j + 1].axpy(1.0, &integral));
        }
        let diff = next
            .iter()
            .zip(&current)
            .map(|(a, b)| a.sub(b).norm_theta(opts.theta))
            .fold(0.0, f64::max);
        differences.push(diff);
        current = next;
        let n = differences.len();
        if n >= 4
            && differences[n - 1] > differences[n - 2]
            && differences[n - 2] > differences[n - 3]
            && differences[n - 3] > differences[n - 4]
        {
            return Err(Error::Divergence { last: diff });
        }
    }
    Ok(PicardResult {
        solution: current.pop().expect("non-empty"),
        differences,
        dense,
    })
}
