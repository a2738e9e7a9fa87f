//! Predual side: `Â`, `B̂^{ω}` on full (non-reduced) grid tensors, the
//! weighted `L¹` norm `|G|_ϑ = Σₙ (h^{dn}/n!) e^{ϑn} Σ_grid |G⁽ⁿ⁾|` and
//! the dissipativity functional `∫(ÂG + B̂^{ω}G) e^{ϑ|η|} dλ`.

use crate::configurations::{big_phi_sites, Sign};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::grid::TorusDomain;
use crate::kernels::KernelModel;

/// `G⁽ⁿ⁾` on `(grid)ⁿ`, flattened as `Σⱼ xⱼ Sʲ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTensors {
    pub domain: TorusDomain,
    pub orders: Vec<Vec<f64>>,
}

impl FullTensors {
    pub fn zeros(domain: TorusDomain, max_order: usize) -> Self {
        let s = domain.sites();
        Self {
            domain,
            orders: (0..=max_order)
                .map(|n| vec![0.0; s.pow(n as u32)])
                .collect(),
        }
    }

    pub fn max_order(&self) -> usize {
        self.orders.len() - 1
    }

    fn sites_of(&self, n: usize, mut idx: usize) -> Vec<usize> {
        let s = self.domain.sites();
        (0..n)
            .map(|_| {
                let v = idx % s;
                idx /= s;
                v
            })
            .collect()
    }

    fn index_of(&self, sites: &[usize]) -> usize {
        let s = self.domain.sites();
        sites.iter().rev().fold(0, |acc, &x| acc * s + x)
    }

    fn axpy(&self, c: f64, other: &Self) -> Self {
        Self {
            domain: self.domain,
            orders: self
                .orders
                .iter()
                .zip(&other.orders)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + c * y).collect())
                .collect(),
        }
    }
}

fn lambda_weights(domain: &TorusDomain, max_order: usize, theta: f64) -> Vec<f64> {
    let hv = domain.cell_volume();
    let mut w = Vec::with_capacity(max_order + 1);
    let mut fact = 1.0;
    for n in 0..=max_order {
        if n > 0 {
            fact *= n as f64;
        }
        w.push(hv.powi(n as i32) / fact * (theta * n as f64).exp());
    }
    w
}

/// `|G|_ϑ`.
pub fn dual_norm(g: &FullTensors, theta: f64) -> f64 {
    lambda_weights(&g.domain, g.max_order(), theta)
        .iter()
        .zip(&g.orders)
        .map(|(w, v)| w * v.iter().map(|x| x.abs()).sum::<f64>())
        .sum()
}

/// `(Â + B̂^{ω}) G`.
pub fn apply_dual(
    model: &KernelModel,
    g: &FullTensors,
    omega: f64,
    execution: Execution,
) -> FullTensors {
    let d = &model.domain;
    let hv = d.cell_volume();
    let sc = d.sites();
    let mut out = FullTensors::zeros(g.domain, g.max_order());
    for n in 1..=g.max_order() {
        let src = &g.orders[n];
        out.orders[n] = execution.map(src.len(), |idx| {
            let sites = g.sites_of(n, idx);
            let psi = n as f64 * (model.m_a + omega) + big_phi_sites(model, &sites, Sign::Minus);
            let mut acc = -psi * src[idx];
            let mut work = sites.clone();
            for j in 0..n {
                let x = sites[j];
                let mut sum = 0.0;
                for y in 0..sc {
                    let a = model.alpha_site(d.site_sub(y, x));
                    if a == 0.0 {
                        continue;
                    }
                    let mut rate = 1.0;
                    for (i, &z) in sites.iter().enumerate() {
                        if i != j {
                            rate += model.b_sites(x, y, z);
                        }
                    }
                    work[j] = y;
                    sum += a * rate * src[g.index_of(&work)];
                }
                work[j] = x;
                acc += hv * sum;
            }
            acc
        });
    }
    out
}

/// `∫ (ÂG + B̂^{ω}G)(η) e^{ϑ|η|} λ(dη)` on the grid; `≤ 0` for `G ≥ 0`
/// whenever `ω` is a stability constant.
pub fn check_dissipativity(
    model: &KernelModel,
    g: &FullTensors,
    theta: f64,
    omega: f64,
    execution: Execution,
) -> Result<f64> {
    if g.orders.iter().flatten().any(|v| !(*v >= 0.0)) {
        return Err(Error::param("test vector must be entrywise nonnegative"));
    }
    if !(omega >= 0.0) {
        return Err(Error::param(format!("ω must be >= 0, got {omega}")));
    }
    let lg = apply_dual(model, g, omega, execution);
    Ok(lambda_weights(&g.domain, g.max_order(), theta)
        .iter()
        .zip(&lg.orders)
        .map(|(w, v)| w * v.iter().sum::<f64>())
        .sum())
}

/// `|G_t|_ϑ` along the RK4 flow of `Â + B̂^{ω}`, sampled every step.
pub fn dual_flow_norms(
    model: &KernelModel,
    g0: &FullTensors,
    theta: f64,
    omega: f64,
    t_end: f64,
    dt: f64,
    execution: Execution,
) -> Result<Vec<(f64, f64)>> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::param("dual flow needs dt > 0 and t_end >= 0"));
    }
    let steps = (t_end / dt).ceil() as usize;
    let dt = if steps == 0 {
        0.0
    } else {
        t_end / steps as f64
    };
    let f = |g: &FullTensors| apply_dual(model, g, omega, execution);
    let mut g = g0.clone();
    let mut out = vec![(0.0, dual_norm(&g, theta))];
    for step in 1..=steps {
        let k1 = f(&g);
        let k2 = f(&g.axpy(dt / 2.0, &k1));
        let k3 = f(&g.axpy(dt / 2.0, &k2));
        let k4 = f(&g.axpy(dt, &k3));
        g = g
            .axpy(dt / 6.0, &k1)
            .axpy(dt / 3.0, &k2)
            .axpy(dt / 3.0, &k3)
            .axpy(dt / 6.0, &k4);
        out.push((step as f64 * dt, dual_norm(&g, theta)));
    }
    Ok(out)
}
