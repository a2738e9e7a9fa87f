//! Truncated, discretized correlation-function hierarchy
//! `dk/dt = (A + B + C + D) k` on the torus grid.
//!
//! Correlation functions are stored translation-reduced: `k⁽⁰⁾` and
//! `k⁽¹⁾ = ρ` are scalars, and `k⁽ⁿ⁾(x₁, …, xₙ)` for `n ≥ 2` is a tensor
//! over the separations `xⱼ − x₁`, `j = 2..n`.

mod dual;
mod integrate;
mod operators;
mod picard;

pub use dual::{check_dissipativity, dual_flow_norms, dual_norm, FullTensors};
pub use integrate::{integrate, IntegrateOptions, NormSample, Trajectory};
pub use operators::{Hierarchy, Part, Route};
pub use picard::{picard_solve, PicardOptions, PicardResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TorusDomain;

/// Largest grid side for which order-3 tensors are allowed.
pub const MAX_ORDER3_RESOLUTION: usize = 64;
/// Any entry beyond this magnitude aborts integration.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// How the first order beyond the truncation is supplied to `C` and `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureRule {
    /// `k⁽ᴺ⁺¹⁾ = 0`.
    #[default]
    ZeroTail,
    /// `k⁽ᴺ⁺¹⁾(η ∪ z) = k⁽ᴺ⁾(η) k⁽¹⁾(z)`, `z` the integrated point.
    MeanField,
}

/// Truncated family `{k⁽ⁿ⁾}_{n ≤ N}` in translation-reduced form.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVector {
    pub domain: TorusDomain,
    pub orders: Vec<Vec<f64>>,
}

/// Number of stored entries at order `n`.
pub fn order_len(domain: &TorusDomain, n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        domain.sites().pow(n as u32 - 1)
    }
}

/// Rejects truncation orders the reduced representation does not support.
pub fn check_max_order(domain: &TorusDomain, max_order: usize) -> Result<()> {
    match max_order {
        1 | 2 => Ok(()),
        3 if domain.dimension == 1 && domain.resolution <= MAX_ORDER3_RESOLUTION => Ok(()),
        3 => Err(Error::param(format!(
            "order-3 tensors need d = 1 and M <= {MAX_ORDER3_RESOLUTION} (got d = {}, M = {})",
            domain.dimension, domain.resolution
        ))),
        _ => Err(Error::param(format!(
            "truncation order must be 1, 2 or 3, got {max_order}"
        ))),
    }
}

impl CorrelationVector {
    pub fn zeros(domain: TorusDomain, max_order: usize) -> Result<Self> {
        check_max_order(&domain, max_order)?;
        let orders = (0..=max_order)
            .map(|n| vec![0.0; order_len(&domain, n)])
            .collect();
        Ok(Self { domain, orders })
    }

    /// Poisson state: `k⁽ⁿ⁾ ≡ κⁿ`.
    pub fn poisson(domain: TorusDomain, kappa: f64, max_order: usize) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::param(format!("density must be >= 0, got {kappa}")));
        }
        let mut k = Self::zeros(domain, max_order)?;
        for (n, v) in k.orders.iter_mut().enumerate() {
            v.fill(kappa.powi(n as i32));
        }
        Ok(k)
    }

    /// `k⁽⁰⁾ = 1`, `k⁽¹⁾ = ρ`, `k⁽²⁾ = g` (truncation order 2).
    pub fn from_pair(domain: TorusDomain, rho: f64, g: Vec<f64>) -> Result<Self> {
        if g.len() != domain.sites() {
            return Err(Error::param(format!(
                "pair function needs {} values, got {}",
                domain.sites(),
                g.len()
            )));
        }
        Ok(Self {
            domain,
            orders: vec![vec![1.0], vec![rho], g],
        })
    }

    pub fn max_order(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn density(&self) -> f64 {
        self.orders.get(1).map_or(0.0, |v| v[0])
    }

    /// Flat reduced index of the (unordered) point list `sites`.
    #[inline]
    pub fn reduced_index(&self, sites: &[usize]) -> usize {
        reduced_index(&self.domain, sites)
    }

    /// `k⁽ⁿ⁾(sites)` with `n = sites.len()`.
    #[inline]
    pub fn lookup(&self, sites: &[usize]) -> f64 {
        self.orders[sites.len()][self.reduced_index(sites)]
    }

    /// A representative point list `[0, s₁, …]` of reduced entry `index`.
    pub fn representative(&self, n: usize, index: usize) -> Vec<usize> {
        representative(&self.domain, n, index)
    }

    /// `sup_n e^{−ϑn} max_grid |k⁽ⁿ⁾|`: the grid analogue of the weighted
    /// sup-norm, a lower bound of the continuum norm.
    pub fn norm_theta(&self, theta: f64) -> f64 {
        self.orders
            .iter()
            .enumerate()
            .map(|(n, v)| (-theta * n as f64).exp() * max_abs(v))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.orders.iter().map(|v| max_abs(v)).fold(0.0, f64::max)
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        let orders = self
            .orders
            .iter()
            .zip(&other.orders)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + c * y).collect())
            .collect();
        Self {
            domain: self.domain,
            orders,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            domain: self.domain,
            orders: self
                .orders
                .iter()
                .map(|v| v.iter().map(|x| c * x).collect())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// Largest change of any entry under relabeling of the points.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 2..=self.max_order() {
            for (idx, &v) in self.orders[n].iter().enumerate() {
                let sites = self.representative(n, idx);
                for_each_permutation(&sites, |p| {
                    worst = worst.max((self.lookup(p) - v).abs());
                });
            }
        }
        worst
    }

    /// Mean of `k⁽²⁾` over all grid separations whose length lies in
    /// `[lo, hi)`.
    pub fn pair_bin_average(&self, lo: f64, hi: f64) -> Option<f64> {
        let g = self.orders.get(2)?;
        let mut sum = 0.0;
        let mut count = 0usize;
        for (s, v) in g.iter().enumerate() {
            let r = crate::grid::norm(self.domain.site_displacement(s), self.domain.dimension);
            if r >= lo && r < hi {
                sum += v;
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }
}

pub(crate) fn reduced_index(domain: &TorusDomain, sites: &[usize]) -> usize {
    if sites.len() <= 1 {
        return 0;
    }
    let s = domain.sites();
    let base = sites[0];
    let mut idx = 0;
    let mut stride = 1;
    for &p in &sites[1..] {
        idx += domain.site_sub(p, base) * stride;
        stride *= s;
    }
    idx
}

pub(crate) fn representative(domain: &TorusDomain, n: usize, mut index: usize) -> Vec<usize> {
    let s = domain.sites();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(0);
    for _ in 1..n {
        out.push(index % s);
        index /= s;
    }
    out
}

fn for_each_permutation(items: &[usize], mut f: impl FnMut(&[usize])) {
    let mut v = items.to_vec();
    let n = v.len();
    let mut c = vec![0usize; n];
    f(&v);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                v.swap(0, i);
            } else {
                v.swap(c[i], i);
            }
            f(&v);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
