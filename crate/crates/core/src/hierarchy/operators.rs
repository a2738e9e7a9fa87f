//! The operators `A, B, C, D` (and their `ω`-shifted forms) on reduced
//! correlation vectors.
//!
//! Every operator is written once as a stencil: for an output point list
//! `η` it emits `(η', w)` pairs meaning "add `w · k(η')`". The same stencil
//! drives application, dense matrix assembly and norm measurement. For
//! factorized `b` the order-2 and order-1 actions also have FFT forms,
//! used by [`Route::Auto`].

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{
    check_max_order, order_len, reduced_index, representative, ClosureRule, CorrelationVector,
};
use crate::configurations::{big_phi_sites, Sign};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::{Influence, KernelModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// FFT forms where available, direct quadrature otherwise.
    #[default]
    Auto,
    /// Direct grid quadrature everywhere.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    A,
    B,
    C,
    D,
}

impl Part {
    pub const ALL: [Part; 4] = [Part::A, Part::B, Part::C, Part::D];
}

/// A truncated hierarchy for one model.
#[derive(Debug, Clone)]
pub struct Hierarchy<'a> {
    pub model: &'a KernelModel,
    pub max_order: usize,
    pub closure: ClosureRule,
    pub route: Route,
    pub execution: Execution,
    alpha_hat: Vec<Complex64>,
    /// `∫ φ₋`.
    phi_minus_mass: f64,
}

impl<'a> Hierarchy<'a> {
    pub fn new(model: &'a KernelModel, max_order: usize, closure: ClosureRule) -> Result<Self> {
        check_max_order(&model.domain, max_order)?;
        Ok(Self {
            model,
            max_order,
            closure,
            route: Route::Auto,
            execution: Execution::default(),
            alpha_hat: model.domain.dft(&model.alpha.values),
            phi_minus_mass: model.domain.integrate(&model.phi_minus),
        })
    }

    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn check(&self, k: &CorrelationVector, n: usize) -> Result<()> {
        if n > self.max_order || n > k.max_order() {
            return Err(Error::OrderOverflow {
                order: n,
                max_order: self.max_order.min(k.max_order()),
            });
        }
        Ok(())
    }

    /// Stencil of `part` at order `n` for the output point list `sites`.
    /// `shift` is `ω` for `B`/`C` (zero for the unshifted operators);
    /// `rho` feeds the mean-field closure.
    fn stencil(
        &self,
        part: Part,
        sites: &[usize],
        shift: f64,
        rho: f64,
        emit: &mut dyn FnMut(&[usize], f64),
    ) {
        let n = sites.len();
        if n == 0 {
            return;
        }
        let m = self.model;
        let d = &m.domain;
        let hv = d.cell_volume();
        let sc = d.sites();
        let top = n == self.max_order;
        let mut work = sites.to_vec();
        match part {
            Part::A => {
                for j in 0..n {
                    let y = sites[j];
                    for x in 0..sc {
                        let a = m.alpha_site(d.site_sub(x, y));
                        if a == 0.0 {
                            continue;
                        }
                        let mut rate = 1.0;
                        for (i, &z) in sites.iter().enumerate() {
                            if i != j {
                                rate += m.b_sites(x, y, z);
                            }
                        }
                        work[j] = x;
                        emit(&work, hv * a * rate);
                    }
                    work[j] = y;
                }
            }
            Part::B => {
                let psi = n as f64 * (m.m_a + shift) + big_phi_sites(m, sites, Sign::Minus);
                emit(sites, -psi);
            }
            Part::C => {
                if shift != 0.0 {
                    emit(sites, shift * n as f64);
                }
                if top && self.closure == ClosureRule::ZeroTail {
                    return;
                }
                for j in 0..n {
                    let y = sites[j];
                    for x in 0..sc {
                        let a = m.alpha_site(d.site_sub(x, y));
                        if a == 0.0 {
                            continue;
                        }
                        work[j] = x;
                        if top {
                            // k⁽ᴺ⁺¹⁾(η∖y ∪ {x, z}) = k⁽ᴺ⁾(η∖y ∪ x) ρ
                            let bz = m.b_z_integral(d.site_sub(x, y));
                            emit(&work, hv * a * bz * rho);
                        } else {
                            work.push(0);
                            for z in 0..sc {
                                let b = m.b_sites(x, y, z);
                                if b != 0.0 {
                                    work[n] = z;
                                    emit(&work, hv * hv * a * b);
                                }
                            }
                            work.pop();
                        }
                    }
                    work[j] = y;
                }
            }
            Part::D => {
                if top {
                    if self.closure == ClosureRule::MeanField {
                        emit(sites, -(n as f64) * rho * self.phi_minus_mass);
                    }
                    return;
                }
                work.push(0);
                for z in 0..sc {
                    let w: f64 = sites.iter().map(|&x| m.phi_minus[d.site_sub(x, z)]).sum();
                    if w != 0.0 {
                        work[n] = z;
                        emit(&work, -hv * w);
                    }
                }
            }
        }
    }

    fn apply_direct(&self, part: Part, k: &CorrelationVector, n: usize, shift: f64) -> Vec<f64> {
        let rho = k.density();
        let dom = k.domain;
        self.execution.map(order_len(&dom, n), |idx| {
            let sites = representative(&dom, n, idx);
            let mut acc = 0.0;
            self.stencil(part, &sites, shift, rho, &mut |s, w| acc += w * k.lookup(s));
            acc
        })
    }

    fn fast_available(&self, part: Part, n: usize) -> bool {
        if self.route != Route::Auto || !self.model.is_factorized() {
            return false;
        }
        match (part, n) {
            (Part::A, 2) => true,
            (Part::C | Part::D, 1) => self.max_order >= 2,
            (Part::C | Part::D, 2) => self.max_order == 2,
            _ => false,
        }
    }

    fn conv_alpha(&self, f: &[f64]) -> Vec<f64> {
        self.model.domain.convolve_with_spectrum(&self.alpha_hat, f)
    }

    fn apply_fast(&self, part: Part, k: &CorrelationVector, n: usize, shift: f64) -> Vec<f64> {
        let m = self.model;
        let d = &m.domain;
        let Influence::Factorized { kappa1, kappa2, .. } = &m.influence else {
            unreachable!("fast path requires factorized b")
        };
        let neg = |s: usize| d.site_neg(s);
        match (part, n) {
            (Part::A, 2) => {
                let g = &k.orders[2];
                let ag = self.conv_alpha(g);
                let k1g: Vec<f64> = kappa1.values.iter().zip(g).map(|(a, b)| a * b).collect();
                let ak1g = self.conv_alpha(&k1g);
                let t1: Vec<f64> = (0..g.len())
                    .map(|s| (1.0 + kappa2.values[s]) * ag[s] + ak1g[s])
                    .collect();
                (0..g.len()).map(|s| t1[s] + t1[neg(s)]).collect()
            }
            (Part::C | Part::D, 1) => {
                let g = &k.orders[2];
                let hv = d.cell_volume();
                let c: f64 = g
                    .iter()
                    .enumerate()
                    .map(|(v, gv)| m.phi_minus[neg(v)] * gv)
                    .sum::<f64>()
                    * hv;
                match part {
                    Part::C => vec![c + shift * k.orders[1][0]],
                    _ => vec![-c],
                }
            }
            (Part::C, 2) => {
                let g = &k.orders[2];
                let mut out: Vec<f64> = g.iter().map(|v| 2.0 * shift * v).collect();
                if self.closure == ClosureRule::MeanField {
                    let ag = self.conv_alpha(g);
                    let c = k.density() * m.mean_b;
                    for (s, o) in out.iter_mut().enumerate() {
                        *o += c * (ag[s] + ag[neg(s)]);
                    }
                }
                out
            }
            (Part::D, 2) => {
                let g = &k.orders[2];
                match self.closure {
                    ClosureRule::ZeroTail => vec![0.0; g.len()],
                    ClosureRule::MeanField => {
                        let c = -2.0 * k.density() * self.phi_minus_mass;
                        g.iter().map(|v| c * v).collect()
                    }
                }
            }
            _ => unreachable!("no fast form for {part:?} at order {n}"),
        }
    }

    /// One operator at order `n`; `omega` selects the shifted forms of
    /// `B` and `C`.
    pub fn apply(
        &self,
        part: Part,
        k: &CorrelationVector,
        n: usize,
        omega: Option<f64>,
    ) -> Result<Vec<f64>> {
        self.check(k, n)?;
        let shift = match part {
            Part::B | Part::C => omega.unwrap_or(0.0),
            _ => 0.0,
        };
        if n == 0 {
            return Ok(vec![0.0]);
        }
        Ok(if self.fast_available(part, n) {
            self.apply_fast(part, k, n, shift)
        } else {
            self.apply_direct(part, k, n, shift)
        })
    }

    pub fn apply_a(&self, k: &CorrelationVector, n: usize) -> Result<Vec<f64>> {
        self.apply(Part::A, k, n, None)
    }

    pub fn apply_b(&self, k: &CorrelationVector, n: usize, omega: Option<f64>) -> Result<Vec<f64>> {
        self.apply(Part::B, k, n, omega)
    }

    pub fn apply_c(&self, k: &CorrelationVector, n: usize, omega: Option<f64>) -> Result<Vec<f64>> {
        self.apply(Part::C, k, n, omega)
    }

    pub fn apply_d(&self, k: &CorrelationVector, n: usize) -> Result<Vec<f64>> {
        self.apply(Part::D, k, n, None)
    }

    /// Sum of `parts` at every order; order 0 is identically zero.
    pub fn apply_parts(
        &self,
        k: &CorrelationVector,
        parts: &[Part],
        omega: Option<f64>,
    ) -> Result<CorrelationVector> {
        let mut out = CorrelationVector::zeros(k.domain, self.max_order)?;
        for n in 1..=self.max_order {
            for &p in parts {
                let v = self.apply(p, k, n, omega)?;
                for (o, x) in out.orders[n].iter_mut().zip(v) {
                    *o += x;
                }
            }
        }
        Ok(out)
    }

    /// `L k = (A + B + C + D) k`.
    pub fn apply_l(&self, k: &CorrelationVector) -> Result<CorrelationVector> {
        self.apply_parts(k, &Part::ALL, None)
    }

    /// Offsets of each order in the flattened vector.
    pub fn offsets(&self) -> Vec<usize> {
        let d = &self.model.domain;
        let mut off = vec![0];
        for n in 0..=self.max_order {
            off.push(off[n] + order_len(d, n));
        }
        off
    }

    /// Dense matrix of `Σ parts` on the flattened vector (all orders).
    /// The mean-field closure is linearized at density `rho`.
    pub fn full_matrix(&self, parts: &[Part], omega: Option<f64>, rho: f64) -> DMatrix<f64> {
        let d = self.model.domain;
        let off = self.offsets();
        let dim = off[self.max_order + 1];
        let shift = omega.unwrap_or(0.0);
        let mut mat = DMatrix::zeros(dim, dim);
        for n in 1..=self.max_order {
            let rows = self.execution.map(order_len(&d, n), |idx| {
                let sites = representative(&d, n, idx);
                let mut row: Vec<(usize, f64)> = Vec::new();
                for &p in parts {
                    let sh = if matches!(p, Part::B | Part::C) {
                        shift
                    } else {
                        0.0
                    };
                    self.stencil(p, &sites, sh, rho, &mut |s, w| {
                        row.push((off[s.len()] + reduced_index(&d, s), w));
                    });
                }
                row
            });
            for (idx, row) in rows.into_iter().enumerate() {
                for (col, w) in row {
                    mat[(off[n] + idx, col)] += w;
                }
            }
        }
        mat
    }

    /// Order-`n` diagonal block of `A + B^{ω}` (or any order-preserving
    /// combination).
    pub fn order_block(&self, parts: &[Part], n: usize, omega: Option<f64>) -> DMatrix<f64> {
        let d = self.model.domain;
        let len = order_len(&d, n);
        let shift = omega.unwrap_or(0.0);
        let rows = self.execution.map(len, |idx| {
            let sites = representative(&d, n, idx);
            let mut row: Vec<(usize, f64)> = Vec::new();
            for &p in parts {
                let sh = if matches!(p, Part::B | Part::C) {
                    shift
                } else {
                    0.0
                };
                self.stencil(p, &sites, sh, 0.0, &mut |s, w| {
                    if s.len() == n {
                        row.push((reduced_index(&d, s), w));
                    }
                });
            }
            row
        });
        let mut mat = DMatrix::zeros(len, len);
        for (idx, row) in rows.into_iter().enumerate() {
            for (col, w) in row {
                mat[(idx, col)] += w;
            }
        }
        mat
    }

    /// Exact operator norm `K_{ϑ''} → K_ϑ` of the truncated discrete
    /// operator `Σ parts`: the weighted maximum row sum.
    pub fn measured_norm(
        &self,
        parts: &[Part],
        omega: Option<f64>,
        theta: f64,
        theta_pp: f64,
    ) -> f64 {
        let mat = self.full_matrix(parts, omega, 0.0);
        let off = self.offsets();
        let order_of = |i: usize| off.iter().rposition(|&o| o <= i).unwrap();
        let mut best: f64 = 0.0;
        for r in 0..mat.nrows() {
            let n = order_of(r);
            let sum: f64 = (0..mat.ncols())
                .map(|c| mat[(r, c)].abs() * (theta_pp * order_of(c) as f64).exp())
                .sum();
            best = best.max((-theta * n as f64).exp() * sum);
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusDomain;
    use crate::kernels::{ModelSpec, RadialProfile};

    fn model(m: usize, k1: f64, k2: f64) -> KernelModel {
        model_on(12.0, m, k1, k2)
    }

    fn model_on(l: f64, m: usize, k1: f64, k2: f64) -> KernelModel {
        let d = TorusDomain::new(1, l, m).unwrap();
        let prof = |s: f64| {
            if s == 0.0 {
                RadialProfile::zero()
            } else {
                RadialProfile::gaussian(s)
            }
        };
        KernelModel::new(ModelSpec::factorized(
            d,
            RadialProfile::gaussian(1.0),
            prof(k1),
            prof(k2),
        ))
        .unwrap()
    }

    fn smooth_pair(d: &TorusDomain, rho: f64) -> CorrelationVector {
        let g = (0..d.sites())
            .map(|s| {
                let r = d.site_displacement(s)[0];
                rho * rho * (1.0 + 0.5 * (-r * r).exp())
            })
            .collect();
        CorrelationVector::from_pair(*d, rho, g).unwrap()
    }

    #[test]
    fn constant_identities() {
        let m = model(64, 0.5, 1.0);
        let kappa = 0.4;
        let h = Hierarchy::new(&m, 2, ClosureRule::ZeroTail).unwrap();
        let k = CorrelationVector::poisson(m.domain, kappa, 2).unwrap();
        // (A k)(η) = (n + Φ₊(η)) κⁿ
        for n in 1..=2 {
            let a = h.apply_a(&k, n).unwrap();
            let b = h.apply_b(&k, n, None).unwrap();
            for (idx, (av, bv)) in a.iter().zip(&b).enumerate() {
                let sites = representative(&m.domain, n, idx);
                let plus = big_phi_sites(&m, &sites, Sign::Plus);
                let minus = big_phi_sites(&m, &sites, Sign::Minus);
                let kn = kappa.powi(n as i32);
                assert!((av - (n as f64 + plus) * kn).abs() < 1e-12);
                assert!((bv + (n as f64 + minus) * kn).abs() < 1e-12);
            }
        }
        // C + D annihilates constants at order 1 (reads order 2)
        let c = h.apply_c(&k, 1, None).unwrap()[0];
        let dd = h.apply_d(&k, 1).unwrap()[0];
        assert!((c - kappa * kappa * m.mean_b).abs() < 1e-9);
        assert!((c + dd).abs() < 1e-12);
        assert_eq!(h.apply_a(&k, 0).unwrap(), vec![0.0]);
        assert_eq!(h.apply_c(&k, 0, Some(1.0)).unwrap(), vec![0.0]);
    }

    #[test]
    fn shift_identities() {
        let m = model(32, 0.5, 1.0);
        let h = Hierarchy::new(&m, 2, ClosureRule::ZeroTail).unwrap();
        let k = smooth_pair(&m.domain, 0.3);
        for n in 1..=2 {
            let b0 = h.apply_b(&k, n, None).unwrap();
            let bw = h.apply_b(&k, n, Some(0.7)).unwrap();
            let c0 = h.apply_c(&k, n, None).unwrap();
            let cw = h.apply_c(&k, n, Some(0.7)).unwrap();
            for i in 0..b0.len() {
                let kn = k.orders[n][i];
                assert!((bw[i] - b0[i] + 0.7 * n as f64 * kn).abs() < 1e-13);
                assert!((cw[i] - c0[i] - 0.7 * n as f64 * kn).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn order_overflow() {
        let m = model(32, 0.5, 1.0);
        let h = Hierarchy::new(&m, 2, ClosureRule::ZeroTail).unwrap();
        let k = CorrelationVector::poisson(m.domain, 0.4, 2).unwrap();
        assert!(matches!(
            h.apply_a(&k, 3),
            Err(Error::OrderOverflow { order: 3, .. })
        ));
    }

    #[test]
    fn fast_and_direct_routes_agree() {
        for closure in [ClosureRule::ZeroTail, ClosureRule::MeanField] {
            let m = model(64, 0.5, 1.0);
            let fast = Hierarchy::new(&m, 2, closure).unwrap();
            let direct = fast.clone().with_route(Route::Direct);
            let k = smooth_pair(&m.domain, 0.3);
            for p in Part::ALL {
                for n in 1..=2 {
                    let a = fast.apply(p, &k, n, Some(0.2)).unwrap();
                    let b = direct.apply(p, &k, n, Some(0.2)).unwrap();
                    for (x, y) in a.iter().zip(&b) {
                        assert!((x - y).abs() < 1e-12, "{p:?} n={n} {closure:?}: {x} vs {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn matrix_matches_application() {
        let m = model_on(6.0, 16, 0.5, 1.0);
        let d = m.domain;
        let h = Hierarchy::new(&m, 3, ClosureRule::ZeroTail).unwrap();
        let mut k = CorrelationVector::poisson(d, 0.5, 3).unwrap();
        for (i, v) in k.orders[3].iter_mut().enumerate() {
            *v += 0.01 * ((i * 7 % 13) as f64);
        }
        let lk = h.apply_l(&k).unwrap();
        let mat = h.full_matrix(&Part::ALL, None, 0.0);
        let flat: Vec<f64> = k.orders.iter().flatten().copied().collect();
        let prod = &mat * nalgebra::DVector::from_vec(flat);
        let expect: Vec<f64> = lk.orders.iter().flatten().copied().collect();
        for (a, b) in prod.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
