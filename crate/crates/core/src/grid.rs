//! Periodic torus discretization: site indexing, minimum-image geometry,
//! multilinear interpolation and FFT-based circular convolution.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the torus. Only the first `dimension` components are used;
/// the rest stay zero.
pub type Point = [f64; 2];

/// The periodic box `[0, L)^d` sampled on an `M^d` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusDomain {
    pub dimension: usize,
    pub length: f64,
    pub resolution: usize,
}

impl TorusDomain {
    pub fn new(dimension: usize, length: f64, resolution: usize) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::param(format!(
                "dimension must be 1 or 2, got {dimension}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::param(format!(
                "side length must be > 0, got {length}"
            )));
        }
        if resolution < 8 || resolution % 2 != 0 {
            return Err(Error::param(format!(
                "resolution must be even and >= 8, got {resolution}"
            )));
        }
        Ok(Self {
            dimension,
            length,
            resolution,
        })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.length / self.resolution as f64
    }

    /// Volume element `h^d` of one grid cell.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    #[inline]
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dimension as i32)
    }

    /// Number of grid sites `M^d`.
    #[inline]
    pub fn sites(&self) -> usize {
        self.resolution.pow(self.dimension as u32)
    }

    /// Integer coordinates of a flat site index.
    #[inline]
    pub fn site_coords(&self, site: usize) -> [usize; 2] {
        let m = self.resolution;
        if self.dimension == 1 {
            [site, 0]
        } else {
            [site % m, site / m]
        }
    }

    #[inline]
    pub fn site_index(&self, c: [usize; 2]) -> usize {
        if self.dimension == 1 {
            c[0]
        } else {
            c[0] + self.resolution * c[1]
        }
    }

    /// Site `a - b` (mod M per component).
    #[inline]
    pub fn site_sub(&self, a: usize, b: usize) -> usize {
        let m = self.resolution;
        if self.dimension == 1 {
            (a + m - b) % m
        } else {
            let (ca, cb) = (self.site_coords(a), self.site_coords(b));
            self.site_index([(ca[0] + m - cb[0]) % m, (ca[1] + m - cb[1]) % m])
        }
    }

    /// Site `a + b` (mod M per component).
    #[inline]
    pub fn site_add(&self, a: usize, b: usize) -> usize {
        let m = self.resolution;
        if self.dimension == 1 {
            (a + b) % m
        } else {
            let (ca, cb) = (self.site_coords(a), self.site_coords(b));
            self.site_index([(ca[0] + cb[0]) % m, (ca[1] + cb[1]) % m])
        }
    }

    /// Site `-a` (mod M per component).
    #[inline]
    pub fn site_neg(&self, a: usize) -> usize {
        self.site_sub(0, a)
    }

    /// Minimum-image displacement vector represented by a site offset.
    pub fn site_displacement(&self, site: usize) -> Point {
        let m = self.resolution as isize;
        let h = self.spacing();
        let c = self.site_coords(site);
        let wrap = |i: usize| {
            let i = i as isize;
            (if i > m / 2 { i - m } else { i }) as f64 * h
        };
        let mut p = [0.0; 2];
        for (k, pk) in p.iter_mut().enumerate().take(self.dimension) {
            *pk = wrap(c[k]);
        }
        p
    }

    /// Absolute position of a grid site in `[0, L)^d`.
    pub fn site_position(&self, site: usize) -> Point {
        let h = self.spacing();
        let c = self.site_coords(site);
        let mut p = [0.0; 2];
        for (k, pk) in p.iter_mut().enumerate().take(self.dimension) {
            *pk = c[k] as f64 * h;
        }
        p
    }

    /// Wraps a point into `[0, L)^d`.
    pub fn wrap(&self, p: Point) -> Point {
        let mut q = [0.0; 2];
        for k in 0..self.dimension {
            let mut v = p[k].rem_euclid(self.length);
            if v >= self.length {
                v = 0.0;
            }
            q[k] = v;
        }
        q
    }

    /// Minimum-image difference `to - from`, each component in `[-L/2, L/2]`.
    pub fn min_image(&self, from: Point, to: Point) -> Point {
        let mut d = [0.0; 2];
        for k in 0..self.dimension {
            let dx = to[k] - from[k];
            d[k] = dx - self.length * (dx / self.length).round();
        }
        d
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        norm(self.min_image(a, b), self.dimension)
    }

    /// Linear (d = 1) or bilinear (d = 2) periodic interpolation of a
    /// site table at displacement `disp`.
    pub fn interpolate(&self, table: &[f64], disp: Point) -> f64 {
        debug_assert_eq!(table.len(), self.sites());
        let m = self.resolution;
        let h = self.spacing();
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for k in 0..self.dimension {
            let u = (disp[k] / h).rem_euclid(m as f64);
            let f = u.floor();
            base[k] = (f as usize) % m;
            frac[k] = u - f;
        }
        if self.dimension == 1 {
            let i0 = base[0];
            let i1 = (i0 + 1) % m;
            table[i0] * (1.0 - frac[0]) + table[i1] * frac[0]
        } else {
            let (i0, j0) = (base[0], base[1]);
            let (i1, j1) = ((i0 + 1) % m, (j0 + 1) % m);
            let at = |i: usize, j: usize| table[i + m * j];
            let (fx, fy) = (frac[0], frac[1]);
            (at(i0, j0) * (1.0 - fx) + at(i1, j0) * fx) * (1.0 - fy)
                + (at(i0, j1) * (1.0 - fx) + at(i1, j1) * fx) * fy
        }
    }

    /// Riemann-sum quadrature `h^d Σ f`.
    pub fn integrate(&self, table: &[f64]) -> f64 {
        table.iter().sum::<f64>() * self.cell_volume()
    }

    /// Unnormalized forward DFT of a site table (row-column in d = 2).
    pub fn dft(&self, table: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = table.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft_in_place(&mut data, false);
        data
    }

    /// Inverse DFT including the `1/M^d` normalization.
    pub fn idft(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut data = spectrum.to_vec();
        self.fft_in_place(&mut data, true);
        let scale = 1.0 / self.sites() as f64;
        for v in &mut data {
            *v *= scale;
        }
        data
    }

    fn fft_in_place(&self, data: &mut [Complex64], inverse: bool) {
        let m = self.resolution;
        let mut planner = FftPlanner::<f64>::new();
        let fft = if inverse {
            planner.plan_fft_inverse(m)
        } else {
            planner.plan_fft_forward(m)
        };
        // rows (contiguous along the first axis)
        for row in data.chunks_mut(m) {
            fft.process(row);
        }
        if self.dimension == 2 {
            let mut column = vec![Complex64::new(0.0, 0.0); m];
            for i in 0..m {
                for j in 0..m {
                    column[j] = data[i + m * j];
                }
                fft.process(&mut column);
                for j in 0..m {
                    data[i + m * j] = column[j];
                }
            }
        }
    }

    /// Continuous-transform approximation `f̂(p_k) ≈ h^d Σ_j f_j e^{-i p_k x_j}`
    /// on the discrete frequency grid `p_k = 2πk/L`.
    pub fn fourier_transform(&self, table: &[f64]) -> Vec<Complex64> {
        let h = self.cell_volume();
        self.dft(table).into_iter().map(|v| v * h).collect()
    }

    /// Circular convolution `(f ∗ g)(x) = ∫ f(x - y) g(y) dy` on the grid.
    pub fn convolve(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let ff = self.dft(f);
        let gg = self.dft(g);
        let prod: Vec<Complex64> = ff.iter().zip(&gg).map(|(a, b)| a * b).collect();
        let h = self.cell_volume();
        self.idft(&prod).into_iter().map(|v| v.re * h).collect()
    }

    /// Convolution against a precomputed spectrum of the first factor.
    pub fn convolve_with_spectrum(&self, f_hat: &[Complex64], g: &[f64]) -> Vec<f64> {
        let gg = self.dft(g);
        let prod: Vec<Complex64> = f_hat.iter().zip(&gg).map(|(a, b)| a * b).collect();
        let h = self.cell_volume();
        self.idft(&prod).into_iter().map(|v| v.re * h).collect()
    }

    /// Frequency magnitude `|p_k|` for each DFT index.
    pub fn frequency_norm(&self, site: usize) -> f64 {
        let d = self.site_displacement(site);
        let scale = 2.0 * std::f64::consts::PI / (self.length * self.spacing());
        norm(d, self.dimension) * scale
    }
}

#[inline]
pub fn norm(v: Point, dimension: usize) -> f64 {
    if dimension == 1 {
        v[0].abs()
    } else {
        v[0].hypot(v[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_domains() {
        assert!(TorusDomain::new(3, 1.0, 8).is_err());
        assert!(TorusDomain::new(1, 0.0, 8).is_err());
        assert!(TorusDomain::new(1, 1.0, 7).is_err());
        assert!(TorusDomain::new(1, 1.0, 6).is_err());
        assert!(TorusDomain::new(2, 1.0, 8).is_ok());
    }

    #[test]
    fn site_arithmetic_roundtrips() {
        let d = TorusDomain::new(2, 4.0, 8).unwrap();
        for a in 0..d.sites() {
            for b in (0..d.sites()).step_by(7) {
                assert_eq!(d.site_add(d.site_sub(a, b), b), a);
            }
            assert_eq!(d.site_add(a, d.site_neg(a)), 0);
        }
    }

    #[test]
    fn min_image_is_antisymmetric_and_bounded() {
        let d = TorusDomain::new(1, 10.0, 16).unwrap();
        let m = d.min_image([9.5, 0.0], [0.5, 0.0]);
        assert!((m[0] - 1.0).abs() < 1e-12);
        let n = d.min_image([0.5, 0.0], [9.5, 0.0]);
        assert!((n[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_grid_values_and_linear_midpoints() {
        let d = TorusDomain::new(2, 8.0, 8).unwrap();
        let table: Vec<f64> = (0..d.sites()).map(|s| s as f64).collect();
        for s in 0..d.sites() {
            let v = d.interpolate(&table, d.site_position(s));
            assert!((v - table[s]).abs() < 1e-12);
        }
        let mid = d.interpolate(&table, [0.5, 0.0]);
        assert!((mid - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        for dim in [1, 2] {
            let d = TorusDomain::new(dim, 6.0, 8).unwrap();
            let f: Vec<f64> = (0..d.sites()).map(|s| ((s * 7 % 5) as f64).sin()).collect();
            let g: Vec<f64> = (0..d.sites())
                .map(|s| ((s * 3 % 11) as f64).cos())
                .collect();
            let fast = d.convolve(&f, &g);
            for x in 0..d.sites() {
                let direct: f64 = (0..d.sites())
                    .map(|y| f[d.site_sub(x, y)] * g[y])
                    .sum::<f64>()
                    * d.cell_volume();
                assert!((fast[x] - direct).abs() < 1e-12, "dim {dim} site {x}");
            }
        }
    }
}
