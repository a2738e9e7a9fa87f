//! Distributional checks of the jump sampler against closed forms and
//! direct quadrature.

use kawasaki_core::configurations::FiniteConfiguration;
use kawasaki_core::kernels::{Influence, KernelModel, ModelSpec, RadialProfile};
use kawasaki_core::simulator::{replica_rng, run, Branch, InitialCondition, RunOptions, Sampler};
use kawasaki_core::TorusDomain;
use statrs::distribution::{ContinuousCDF, Normal};

fn model(l: f64, m: usize, k1: RadialProfile, k2: RadialProfile) -> KernelModel {
    let d = TorusDomain::new(1, l, m).unwrap();
    KernelModel::new(ModelSpec::factorized(
        d,
        RadialProfile::gaussian(1.0),
        k1,
        k2,
    ))
    .unwrap()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn free_jump_displacements_pass_ks() {
    let m = model(40.0, 256, RadialProfile::zero(), RadialProfile::zero());
    let s = Sampler::new(&m);
    let mut rng = replica_rng(11, 0);
    let x = [3.0, 0.0];
    let n = 100_000;
    let mut disp: Vec<f64> = (0..n)
        .map(|_| m.domain.min_image(x, s.free_jump(x, &mut rng))[0])
        .collect();
    disp.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let ks = disp
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let f = normal.cdf(*v);
            (f - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic
    assert!(ks < 1.628 / (n as f64).sqrt(), "KS distance {ks}");
}

#[test]
fn kappa2_branch_is_a_gaussian_product() {
    let m = model(
        40.0,
        512,
        RadialProfile::zero(),
        RadialProfile::gaussian(1.0),
    );
    let s = Sampler::new(&m);
    let mut rng = replica_rng(12, 0);
    let x = [10.0, 0.0];
    let Influence::Factorized { alpha_kappa2, .. } = &m.influence else {
        unreachable!()
    };
    let weight = alpha_kappa2[0];
    let n = 100_000;
    let ys: Vec<f64> = (0..n)
        .map(|_| {
            m.domain
                .min_image(x, s.kappa2_jump(x, x, weight, &mut rng).unwrap())[0]
        })
        .collect();
    let (mean, var) = mean_var(&ys);
    let expected_var = 0.5;
    let nf = n as f64;
    assert!(mean.abs() < 3.0 * (expected_var / nf).sqrt(), "mean {mean}");
    assert!(
        (var - expected_var).abs() < 3.0 * expected_var * (2.0 / nf).sqrt(),
        "variance {var}"
    );
}

#[test]
fn mixture_branch_frequencies() {
    let m = model(
        20.0,
        256,
        RadialProfile::gaussian(0.5),
        RadialProfile::gaussian(1.0),
    );
    let s = Sampler::new(&m);
    let config = FiniteConfiguration::new(vec![[5.0, 0.0], [5.4, 0.0], [6.3, 0.0], [4.1, 0.0]]);
    let rate = s.all_rates(&config)[0];
    let Influence::Factorized {
        kappa1,
        alpha_kappa2,
        ..
    } = &m.influence
    else {
        unreachable!()
    };
    let d = &m.domain;
    let x = config.points[0];
    // [free, κ₁(z₁), κ₂(z₁), κ₁(z₂), …]
    let mut expected = vec![m.m_a / rate];
    for z in &config.points[1..] {
        let disp = d.min_image(*z, x);
        expected.push(d.interpolate(&kappa1.values, disp) / rate);
        expected.push(d.interpolate(alpha_kappa2, disp) / rate);
    }
    let n = 100_000;
    let mut counts = vec![0usize; expected.len()];
    let mut rng = replica_rng(13, 0);
    for _ in 0..n {
        let (_, branch) = s.sample_destination(&config, 0, rate, &mut rng).unwrap();
        let slot = match branch {
            Branch::Free => 0,
            Branch::Kappa1(j) => 2 * j - 1,
            Branch::Kappa2(j) => 2 * j,
            Branch::Tabulated(_) => unreachable!(),
        };
        counts[slot] += 1;
    }
    assert!((expected.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for (c, p) in counts.iter().zip(&expected) {
        let freq = *c as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * se, "frequency {freq} vs {p}");
    }
}

/// One event from a two-particle state: the joint law of (jumping particle,
/// destination cell) against quadrature of `a(x,y)(1 + b(x,y|z)) / R`.
#[test]
fn two_particle_transition_kernel_total_variation() {
    let m = model(
        12.0,
        384,
        RadialProfile::gaussian(0.5),
        RadialProfile::gaussian(1.0),
    );
    let s = Sampler::new(&m);
    let d = &m.domain;
    let config = FiniteConfiguration::new(vec![[2.0, 0.0], [3.1, 0.0]]);
    let cells = 24;
    let width = d.length / cells as f64;
    let rates = s.all_rates(&config);
    let total: f64 = rates.iter().sum();

    let sub = 200;
    let mut expected = vec![0.0; 2 * cells];
    for i in 0..2 {
        let x = config.points[i];
        let z = config.points[1 - i];
        for c in 0..cells {
            let mut acc = 0.0;
            for k in 0..sub {
                let y = [(c as f64 + (k as f64 + 0.5) / sub as f64) * width, 0.0];
                acc += m.eval_a(x, y) * (1.0 + m.eval_b(x, y, z));
            }
            expected[i * cells + c] = acc * width / sub as f64 / total;
        }
    }
    let norm: f64 = expected.iter().sum();
    assert!((norm - 1.0).abs() < 1e-4, "quadrature mass {norm}");

    let n = 1_000_000;
    let mut counts = vec![0u64; 2 * cells];
    let base = s.init_state(config, replica_rng(14, 1));
    let mut state = base.clone();
    for _ in 0..n {
        state.config.points.clone_from(&base.config.points);
        state.rates.clone_from(&base.rates);
        let ev = s.step(&mut state).unwrap();
        let cell = ((ev.to[0] / width) as usize).min(cells - 1);
        counts[ev.particle * cells + cell] += 1;
    }
    let tv = 0.5
        * counts
            .iter()
            .zip(&expected)
            .map(|(c, p)| (*c as f64 / n as f64 - p).abs())
            .sum::<f64>();
    assert!(tv < 0.01, "total variation {tv}");
}

#[test]
fn equal_split_keeps_poisson_statistics() {
    let half = RadialProfile::Gaussian {
        sigma: 0.7,
        mass: 0.5,
    };
    let m = model(40.0, 256, half.clone(), half);
    let kappa = 0.5;
    let mut opts = RunOptions::new(InitialCondition::Poisson { density: kappa }, 0.3, 200, 99);
    opts.sample_times = vec![0.1, 0.2];
    opts.bins = 20;
    let rep = run(&m, &opts).unwrap();
    assert_eq!(rep.estimates.len(), 3);
    for est in &rep.estimates {
        assert!((est.density - kappa).abs() <= 3.0 * est.density_se);
        let inside = est
            .bins
            .iter()
            .filter(|b| (b.g - kappa * kappa).abs() <= 3.0 * b.g_se)
            .count();
        assert!(
            inside as f64 >= 0.95 * est.bins.len() as f64,
            "{inside} bins within 3 se"
        );
    }
    for r in &rep.replicas {
        assert!(!r.budget_exceeded);
    }
}
