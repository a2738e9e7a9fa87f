//! One function per subcommand. Each writes its tables into the output
//! directory and returns the scalar results for the manifest.

use kawasaki_core::bounds::{
    envelope_check, horizon, ladder, majorant_terms, operator_norm_bounds, optimal, q_norm_bound,
    t_delta, theta0_of, HorizonParams,
};
use kawasaki_core::crossval::compare_pair;
use kawasaki_core::hierarchy::{
    integrate, picard_solve, CorrelationVector, Hierarchy, IntegrateOptions, PicardOptions,
};
use kawasaki_core::kernels::{
    stability_check, KernelModel, Omega, StabilityOptions, StabilityReport,
};
use kawasaki_core::simulator::{run, RunReport};
use kawasaki_core::Execution;

use crate::config::{AutoKeyword, LoadedConfig, Theta0};
use crate::error::CliError;
use crate::output::{num, OutputDir, TableExt};

/// Significance used when overlaying Monte Carlo and hierarchy pair functions.
pub const COMPARE_THRESHOLD: f64 = 3.0;

pub struct Context {
    pub cfg: LoadedConfig,
    pub out: OutputDir,
    pub execution: Execution,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub status: String,
    pub exit_code: i32,
    pub seed: Option<u64>,
    pub warnings: Vec<String>,
    pub horizons: toml::Table,
    pub results: toml::Table,
    /// Lines for standard output.
    pub report: Vec<String>,
}

impl Outcome {
    fn ok(status: &str) -> Self {
        Self {
            status: status.to_string(),
            ..Self::default()
        }
    }

    fn say(&mut self, key: &str, value: f64) {
        self.report.push(format!("{key} = {}", num(value)));
    }
}

fn stability(model: &KernelModel) -> StabilityReport {
    stability_check(model, &StabilityOptions::default())
}

/// `ω` from the bounds section, else from the stability check.
fn resolve_omega(ctx: &Context, model: &KernelModel) -> Option<(f64, String)> {
    if let Some(w) = ctx.cfg.bounds().and_then(|b| b.omega) {
        return Some((w, "config".into()));
    }
    match stability(model).omega {
        Omega::Finite { value, source } => Some((value, format!("{source:?}").to_lowercase())),
        Omega::Unbounded => None,
    }
}

fn resolve_theta0(ctx: &Context, model: &KernelModel) -> Result<(f64, &'static str), CliError> {
    let choice = ctx.cfg.bounds().map(|b| b.theta0).unwrap_or_default();
    if let Theta0::Value(v) = choice {
        if !v.is_finite() {
            return Err(ctx.cfg.bounds_error("bounds.theta0 must be finite"));
        }
        return Ok((v, "config"));
    }
    let Theta0::Keyword(AutoKeyword::Auto) = choice else {
        unreachable!()
    };
    if ctx.cfg.config.hierarchy.is_some() {
        let k0 = ctx.cfg.initial_vector(model)?;
        let t =
            theta0_of(&k0).map_err(|e| ctx.cfg.bounds_error(format!("theta0 = \"auto\": {e}")))?;
        return Ok((t, "initial correlation vector"));
    }
    if ctx.cfg.config.simulate.is_some() {
        let rho = ctx.cfg.simulate()?.initial.density(model);
        if rho > 0.0 {
            return Ok((rho.ln(), "Poisson density of the initial condition"));
        }
    }
    Err(ctx
        .cfg
        .bounds_error("theta0 = \"auto\" needs an initial condition in [hierarchy] or [simulate]"))
}

fn mean_sup_b(ctx: &Context, model: &KernelModel) -> (f64, f64) {
    let b = ctx.cfg.bounds();
    (
        b.and_then(|b| b.mean_b).unwrap_or(model.mean_b),
        b.and_then(|b| b.sup_b).unwrap_or(model.sup_b),
    )
}

fn unbounded(mut outcome: Outcome, what: &str) -> Outcome {
    outcome.status = "UNBOUNDED".into();
    outcome.exit_code = 2;
    outcome.report.push(format!(
        "no finite stability constant: {what} is unavailable"
    ));
    outcome
}

fn coords(k: &CorrelationVector, n: usize, index: usize) -> Vec<String> {
    let d = &k.domain;
    k.representative(n, index)
        .into_iter()
        .skip(1)
        .flat_map(|s| {
            let p = d.site_displacement(s);
            p.into_iter().take(d.dimension).map(num).collect::<Vec<_>>()
        })
        .collect()
}

fn order_header(n: usize, dimension: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    for j in 1..n {
        for axis in ["x", "y"].iter().take(dimension) {
            h.push(format!("{axis}{j}"));
        }
    }
    h.push("value".into());
    h
}

/// `order_n.csv` for `n ≥ 1`: every reduced entry at every given time.
fn write_orders(out: &mut OutputDir, states: &[(f64, &CorrelationVector)]) -> Result<(), CliError> {
    let Some((_, first)) = states.first() else {
        return Ok(());
    };
    for n in 1..=first.max_order() {
        let header = order_header(n, first.domain.dimension);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = states.iter().flat_map(|(t, k)| {
            k.orders[n].iter().enumerate().map(move |(i, v)| {
                let mut row = vec![num(*t)];
                row.extend(coords(k, n, i));
                row.push(num(*v));
                row
            })
        });
        out.write_csv(&format!("order_{n}.csv"), &header, rows)?;
    }
    Ok(())
}

fn write_estimates(out: &mut OutputDir, rep: &RunReport) -> Result<(), CliError> {
    let rows = rep.estimates.iter().flat_map(|e| {
        e.bins.iter().map(move |b| {
            vec![
                num(e.time),
                num(e.density),
                num(e.density_se),
                num(b.left),
                num(b.g),
                num(b.g_se),
            ]
        })
    });
    out.write_csv(
        "simulate.csv",
        &["time", "density", "density_se", "bin_left", "g", "g_se"],
        rows,
    )?;
    let rows = rep.replicas.iter().map(|r| {
        vec![
            r.replica.to_string(),
            r.particles.to_string(),
            r.events.to_string(),
            r.budget_exceeded.to_string(),
        ]
    });
    out.write_csv(
        "replicas.csv",
        &["replica", "particles", "events", "budget_exceeded"],
        rows,
    )
}

fn note_budget(o: &mut Outcome, rep: &RunReport) {
    o.results
        .put("total_events", rep.total_events() as i64)
        .put("budget_exceeded", rep.budget_exceeded);
    if rep.budget_exceeded {
        let hit = rep.replicas.iter().filter(|r| r.budget_exceeded).count();
        o.status = "PARTIAL".into();
        o.warnings.push(format!(
            "{hit} replica(s) hit the event cap; estimates after that point use the remaining replicas"
        ));
    }
}

pub fn check_kernels(ctx: &mut Context) -> Result<Outcome, CliError> {
    let model = ctx.cfg.model()?;
    let r = stability(&model);
    ctx.out.write_text("stability.toml", &r.to_key_values())?;
    let omega = r.omega.value().unwrap_or(f64::INFINITY);
    let constants = [
        ("m_a", model.m_a),
        ("mean_b", model.mean_b),
        ("sup_b", model.sup_b),
        ("phi_plus_0", model.phi_plus[0]),
        ("phi_minus_0", model.phi_minus[0]),
        ("min_fourier_product", r.min_product),
        ("min_pointwise_gap", r.pointwise_min_gap),
        ("omega", omega),
    ];
    ctx.out.write_csv(
        "constants.csv",
        &["quantity", "value"],
        constants.iter().map(|(k, v)| vec![k.to_string(), num(*v)]),
    )?;
    let d = model.domain;
    let mut header = vec!["x"];
    if d.dimension == 2 {
        header.push("y");
    }
    header.extend(["phi_plus", "phi_minus"]);
    let rows = (0..d.sites()).map(|s| {
        let p = d.site_displacement(s);
        let mut row: Vec<String> = p.iter().take(d.dimension).map(|v| num(*v)).collect();
        row.push(num(model.phi_plus[s]));
        row.push(num(model.phi_minus[s]));
        row
    });
    ctx.out.write_csv("phi.csv", &header, rows)?;

    let mut o = Outcome::ok("STABLE");
    o.results
        .put("omega", omega)
        .put("omega_is_lower_bound", r.omega.is_empirical())
        .put("fourier_ok", r.fourier_ok)
        .put("pointwise_ok", r.pointwise_ok)
        .put("mean_b", model.mean_b)
        .put("sup_b", model.sup_b);
    o.report.extend(r.summary().lines().map(str::to_string));
    if !r.is_stable() {
        o.status = "UNBOUNDED".into();
        o.exit_code = 2;
    }
    Ok(o)
}

pub fn simulate(ctx: &mut Context) -> Result<Outcome, CliError> {
    let model = ctx.cfg.model()?;
    let opts = ctx.cfg.run_options(ctx.execution)?;
    let rep = run(&model, &opts)?;
    write_estimates(&mut ctx.out, &rep)?;

    let mut o = Outcome::ok("OK");
    o.seed = Some(opts.seed);
    note_budget(&mut o, &rep);

    // the torus kernels are periodized, so stability is re-checked on them
    let r = stability(&model);
    o.results
        .put("periodized_omega", r.omega.value().unwrap_or(f64::INFINITY))
        .put("periodized_stable", r.is_stable());
    if !r.is_stable() {
        o.warnings
            .push("the periodized kernels fail the stability check at this box size".into());
    }

    if ctx.cfg.simulate()?.finite_size_check {
        let flagged = finite_size(ctx, &model, &opts, &rep)?;
        o.results.put("finite_size_flagged_bins", flagged as i64);
        if flagged > 0 {
            o.warnings.push(format!(
                "{flagged} bin(s) differ between L and 2L by more than 3 standard errors"
            ));
        }
    }
    if let Some(last) = rep.estimates.last() {
        o.say("final_time", last.time);
        o.say("density", last.density);
        o.say("density_se", last.density_se);
    }
    Ok(o)
}

/// Reruns on the doubled box with twice as many bins (same bin width) and
/// compares the bins the two runs share.
fn finite_size(
    ctx: &mut Context,
    model: &KernelModel,
    opts: &kawasaki_core::simulator::RunOptions,
    rep: &RunReport,
) -> Result<usize, CliError> {
    let spec = model.spec.scaled_box(2)?;
    let big = KernelModel::new(spec)?;
    let mut o2 = opts.clone();
    o2.bins = 2 * opts.bins;
    let rep2 = run(&big, &o2)?;
    let mut rows = Vec::new();
    let mut flagged = 0;
    for (a, b) in rep.estimates.iter().zip(&rep2.estimates) {
        for (x, y) in a.bins.iter().zip(&b.bins) {
            let se = x.g_se.hypot(y.g_se);
            let diff = (x.g - y.g).abs();
            let z = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            let flag = z > COMPARE_THRESHOLD;
            flagged += flag as usize;
            rows.push(vec![
                num(a.time),
                num(x.left),
                num(x.g),
                num(x.g_se),
                num(y.g),
                num(y.g_se),
                num(z),
                flag.to_string(),
            ]);
        }
    }
    ctx.out.write_csv(
        "finite_size.csv",
        &[
            "time", "bin_left", "g_l", "g_l_se", "g_2l", "g_2l_se", "z", "flagged",
        ],
        rows,
    )?;
    Ok(flagged)
}

pub fn solve(ctx: &mut Context) -> Result<Outcome, CliError> {
    let model = ctx.cfg.model()?;
    let hs = ctx.cfg.hierarchy()?;
    let k0 = ctx.cfg.initial_vector(&model)?;
    let (theta0, theta0_source) = resolve_theta0(ctx, &model)?;
    let omega = resolve_omega(ctx, &model);
    let (mean_b, sup_b) = mean_sup_b(ctx, &model);

    let mut o = Outcome::ok("OK");
    o.horizons
        .put("theta0", theta0)
        .put("theta0_source", theta0_source);
    let mut thetas = hs.thetas.clone();
    let mut tau = None;
    match &omega {
        Some((w, source)) => {
            let opt = optimal(theta0, *w, mean_b)?;
            o.horizons
                .put("omega", *w)
                .put("omega_source", source.as_str())
                .put("theta_star", opt.theta_star)
                .put("tau", opt.tau);
            thetas.push(opt.theta_star);
            tau = Some((opt.theta_star, opt.tau));
        }
        None => {
            thetas.push(theta0 + 1.0);
            o.warnings
                .push("no finite stability constant: norms are recorded without a bound".into());
        }
    }
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();

    let h = Hierarchy::new(&model, hs.max_order, hs.closure)?.with_execution(ctx.execution);
    let mut io = IntegrateOptions::new(hs.t_end, hs.dt);
    io.thetas.clone_from(&thetas);
    io.record_every = hs.record_every;
    io.horizon = tau.map(|(_, t)| t);
    io.keep_states = true;
    let traj = integrate(&h, &k0, &io)?;
    o.warnings.extend(traj.warnings.iter().cloned());

    let states: Vec<(f64, &CorrelationVector)> =
        traj.times.iter().copied().zip(&traj.states).collect();
    write_orders(&mut ctx.out, &states)?;

    let k0_norm = k0.norm_theta(theta0);
    let bound = |t: f64, theta: f64| -> f64 {
        let Some((w, _)) = &omega else {
            return f64::INFINITY;
        };
        if theta <= theta0 {
            return f64::INFINITY;
        }
        HorizonParams::new(theta0, theta, *w, mean_b, sup_b)
            .ok()
            .and_then(|p| q_norm_bound(t, horizon(&p)).ok())
            .map_or(f64::INFINITY, |q| q * k0_norm)
    };
    let rows = traj.norms.iter().map(|s| {
        vec![
            num(s.time),
            num(s.theta),
            num(s.norm),
            num(bound(s.time, s.theta)),
        ]
    });
    ctx.out
        .write_csv("norms.csv", &["time", "theta", "norm", "bound"], rows)?;

    if let Some((theta_star, tau)) = tau {
        let series: Vec<_> = traj
            .norms
            .iter()
            .filter(|s| s.theta == theta_star)
            .copied()
            .collect();
        let env = envelope_check(&series, theta_star, k0_norm, tau, None)?;
        o.results
            .put("envelope_status", env.status())
            .put("envelope_max_ratio", env.max_ratio)
            .put("envelope_samples", env.samples as i64);
        if env.flagged {
            o.warnings.push(format!(
                "norm at theta* exceeds the bound by a factor {:.4} at t = {}",
                env.max_ratio, env.worst_time
            ));
        }
        o.say("tau", tau);
        o.say("envelope_max_ratio", env.max_ratio);
    }
    o.results.put("steps", traj.steps as i64);
    o.say("t_end", hs.t_end);
    o.say("density", traj.final_state.density());
    Ok(o)
}

pub fn picard(ctx: &mut Context) -> Result<Outcome, CliError> {
    let model = ctx.cfg.model()?;
    let hs = ctx.cfg.hierarchy()?;
    let ps = ctx.cfg.picard()?;
    let k0 = ctx.cfg.initial_vector(&model)?;
    let (theta0, theta0_source) = resolve_theta0(ctx, &model)?;
    let mut o = Outcome::ok("OK");
    o.horizons
        .put("theta0", theta0)
        .put("theta0_source", theta0_source);
    let Some((omega, source)) = resolve_omega(ctx, &model) else {
        return Ok(unbounded(o, "the Picard series"));
    };
    let (mean_b, _) = mean_sup_b(ctx, &model);
    let opt = optimal(theta0, omega, mean_b)?;
    let delta = ps.delta_fraction * (opt.theta_star - theta0);
    let td = t_delta(theta0, opt.theta_star, opt.theta_star, delta, omega, mean_b)?;
    o.horizons
        .put("omega", omega)
        .put("omega_source", source.as_str())
        .put("theta_star", opt.theta_star)
        .put("tau", opt.tau)
        .put("t_delta", td);

    let h = Hierarchy::new(&model, hs.max_order, hs.closure)?.with_execution(ctx.execution);
    let mut po = PicardOptions::new(ps.t, ps.n_terms, omega, opt.theta_star);
    po.substeps = ps.substeps;
    po.horizon = Some(opt.tau);
    let p = picard_solve(&h, &k0, &po)?;
    let maj = if ps.t < td {
        majorant_terms(ps.t, td, p.differences.len())?
    } else {
        vec![f64::NAN; p.differences.len()]
    };
    let rows = p
        .differences
        .iter()
        .zip(&maj)
        .enumerate()
        .map(|(i, (d, m))| vec![(i + 1).to_string(), num(*d), num(*m)]);
    ctx.out.write_csv(
        "picard.csv",
        &["iteration", "difference", "majorant_term"],
        rows,
    )?;
    write_orders(&mut ctx.out, &[(ps.t, &p.solution)])?;

    o.results
        .put("t", ps.t)
        .put("terms", ps.n_terms as i64)
        .put("dense", p.dense)
        .put(
            "last_difference",
            p.differences.last().copied().unwrap_or(0.0),
        );
    o.say("t", ps.t);
    o.say("tau", opt.tau);
    if let Some(d) = p.differences.last() {
        o.say("last_difference", *d);
    }
    Ok(o)
}

pub fn bounds(ctx: &mut Context) -> Result<Outcome, CliError> {
    let model = ctx.cfg.model()?;
    let (theta0, theta0_source) = resolve_theta0(ctx, &model)?;
    let mut o = Outcome::ok("OK");
    let Some((omega, source)) = resolve_omega(ctx, &model) else {
        return Ok(unbounded(o, "the existence horizon"));
    };
    let (mean_b, sup_b) = mean_sup_b(ctx, &model);
    let b = ctx.cfg.bounds();
    let opt = optimal(theta0, omega, mean_b)?;
    let theta = b.and_then(|b| b.theta).unwrap_or(opt.theta_star);
    if theta <= theta0 {
        return Err(ctx
            .cfg
            .bounds_error(format!("theta = {theta} must exceed theta0 = {theta0}")));
    }
    let theta_pp = b.and_then(|b| b.theta_pp).unwrap_or(theta - 1.0);
    let steps = b.map_or(3, |b| b.ladder_steps);
    let fraction = b.map_or(0.1, |b| b.delta_fraction);
    let n_terms = b.map_or(20, |b| b.majorant_terms);
    if !(fraction > 0.0 && fraction < 1.0) || steps == 0 {
        return Err(ctx
            .cfg
            .bounds_error("bounds needs ladder_steps >= 1 and delta_fraction in (0, 1)"));
    }

    let p = HorizonParams::new(theta0, theta, omega, mean_b, sup_b)?;
    let t_horizon = horizon(&p);
    let norms = operator_norm_bounds(&p, theta_pp)?;
    let delta = fraction * (theta - theta0);
    let rungs = ladder(theta0, theta, steps, delta)?;
    let td = t_delta(theta0, theta, theta, delta, omega, mean_b)?;
    let t_eval = ctx
        .cfg
        .config
        .picard
        .as_ref()
        .map_or(0.5 * td, |ps| ps.get_ref().t);
    let terms = if t_eval < td {
        majorant_terms(t_eval, td, n_terms)?
    } else {
        Vec::new()
    };

    let table = [
        ("theta0", theta0),
        ("omega", omega),
        ("mean_b", mean_b),
        ("sup_b", sup_b),
        ("theta_star", opt.theta_star),
        ("tau", opt.tau),
        ("theta", theta),
        ("horizon", t_horizon),
        ("theta_pp", theta_pp),
        ("norm_l", norms.l),
        ("norm_c", norms.c),
        ("norm_d", norms.d),
        ("delta", delta),
        ("t_delta", td),
        ("majorant_t", t_eval),
    ];
    ctx.out.write_csv(
        "bounds.csv",
        &["quantity", "value"],
        table.iter().map(|(k, v)| vec![k.to_string(), num(*v)]),
    )?;
    ctx.out.write_csv(
        "ladder.csv",
        &["index", "theta"],
        rungs
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), num(*v)]),
    )?;
    ctx.out.write_csv(
        "majorant.csv",
        &["n", "term"],
        terms
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(i + 1).to_string(), num(*v)]),
    )?;

    o.horizons
        .put("theta0", theta0)
        .put("theta0_source", theta0_source)
        .put("omega", omega)
        .put("omega_source", source.as_str())
        .put("theta_star", opt.theta_star)
        .put("tau", opt.tau)
        .put("theta", theta)
        .put("horizon", t_horizon)
        .put("t_delta", td);
    for (k, v) in &table {
        o.say(k, *v);
    }
    Ok(o)
}

pub fn compare(ctx: &mut Context) -> Result<Outcome, CliError> {
    let model = ctx.cfg.model()?;
    let hs = ctx.cfg.hierarchy()?;
    let opts = ctx.cfg.run_options(ctx.execution)?;
    let k0 = ctx.cfg.initial_vector(&model)?;
    if hs.max_order < 2 {
        return Err(CliError::config(
            &ctx.cfg.path,
            None,
            "compare needs hierarchy.max_order >= 2".into(),
        ));
    }

    let mut o = Outcome::ok("PASS");
    o.seed = Some(opts.seed);
    if hs.t_end != opts.t_end {
        o.warnings.push(format!(
            "hierarchy integrated to simulate.t_end = {} instead of hierarchy.t_end = {}",
            opts.t_end, hs.t_end
        ));
    }
    let rep = run(&model, &opts)?;
    write_estimates(&mut ctx.out, &rep)?;
    note_budget(&mut o, &rep);

    let h = Hierarchy::new(&model, hs.max_order, hs.closure)?.with_execution(ctx.execution);
    let kt = integrate(&h, &k0, &IntegrateOptions::new(opts.t_end, hs.dt))?.final_state;
    let est = rep.estimates.last().ok_or_else(|| {
        CliError::Core(kawasaki_core::Error::Config(
            "no Monte Carlo estimate".into(),
        ))
    })?;
    let cmp = compare_pair(est, &kt, COMPARE_THRESHOLD)?;
    let rows = cmp.bins.iter().map(|b| {
        vec![
            num(cmp.time),
            num(b.left),
            num(b.right),
            num(b.mc_g),
            num(b.mc_se),
            num(b.hierarchy_g),
            num(b.z),
            b.within.to_string(),
        ]
    });
    ctx.out.write_csv(
        "compare.csv",
        &[
            "time",
            "bin_left",
            "bin_right",
            "mc_g",
            "mc_se",
            "hierarchy_g",
            "z",
            "within",
        ],
        rows,
    )?;

    o.results
        .put("time", cmp.time)
        .put("fraction_within", cmp.fraction_within)
        .put("max_z", cmp.max_z)
        .put("bins", cmp.bins.len() as i64);
    o.say("fraction_within", cmp.fraction_within);
    o.say("max_z", cmp.max_z);
    if !cmp.pass {
        o.status = "FAIL".into();
        o.exit_code = 2;
    }
    Ok(o)
}
