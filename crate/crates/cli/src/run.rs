//! Scenario execution: simulate, filter, solve the dual problem, then run
//! every enabled check against oracles and inequalities.

use std::f64::consts::PI;
use std::time::Instant;

use recutil::bsde::solve_linear_bsde;
use recutil::dual::{alternative_controls, MinimizerMethod, UtilityKind};
use recutil::kignorance::{
    cara_saddle, deterministic_mu_minimizer, expectation_under, kignorance_utility, log_saddle, small_mu_case,
    submartingale_check, KScenario,
};
use recutil::maxprin::{adjoint_processes, stationarity_check, StationarityStatus};
use recutil::{
    simulate_brownian, simulate_drift, simulate_market, verify_saddle, Basis, BsdeConfig, ControlProcess,
    DeterministicDrift, DriftModel, DualOptions, DualSolution, Estimate, FilteredMarket, GeneratorSpec, PathField,
    RegressionState, SeedStreams, TimeGrid, UtilitySpec, Volatility,
};
use thiserror::Error;

use crate::config::{DriftConfig, DriverConfig, ScenarioConfig, UtilityConfig};
use crate::report::{CheckRecord, CheckStatus, Num, OracleDelta, RunReport, SolutionSummary, Spread, SCHEMA_VERSION};

/// Paths used to re-simulate under the risk-neutral measure for the
/// submartingale test.
const SUBMARTINGALE_PATHS: usize = 20_000;
const SUBMARTINGALE_ALTERNATIVES: usize = 4;

#[derive(Debug, Error)]
#[error("scenario {scenario}: {stage}: {source}")]
pub struct RunError {
    pub scenario: String,
    pub stage: &'static str,
    #[source]
    pub source: recutil::Error,
}

type Staged<T> = std::result::Result<T, RunError>;

struct Ctx<'a> {
    name: &'a str,
}

impl Ctx<'_> {
    fn wrap<T>(&self, stage: &'static str, r: recutil::Result<T>) -> Staged<T> {
        r.map_err(|source| RunError {
            scenario: self.name.to_string(),
            stage,
            source,
        })
    }
}

pub fn drift_model(cfg: &ScenarioConfig) -> DriftModel<f64> {
    let model = match cfg.drift {
        DriftConfig::Constant { value } => DriftModel::constant(value),
        DriftConfig::Sinusoid {
            amplitude,
            frequency,
            phase,
            offset,
        } => DriftModel::deterministic(DeterministicDrift::from_fn(
            format!("{offset} + {amplitude} sin(2 pi {frequency} t + {phase})"),
            move |t: f64, _| offset + amplitude * (2.0 * PI * frequency * t + phase).sin(),
        )),
        DriftConfig::ConstantGaussian { mean, variance } => DriftModel::constant_gaussian(mean, variance),
        DriftConfig::OrnsteinUhlenbeck {
            rate,
            long_run,
            vol,
            mean,
            variance,
        } => DriftModel::ornstein_uhlenbeck(rate, long_run, vol, mean, variance),
    };
    match cfg.market.drift_bound {
        Some(b) => model.with_bound(b),
        None => model,
    }
}

pub fn utility(cfg: &ScenarioConfig) -> recutil::Result<UtilitySpec<f64>> {
    match cfg.utility {
        UtilityConfig::Cara { alpha } => UtilitySpec::cara(alpha),
        UtilityConfig::Log => Ok(UtilitySpec::log()),
        UtilityConfig::Power { p } => UtilitySpec::power(p),
    }
}

pub fn generator(cfg: &ScenarioConfig) -> recutil::Result<GeneratorSpec<f64>> {
    match &cfg.driver {
        DriverConfig::Zero => Ok(GeneratorSpec::zero()),
        DriverConfig::KIgnorance { k } => GeneratorSpec::k_ignorance(*k),
        DriverConfig::Discount { r } => Ok(GeneratorSpec::discount(*r, cfg.dim())),
        DriverConfig::Linear { beta, gamma } => Ok(GeneratorSpec::linear(*beta, gamma.clone())),
    }
}

pub fn dual_options(cfg: &ScenarioConfig) -> DualOptions<f64> {
    DualOptions {
        bsde: BsdeConfig {
            basis: Basis::new(cfg.bsde.basis_degree, usize::MAX),
            n_picard: cfg.bsde.n_picard,
            ..BsdeConfig::default()
        },
        ..DualOptions::default()
    }
}

/// Simulates the market of a scenario and filters it.
pub fn filtered_market(cfg: &ScenarioConfig) -> recutil::Result<FilteredMarket<f64>> {
    let grid = TimeGrid::new(cfg.grid.horizon, cfg.grid.n_steps)?;
    let seeds = SeedStreams::from_master(cfg.seed);
    let model = drift_model(cfg);
    let ensemble = simulate_brownian(&grid, cfg.grid.n_paths, cfg.dim(), seeds.brownian)?;
    let mu = simulate_drift(&model, &ensemble, seeds.drift)?;
    let sigma = Volatility::diagonal(&cfg.market.sigma)?;
    let market = simulate_market(ensemble, mu, sigma, vec![cfg.market.s0; cfg.dim()])?;
    FilteredMarket::from_market(&model, &market)
}

fn record(id: &str, pass: bool, statistic: f64, tolerance: f64, stderr: f64, detail: impl Into<String>) -> CheckRecord {
    CheckRecord {
        id: id.to_string(),
        status: CheckStatus::from_pass(pass),
        statistic: Num(statistic),
        tolerance: Num(tolerance),
        stderr: Num(stderr),
        detail: detail.into(),
    }
}

/// Allowance for rounding when two exact values are compared.
fn roundoff(scale: f64) -> f64 {
    1e-12 * scale.abs().max(1.0)
}

fn method_label(m: &MinimizerMethod) -> String {
    match m {
        MinimizerMethod::Singleton => "singleton".into(),
        MinimizerMethod::Clamp => "clamp".into(),
        MinimizerMethod::RiskNeutral => "risk-neutral".into(),
        MinimizerMethod::AuxiliaryBsde => "auxiliary-bsde".into(),
        MinimizerMethod::BestEffort { converged, evaluations } => {
            format!("best-effort (converged: {converged}, evaluations: {evaluations})")
        }
    }
}

fn summary(sol: &DualSolution<f64>) -> SolutionSummary {
    SolutionSummary {
        method: method_label(&sol.method),
        flagged: sol.flagged,
        square_integrable: sol.square_integrable,
        zeta_hat: if sol.zeta_stderr == 0.0 {
            Estimate::exact(sol.zeta_hat)
        } else {
            Estimate::sampled(sol.zeta_hat, sol.zeta_stderr)
        }
        .into(),
        y0: sol.v_lower.into(),
        v_upper: sol.v_upper.into(),
        v_star: sol.v_star.into(),
        budget: sol.budget.into(),
        budget_gap: Num(sol.budget_gap),
        auxiliary_y0: sol.auxiliary_y0.map(Into::into),
        xi_hat: Spread::of(sol.xi_hat.iter().copied()),
        gamma_hat: Spread::of(sol.control.gamma.iter().copied()),
        beta_hat: Spread::of(sol.control.beta.iter().copied()),
    }
}

fn max_abs_diff(a: &PathField<f64>, b: &PathField<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Runs one scenario end to end. Deterministic given the configuration.
pub fn run_scenario(cfg: &ScenarioConfig) -> Staged<RunReport> {
    let started = Instant::now();
    let ctx = Ctx { name: &cfg.name };
    let fm = ctx.wrap("simulation", filtered_market(cfg))?;
    let util = ctx.wrap("utility", utility(cfg))?;
    let gen = ctx.wrap("driver", generator(cfg))?;
    let opts = dual_options(cfg);
    let x = cfg.wealth;
    let tol = &cfg.tolerances;
    let mut sol = ctx.wrap("dual solve", recutil::solve_dual(x, &fm, &util, &gen, &opts))?;
    let mut checks = Vec::new();
    let mut deltas = Vec::new();

    if cfg.checks.innovation {
        checks.push(innovation_check(&fm, tol.innovation_sigmas));
    }
    if cfg.checks.budget {
        let b = sol.budget;
        let stat = (b.value - x).abs();
        let band = tol.sigmas * b.stderr + roundoff(x);
        checks.push(record("budget", stat <= band, stat, band, b.stderr, "|E[L(T) xi] - x|"));
    }
    if cfg.checks.duality_gap {
        let (s, l) = (sol.v_star, sol.v_lower);
        let stat = (s.value - l.value).abs();
        let se = s.combined_stderr(&l);
        let band = tol.sigmas * se + roundoff(l.value);
        checks.push(record("duality_gap", stat <= band, stat, band, se, "|V_star - Y(0)|"));
    }
    if cfg.checks.saddle && cfg.checks.alternatives > 0 {
        let aux = SeedStreams::from_master(cfg.seed).aux;
        let rep = ctx.wrap(
            "saddle verification",
            verify_saddle(&sol, &fm, &util, &gen, cfg.checks.alternatives, aux, &opts),
        )?;
        let worst = |cs: &[recutil::dual::AlternativeCheck], sign: f64| {
            cs.iter()
                .filter(|c| c.stderr > 0.0)
                .map(|c| sign * c.difference / c.stderr)
                .fold(f64::INFINITY, f64::min)
        };
        checks.push(record(
            "saddle.controls",
            rep.control_violations == 0,
            rep.control_violations as f64,
            0.0,
            0.0,
            format!(
                "{} alternatives; smallest standardized gain {:.2}",
                rep.control_checks.len() - 1,
                worst(&rep.control_checks, 1.0)
            ),
        ));
        checks.push(record(
            "saddle.terminal",
            rep.terminal_violations == 0,
            rep.terminal_violations as f64,
            0.0,
            0.0,
            format!(
                "{} perturbations; smallest standardized loss {:.2}",
                rep.terminal_checks.len(),
                worst(&rep.terminal_checks, -1.0)
            ),
        ));
    }
    if cfg.checks.oracles {
        oracle_checks(cfg, &ctx, &fm, &util, &gen, &opts, &sol, &mut checks, &mut deltas)?;
    }
    if cfg.checks.max_principle && gen.is_smooth {
        if let Some(bsde) = sol.value_bsde.take() {
            let adj = ctx.wrap("adjoint processes", adjoint_processes(&gen, &bsde, &fm))?;
            drop(bsde);
            let rep = ctx.wrap(
                "stationarity",
                stationarity_check(&sol.xi_hat, &adj, &util, tol.zero_tol * x.abs().max(f64::MIN_POSITIVE), tol.cv_threshold, tol.slack),
            )?;
            let status = match rep.status {
                StationarityStatus::Pass => CheckStatus::Pass,
                StationarityStatus::Fail => CheckStatus::Fail,
                StationarityStatus::Inconclusive => CheckStatus::Inconclusive,
            };
            checks.push(CheckRecord {
                id: "maxprin.stationarity".into(),
                status,
                statistic: Num(rep.cv),
                tolerance: Num(tol.cv_threshold),
                stderr: Num(0.0),
                detail: format!(
                    "CV of m(T)/(u'(xi) n(T)) on {} interior paths; {} binding",
                    rep.interior, rep.boundary
                ),
            });
        }
    }

    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: cfg.clone(),
        solution: summary(&sol),
        deltas,
        checks,
        elapsed_seconds: Some(started.elapsed().as_secs_f64()),
    })
}

/// Per-path quadratic variation of the innovation against `T`.
fn innovation_check(fm: &FilteredMarket<f64>, sigmas: f64) -> CheckRecord {
    let (n, np, d) = (fm.n_steps(), fm.n_paths(), fm.dim());
    let qv: Vec<f64> = (0..np)
        .map(|p| (0..n).map(|k| fm.w_hat.get(k, p, 0)).map(|w| w * w).sum())
        .collect();
    let e = Estimate::from_samples(&qv);
    let horizon = fm.grid.horizon();
    let stat = (e.value - horizon).abs();
    let band = sigmas * e.stderr;
    record(
        "innovation.qv",
        stat <= band,
        stat,
        band,
        e.stderr,
        format!("mean [W_hat]_T = {:.6} vs T = {horizon} (first of {d} components)", e.value),
    )
}

#[allow(clippy::too_many_arguments)]
fn oracle_checks(
    cfg: &ScenarioConfig,
    ctx: &Ctx<'_>,
    fm: &FilteredMarket<f64>,
    util: &UtilitySpec<f64>,
    gen: &GeneratorSpec<f64>,
    opts: &DualOptions<f64>,
    sol: &DualSolution<f64>,
    checks: &mut Vec<CheckRecord>,
    deltas: &mut Vec<OracleDelta>,
) -> Staged<()> {
    let tol = &cfg.tolerances;
    let x = cfg.wealth;
    let unit_market = cfg.dim() == 1 && cfg.market.sigma[0] == 1.0;
    match &cfg.driver {
        DriverConfig::KIgnorance { k } if unit_market => {
            let scn = ctx.wrap("scenario", KScenario::new(*k, util.clone(), x))?;
            if matches!(sol.method, MinimizerMethod::RiskNeutral) {
                small_mu_checks(cfg, ctx, &scn, fm, util, gen, opts, sol, checks, deltas)?;
                return Ok(());
            }
            match util.kind {
                UtilityKind::Cara { .. } => {
                    let rec = ctx.wrap("CARA closed form", cara_saddle(&scn, fm))?;
                    let gap = max_abs_diff(&sol.control.gamma, rec.prior.gamma_hat());
                    checks.push(record("oracle.cara.gamma", gap == 0.0, gap, 0.0, 0.0, "max |gamma_hat - clamp(-mu_hat)|"));
                    compare(
                        "oracle.cara.zeta",
                        "zeta_hat",
                        Estimate::sampled(sol.zeta_hat, sol.zeta_stderr),
                        rec.zeta_hat,
                        tol.multiplier_rel,
                        tol.sigmas,
                        checks,
                        deltas,
                    );
                    compare("oracle.cara.y0", "Y(0)", sol.v_lower, rec.y0, tol.value_rel, tol.sigmas, checks, deltas);
                }
                UtilityKind::Log => {
                    let rec = ctx.wrap("log closed form", log_saddle(&scn, fm, &opts.bsde))?;
                    let gap = max_abs_diff(&sol.control.gamma, rec.prior.gamma_hat());
                    checks.push(record("oracle.log.gamma", gap == 0.0, gap, 0.0, 0.0, "auxiliary BSDE minimizer"));
                    let dz = (sol.zeta_hat - rec.zeta_hat).abs();
                    checks.push(record("oracle.log.zeta", dz == 0.0, dz, 0.0, 0.0, "zeta_hat = 1/x"));
                    deltas.push(OracleDelta {
                        quantity: "zeta_hat".into(),
                        pipeline: Num(sol.zeta_hat),
                        closed_form: Num(rec.zeta_hat),
                        delta: Num(sol.zeta_hat - rec.zeta_hat),
                    });
                    compare("oracle.log.y0", "Y(0)", sol.v_lower, rec.y0, tol.value_rel, tol.sigmas, checks, deltas);
                    let b = rec.budget;
                    let stat = (b.value - x).abs();
                    let band = tol.sigmas * b.stderr + roundoff(x);
                    checks.push(record("oracle.log.budget", stat <= band, stat, band, b.stderr, "E[L(T) x/Z(T)] = x"));
                }
                _ => {}
            }
            if let DriftConfig::Constant { .. } | DriftConfig::Sinusoid { .. } = cfg.drift {
                deterministic_checks(cfg, ctx, *k, fm, util, sol, checks)?;
            }
            if !sol.xi_hat.iter().all(|v| *v == sol.xi_hat[0]) {
                let rep = ctx.wrap(
                    "K-ignorance utility",
                    kignorance_utility(&sol.xi_hat, *k, fm, util, &opts.bsde),
                )?;
                checks.push(record(
                    "kignorance.bang_bang",
                    rep.consistent,
                    rep.difference.abs(),
                    rep.tolerance,
                    rep.y0.combined_stderr(&rep.bang_bang),
                    "Y(0) against E_gamma[u(xi)] with gamma = -K sign(Z)",
                ));
            }
        }
        DriverConfig::Discount { .. } | DriverConfig::Linear { .. } => {
            let (beta, gamma) = match &cfg.driver {
                DriverConfig::Discount { r } => (-*r, vec![0.0; cfg.dim()]),
                DriverConfig::Linear { beta, gamma } => (*beta, gamma.clone()),
                _ => unreachable!(),
            };
            let (n, np) = (fm.n_steps(), fm.n_paths());
            let c = ctx.wrap("linear control", ControlProcess::constant(n, np, beta, &gamma, gen.lipschitz))?;
            let terminal: Vec<f64> = sol.xi_hat.iter().map(|v| util.u(*v)).collect();
            let state = RegressionState::for_market(fm);
            let lin = ctx.wrap(
                "linear BSDE",
                solve_linear_bsde(&c.beta, &c.gamma, &PathField::zeros(n, np, 1), &terminal, fm, &state, &opts.bsde),
            )?;
            compare("oracle.linear.y0", "Y(0)", sol.v_lower, lin.y0, tol.value_rel, tol.sigmas, checks, deltas);
        }
        _ => {}
    }
    Ok(())
}

/// `|pipeline − oracle| ≤ rel·|oracle| + sigmas·se`.
#[allow(clippy::too_many_arguments)]
fn compare(
    id: &str,
    quantity: &str,
    pipeline: Estimate<f64>,
    oracle: Estimate<f64>,
    rel: f64,
    sigmas: f64,
    checks: &mut Vec<CheckRecord>,
    deltas: &mut Vec<OracleDelta>,
) {
    let delta = pipeline.value - oracle.value;
    let se = pipeline.combined_stderr(&oracle);
    let band = rel * oracle.value.abs() + sigmas * se + roundoff(oracle.value);
    checks.push(record(id, delta.abs() <= band, delta.abs(), band, se, format!("{quantity} against closed form")));
    deltas.push(OracleDelta {
        quantity: quantity.into(),
        pipeline: Num(pipeline.value),
        closed_form: Num(oracle.value),
        delta: Num(delta),
    });
}

/// Drift bounded by `K`: the investor holds the riskless asset and every
/// prior gives the same utility.
#[allow(clippy::too_many_arguments)]
fn small_mu_checks(
    cfg: &ScenarioConfig,
    ctx: &Ctx<'_>,
    scn: &KScenario<f64>,
    fm: &FilteredMarket<f64>,
    util: &UtilitySpec<f64>,
    gen: &GeneratorSpec<f64>,
    opts: &DualOptions<f64>,
    sol: &DualSolution<f64>,
    checks: &mut Vec<CheckRecord>,
    deltas: &mut Vec<OracleDelta>,
) -> Staged<()> {
    let x = cfg.wealth;
    let ux = util.u(x);
    let xi_gap = sol.xi_hat.iter().fold(0.0f64, |m, v| m.max((v - x).abs()));
    checks.push(record("oracle.small_mu.xi", xi_gap == 0.0, xi_gap, 0.0, 0.0, "xi_hat = x on every path"));
    let dy = (sol.v_lower.value - ux).abs();
    checks.push(record(
        "oracle.small_mu.y0",
        dy == 0.0 && sol.v_lower.exact,
        dy,
        0.0,
        sol.v_lower.stderr,
        format!("Y(0) = u(x) = {ux}"),
    ));
    let reference = ctx.wrap("small-drift case", small_mu_case(scn, fm, opts))?;
    let dz = (reference.zeta_hat - sol.zeta_hat).abs();
    checks.push(record("oracle.small_mu.zeta", dz == 0.0, dz, 0.0, 0.0, "zeta_hat = u'(x)"));
    deltas.push(OracleDelta {
        quantity: "zeta_hat".into(),
        pipeline: Num(sol.zeta_hat),
        closed_form: Num(reference.zeta_hat),
        delta: Num(sol.zeta_hat - reference.zeta_hat),
    });
    drop(reference);
    let terminal: Vec<f64> = sol.xi_hat.iter().map(|v| util.u(*v)).collect();
    let aux = SeedStreams::from_master(cfg.seed).aux;
    let mut worst = 0.0f64;
    let mut all_exact = true;
    let mut count = 0;
    for (_, alt) in alternative_controls(&sol.control, fm, gen, cfg.checks.alternatives.max(1), aux) {
        let e = ctx.wrap("alternative prior", expectation_under(&terminal, &alt, fm))?;
        worst = worst.max((e.value - ux).abs());
        all_exact &= e.exact;
        count += 1;
    }
    checks.push(record(
        "oracle.small_mu.alternatives",
        worst == 0.0 && all_exact,
        worst,
        0.0,
        0.0,
        format!("E_gamma[u(x)] = u(x) for {count} priors"),
    ));
    Ok(())
}

/// Pointwise clamp of a known drift, and the submartingale property of
/// the value process along alternative priors.
fn deterministic_checks(
    cfg: &ScenarioConfig,
    ctx: &Ctx<'_>,
    k: f64,
    fm: &FilteredMarket<f64>,
    util: &UtilitySpec<f64>,
    sol: &DualSolution<f64>,
    checks: &mut Vec<CheckRecord>,
) -> Staged<()> {
    let model = drift_model(cfg);
    let drift = match &model.kind {
        recutil::DriftKind::Deterministic(f) => f.clone(),
        _ => return Ok(()),
    };
    let minimizer = ctx.wrap("deterministic minimizer", deterministic_mu_minimizer(&drift, k))?;
    let on_grid = minimizer.on_grid(&fm.grid);
    let mut gap = 0.0f64;
    for (kk, g) in on_grid.iter().enumerate() {
        for v in sol.control.gamma.slice(kk) {
            gap = gap.max((v - g).abs());
        }
    }
    let band = 1e-12 * k.max(f64::MIN_POSITIVE);
    checks.push(record(
        "oracle.deterministic.gamma",
        gap <= band,
        gap,
        band,
        0.0,
        "gamma_hat(t) = clamp(-mu(t), -K, K)",
    ));

    // paths under the risk-neutral measure: W_hat = W_tilde − ∫ eta_hat dt
    let grid = fm.grid.clone();
    let np = cfg.grid.n_paths.min(SUBMARTINGALE_PATHS);
    let seeds = SeedStreams::from_master(cfg.seed);
    let ensemble = ctx.wrap("risk-neutral paths", simulate_brownian(&grid, np, 1, seeds.aux ^ 0x5EB))?;
    let sigma = Volatility::identity(1);
    let fm_tilde = ctx.wrap(
        "risk-neutral paths",
        FilteredMarket::simulate_innovations(&model, &sigma, &[cfg.market.s0], &ensemble, |s, out| {
            out[0] = -s.mu_hat[0];
        }),
    )?;
    drop(ensemble);
    let n = grid.n_steps();
    let mut gamma = PathField::zeros(n, np, 1);
    for (kk, g) in on_grid.iter().enumerate() {
        gamma.slice_mut(kk).fill(*g);
    }
    let candidate = ctx.wrap("minimizer control", ControlProcess::new(PathField::zeros(n, np, 1), gamma, k))?;
    let gen = ctx.wrap("driver", GeneratorSpec::k_ignorance(k))?;
    let mut worst = f64::NEG_INFINITY;
    let mut pass = true;
    let mut count = 0;
    for (_, alt) in alternative_controls(&candidate, &fm_tilde, &gen, SUBMARTINGALE_ALTERNATIVES, seeds.aux ^ 0x5EC) {
        let rep = ctx.wrap(
            "submartingale test",
            submartingale_check(&fm_tilde, &alt, &minimizer, util, sol.zeta_hat),
        )?;
        worst = worst.max(-rep.min_standardized_drift);
        pass &= rep.pass;
        count += 1;
    }
    checks.push(record(
        "oracle.deterministic.submartingale",
        pass,
        worst,
        4.0,
        0.0,
        format!("largest negative standardized drift over {count} priors, {np} risk-neutral paths"),
    ));
    Ok(())
}
