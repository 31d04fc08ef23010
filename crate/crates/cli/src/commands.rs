use std::path::{Path, PathBuf};

use log::info;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use tvvar::filter::FilterRun;
use tvvar::forecast::{correlation_of, credible_bounds, forecast_with, metrics_from_run, FitMetrics, HorizonDiscount};
use tvvar::model::ModelConfigSpec;
use tvvar::portfolio::{backtest as run_backtest, BacktestReport, Cumulation, Strategy, DEFAULT_TARGET};
use tvvar::selection::{compare_models, evaluate_cell, evaluate_log_likelihood, rank_cells, CellScore, GridCell, LikelihoodReport};
use tvvar::series::{load_csv, save_csv, to_returns, CsvOptions, ReturnKind, TimeColumn};
use tvvar::simulate::{generate, var_coefficients, SimSpec, VolatilityMode};
use tvvar::{default_prior, run_filter, ModelConfig, PosteriorState, Prior, SeriesFrame, TvvarError};

use crate::config::{RunConfig, TransformChoice, VolChoice};
use crate::table::{num, nums, Table};
use crate::{BacktestArgs, CliError, DataArgs, ForecastArgs, GlobalOpts, GridArgs, ModelArgs, SimulateArgs};

const DEFAULT_D: usize = 1;
const DEFAULT_DELTA: f64 = 0.98;
const DEFAULT_BETA: f64 = 0.9;

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(global: &GlobalOpts) -> Result<Self, CliError> {
        let cfg = match &global.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let out = global.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&out).map_err(|e| TvvarError::Io(format!("{}: {e}", out.display())))?;
        let jobs = global.jobs.or(cfg.jobs).unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
        let seed = global.seed.or(cfg.seed).unwrap_or(0);
        Ok(Context { cfg, out, seed, pool })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| TvvarError::Io(format!("{}: {e}", path.display())))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn load_series(&self, args: &DataArgs) -> Result<SeriesFrame, CliError> {
        let path = args
            .data
            .clone()
            .or_else(|| self.cfg.data.clone())
            .ok_or_else(|| CliError::Usage("no input data: pass --data or set \"data\" in the config".into()))?;
        let time_column = match args.time_column.clone().or_else(|| self.cfg.time_column.clone()) {
            Some(name) => TimeColumn::Named(name),
            None => TimeColumn::Auto,
        };
        let opts = CsvOptions { time_column, columns: args.columns.clone().or_else(|| self.cfg.columns.clone()) };
        let frame = load_csv(&path, &opts)?;
        let frame = match args.transform.or(self.cfg.transform).unwrap_or(TransformChoice::None) {
            TransformChoice::None => frame,
            TransformChoice::Geometric => to_returns(&frame, ReturnKind::Geometric)?,
            TransformChoice::Log => to_returns(&frame, ReturnKind::Log)?,
        };
        info!("loaded {} observations of {} series from {}", frame.len(), frame.dim(), path.display());
        Ok(frame)
    }

    fn prior(&self, config: &ModelConfig) -> Result<Prior, CliError> {
        let mut prior = default_prior(config, None)?;
        if let Some(s) = self.cfg.prior.spread_scale {
            prior.p = DMatrix::identity(config.state_dim(), config.state_dim()) * s;
        }
        if let Some(s) = self.cfg.prior.vol_scale {
            prior.s = DMatrix::identity(config.p(), config.p()) * s;
        }
        prior.validate(config)?;
        Ok(prior)
    }

    fn model(&self, p: usize, args: &ModelArgs) -> Result<ModelConfig, CliError> {
        let m = &self.cfg.model;
        Ok(ModelConfig::new(
            p,
            args.d.or(m.d).unwrap_or(DEFAULT_D),
            args.delta.or(m.delta).unwrap_or(DEFAULT_DELTA),
            args.beta.or(m.beta).unwrap_or(DEFAULT_BETA),
        )?)
    }

    /// Grid cells from flags, then the config grid, then the single model.
    fn cells(&self, p: usize, args: &GridArgs) -> Result<Vec<ModelConfig>, CliError> {
        let (g, m) = (&self.cfg.grid, &self.cfg.model);
        let ds = args.d.clone().or_else(|| g.d.clone()).unwrap_or_else(|| vec![m.d.unwrap_or(DEFAULT_D)]);
        let deltas = args.delta.clone().or_else(|| g.delta.clone()).unwrap_or_else(|| vec![m.delta.unwrap_or(DEFAULT_DELTA)]);
        let betas = args.beta.clone().or_else(|| g.beta.clone()).unwrap_or_else(|| vec![m.beta.unwrap_or(DEFAULT_BETA)]);
        let grid = tvvar::selection::Grid { d: ds, delta: deltas, beta: betas };
        let cells = grid.cells();
        if cells.is_empty() {
            return Err(CliError::Usage("empty grid".into()));
        }
        cells
            .into_iter()
            .map(|(d, delta, beta)| ModelConfig::new(p, d, delta, beta).map_err(CliError::from))
            .collect()
    }
}

fn tag(c: &ModelConfig) -> String {
    format!("d{}_delta{}_beta{}", c.d(), c.delta()[0], c.beta())
}

fn upper_pairs(labels: &[String], prefix: &str, diagonal: bool) -> (Vec<String>, Vec<(usize, usize)>) {
    let mut names = Vec::new();
    let mut idx = Vec::new();
    for i in 0..labels.len() {
        for j in i..labels.len() {
            if i == j && !diagonal {
                continue;
            }
            names.push(format!("{prefix}_{}_{}", labels[i], labels[j]));
            idx.push((i, j));
        }
    }
    (names, idx)
}

pub fn simulate(ctx: &Context, args: &SimulateArgs) -> Result<(), CliError> {
    let s = &ctx.cfg.simulate;
    let p = args.p.or(s.p).unwrap_or(2);
    let n = args.n.or(s.n).unwrap_or(500);
    let config = ctx.model(p, &args.model)?;
    let ar = args.ar.or(s.ar).unwrap_or(0.5);
    let sigma0 = args.sigma0.or(s.sigma0).unwrap_or(1e-4);
    let pstar = args.pstar.or(s.pstar).unwrap_or(0.01);
    let eye = DMatrix::identity(p, p);
    let mut lags = vec![&eye * ar];
    lags.resize(config.d(), DMatrix::zeros(p, p));
    let q = config.state_dim();
    let spec = SimSpec::new(config, var_coefficients(&DVector::zeros(p), &lags), &eye * sigma0, n, ctx.seed)
        .with_volatility(match args.volatility.or(s.volatility).unwrap_or(VolChoice::Fixed) {
            VolChoice::Fixed => VolatilityMode::Fixed,
            VolChoice::Beta => VolatilityMode::BetaEvolution,
        })
        .with_pstar(DMatrix::identity(q, q) * pstar)
        .with_guard(args.guard.or(s.guard).unwrap_or(1e6));
    let sim = generate(&spec)?;
    let labels: Vec<String> = (1..=p).map(|i| format!("s{i}")).collect();
    let times = (1..=n).map(|t| t.to_string()).collect();
    let frame = SeriesFrame::new(labels.clone(), Some(times), sim.series.values().clone(), sim.series.transform())?;
    let data_path = args.data.clone().unwrap_or_else(|| ctx.path("sim.csv"));
    save_csv(&frame, &data_path)?;
    info!("wrote {}", data_path.display());

    let (names, idx) = upper_pairs(&labels, "sigma", true);
    let mut sigma = Table::new(std::iter::once("t".to_string()).chain(names));
    let mut phi = Table::new(
        std::iter::once("t".to_string()).chain((0..q).flat_map(|r| labels.iter().map(move |l| format!("phi_{r}_{l}")))),
    );
    for (i, (s_t, phi_t)) in sim.sigma.iter().zip(&sim.phi).enumerate() {
        let t = (sim.truth_start + i).to_string();
        sigma.push(std::iter::once(t.clone()).chain(idx.iter().map(|&(a, b)| num(s_t[(a, b)]))).collect());
        phi.push(std::iter::once(t).chain(nums(phi_t.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))).collect());
    }
    sigma.save(&ctx.path("truth_sigma.csv"))?;
    phi.save(&ctx.path("truth_phi.csv"))?;
    ctx.write_json("sim_spec.json", &spec)?;
    println!("simulated {n} observations of {p} series (seed {}) -> {}", ctx.seed, data_path.display());
    Ok(())
}

#[derive(Serialize, serde::Deserialize)]
pub struct FittedState {
    pub config: ModelConfigSpec,
    pub labels: Vec<String>,
    pub state: PosteriorState,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    config: ModelConfigSpec,
    observations: usize,
    loglik: f64,
    likelihood: &'a LikelihoodReport,
    msse_1: Vec<f64>,
    mae_1: Vec<f64>,
    jitter_steps: usize,
}

pub fn fit(ctx: &Context, data: &DataArgs, model: &ModelArgs) -> Result<(), CliError> {
    let series = ctx.load_series(data)?;
    let config = ctx.model(series.dim(), model)?;
    let run = run_filter(&series, &config, &ctx.prior(&config)?)?;
    let labels = series.labels().to_vec();

    let mut diag = Table::new(
        std::iter::once("t".to_string())
            .chain(labels.iter().map(|l| format!("e_{l}")))
            .chain(["q", "logpred", "jitter_spread", "jitter_vol"].map(String::from)),
    );
    for dg in &run.diagnostics {
        diag.push(
            std::iter::once(dg.t.to_string())
                .chain(nums(dg.error.iter().copied()))
                .chain([num(dg.q), num(dg.logpred), dg.jitter.0.to_string(), dg.jitter.1.to_string()])
                .collect(),
        );
    }
    diag.save(&ctx.path("fit_diagnostics.csv"))?;

    let q = config.state_dim();
    let mut path = Table::new(
        std::iter::once("t".to_string()).chain((0..q).flat_map(|r| labels.iter().map(move |l| format!("m_{r}_{l}")))),
    );
    let (vol_names, vol_idx) = upper_pairs(&labels, "sigma", true);
    let mut vol = Table::new(std::iter::once("t".to_string()).chain(vol_names));
    let (cor_names, cor_idx) = upper_pairs(&labels, "rho", false);
    let mut cor = Table::new(std::iter::once("t".to_string()).chain(cor_names));
    for s in &run.snapshots {
        let t = s.t.to_string();
        path.push(std::iter::once(t.clone()).chain(nums(s.location.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))).collect());
        let sig = s.vol_posterior_mean(&config);
        vol.push(std::iter::once(t.clone()).chain(vol_idx.iter().map(|&(a, b)| num(sig[(a, b)]))).collect());
        if !cor_idx.is_empty() {
            let r = correlation_of(&s.vol_scale)?;
            cor.push(std::iter::once(t).chain(cor_idx.iter().map(|&(a, b)| num(r[(a, b)]))).collect());
        }
    }
    path.save(&ctx.path("posterior_path.csv"))?;
    vol.save(&ctx.path("volatility.csv"))?;
    if !cor_idx.is_empty() {
        cor.save(&ctx.path("correlation.csv"))?;
    }

    let lik = evaluate_log_likelihood(&run.snapshots, &series, &config)?;
    let m1 = metrics_from_run(&run, &series, &config, &[1], HorizonDiscount::Recursive)?.remove(0);
    ctx.write_json(
        "fit_state.json",
        &FittedState { config: config.clone().into(), labels: labels.clone(), state: run.final_state.clone() },
    )?;
    ctx.write_json(
        "fit_summary.json",
        &FitSummary {
            config: config.clone().into(),
            observations: series.len(),
            loglik: lik.total,
            likelihood: &lik,
            msse_1: m1.msse.iter().copied().collect(),
            mae_1: m1.mae.iter().copied().collect(),
            jitter_steps: run.diagnostics.iter().filter(|d| d.jitter != (0, 0)).count(),
        },
    )?;
    println!("fit {} ({} observations): loglik {:.4}", tag(&config), series.len(), lik.total);
    println!("  MSSE(1) {}", fmt4(m1.msse.iter()));
    println!("  MAE(1)  {}", fmt4(m1.mae.iter()));
    Ok(())
}

fn fmt4<'a>(xs: impl Iterator<Item = &'a f64>) -> String {
    xs.map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

pub fn forecast(ctx: &Context, args: &ForecastArgs) -> Result<(), CliError> {
    let path = args.state.clone().unwrap_or_else(|| ctx.path("fit_state.json"));
    let fitted: FittedState = read_json(&path)?;
    let config = ModelConfig::try_from(fitted.config)?;
    if args.horizon == 0 {
        return Err(CliError::Usage("--horizon must be at least 1".into()));
    }
    let mode = if args.constant_discount { HorizonDiscount::Constant } else { HorizonDiscount::Recursive };
    let mut table = Table::new(std::iter::once("h".to_string()).chain(fitted.labels.iter().flat_map(|l| {
        ["mean", "lower", "upper", "sd"].map(|k| format!("{k}_{l}"))
    })));
    for h in 1..=args.horizon {
        let fc = forecast_with(&fitted.state, &config, h, mode)?;
        let (lo, hi) = credible_bounds(&fc, args.level)?;
        let mut row = vec![h.to_string()];
        for i in 0..fitted.labels.len() {
            row.extend(nums([fc.mean[i], lo[i], hi[i], fc.covariance[(i, i)].sqrt()]));
        }
        table.push(row);
    }
    table.save(&ctx.path("forecast.csv"))?;
    println!(
        "forecast from t={} for h=1..{} with {:.0}% bounds -> {}",
        fitted.state.t,
        args.horizon,
        100.0 * args.level,
        ctx.path("forecast.csv").display()
    );
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| TvvarError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Core(TvvarError::Data { row: e.line(), column: format!("col {}", e.column()), msg: format!("{}: {e}", path.display()) })
    })
}

#[derive(Serialize)]
struct Failure {
    d: usize,
    delta: f64,
    beta: f64,
    error: String,
}

#[derive(Serialize)]
struct PairSummary {
    against: String,
    file: String,
    mean_bayes_factor: f64,
    mean_log_bayes_factor: f64,
}

#[derive(Serialize)]
struct SelectSummary {
    best: Option<String>,
    failures: Vec<Failure>,
    bayes_factors: Vec<PairSummary>,
    note: &'static str,
}

fn evaluate_cells(ctx: &Context, series: &SeriesFrame, cells: &[ModelConfig]) -> Vec<GridCell> {
    ctx.pool.install(|| {
        cells
            .par_iter()
            .map(|c| {
                let outcome = ctx
                    .prior(c)
                    .map_err(|e| e.to_string())
                    .and_then(|pr| evaluate_cell(series, c, &pr).map_err(|e| e.to_string()));
                GridCell { d: c.d(), delta: c.delta()[0], beta: c.beta(), outcome }
            })
            .collect()
    })
}

pub fn select(ctx: &Context, data: &DataArgs, grid: &GridArgs) -> Result<(), CliError> {
    let series = ctx.load_series(data)?;
    let configs = ctx.cells(series.dim(), grid)?;
    let mut cells = evaluate_cells(ctx, &series, &configs);
    rank_cells(&mut cells);
    let labels = series.labels();

    let mut table = Table::new(
        ["rank", "d", "delta", "beta", "loglik"]
            .map(String::from)
            .into_iter()
            .chain(labels.iter().map(|l| format!("msse_{l}")))
            .chain(labels.iter().map(|l| format!("mae_{l}"))),
    );
    let mut failures = Vec::new();
    println!("{:>4} {:>3} {:>6} {:>6} {:>14}  MSSE(1) / MAE(1)", "rank", "d", "delta", "beta", "loglik");
    for c in &cells {
        match &c.outcome {
            Ok(CellScore { loglik, msse1, mae1 }) => {
                let rank = table.len() + 1;
                table.push(
                    [rank.to_string(), c.d.to_string(), num(c.delta), num(c.beta), num(*loglik)]
                        .into_iter()
                        .chain(nums(msse1.iter().copied()))
                        .chain(nums(mae1.iter().copied()))
                        .collect(),
                );
                println!("{rank:>4} {:>3} {:>6} {:>6} {loglik:>14.4}  {} / {}", c.d, c.delta, c.beta, fmt4(msse1.iter()), fmt4(mae1.iter()));
            }
            Err(e) => {
                log::warn!("cell d={} delta={} beta={} failed: {e}", c.d, c.delta, c.beta);
                failures.push(Failure { d: c.d, delta: c.delta, beta: c.beta, error: e.clone() });
            }
        }
    }
    table.save(&ctx.path("likelihood_grid.csv"))?;

    let mut pairs = Vec::new();
    let best = cells.iter().find(|c| c.outcome.is_ok());
    if let Some(best) = best {
        let best_cfg = ModelConfig::new(series.dim(), best.d, best.delta, best.beta)?;
        let best_prior = ctx.prior(&best_cfg)?;
        for other in cells.iter().filter(|c| c.outcome.is_ok() && c.beta == best.beta && !std::ptr::eq(*c, best)) {
            let cfg = ModelConfig::new(series.dim(), other.d, other.delta, other.beta)?;
            let trace = compare_models(&series, &best_cfg, &cfg, &best_prior, &ctx.prior(&cfg)?)?;
            let file = format!("bayes_factor_vs_{}.csv", tag(&cfg));
            let mut t = Table::new(["t", "H_t", "logH_t"]);
            for i in 0..trace.t.len() {
                t.push(vec![trace.t[i].to_string(), num(trace.bayes_factor[i]), num(trace.log_bayes_factor[i])]);
            }
            t.save(&ctx.path(&file))?;
            println!("Bayes factor of {} against {}: mean {:.4}, mean log {:.4}", tag(&best_cfg), tag(&cfg), trace.mean_bayes_factor, trace.mean_log_bayes_factor);
            pairs.push(PairSummary {
                against: tag(&cfg),
                file,
                mean_bayes_factor: trace.mean_bayes_factor,
                mean_log_bayes_factor: trace.mean_log_bayes_factor,
            });
        }
    }
    let first_failed = if best.is_none() { cells.first().map(|c| (c.d, c.delta, c.beta)) } else { None };
    ctx.write_json(
        "select_summary.json",
        &SelectSummary {
            best: best.map(|b| format!("d{}_delta{}_beta{}", b.d, b.delta, b.beta)),
            failures,
            bayes_factors: pairs,
            note: "the likelihood constant uses the multivariate gamma ratio; compare across beta with care",
        },
    )?;
    if let Some((d, delta, beta)) = first_failed {
        // rerun the first cell to surface its typed error and time index
        let cfg = ModelConfig::new(series.dim(), d, delta, beta)?;
        evaluate_cell(&series, &cfg, &ctx.prior(&cfg)?)?;
    }
    Ok(())
}

fn metrics_for(ctx: &Context, series: &SeriesFrame, config: &ModelConfig, horizons: &[usize]) -> Result<Vec<FitMetrics>, TvvarError> {
    let prior = ctx.prior(config).map_err(|e| match e {
        CliError::Core(c) => c,
        CliError::Usage(u) => TvvarError::InvalidConfig(u),
    })?;
    let run: FilterRun = run_filter(series, config, &prior)?;
    metrics_from_run(&run, series, config, horizons, HorizonDiscount::Recursive)
}

pub fn metrics(ctx: &Context, data: &DataArgs, grid: &GridArgs, horizons: Option<&[usize]>) -> Result<(), CliError> {
    let series = ctx.load_series(data)?;
    let configs = ctx.cells(series.dim(), grid)?;
    let horizons: Vec<usize> = horizons.map(<[usize]>::to_vec).or_else(|| ctx.cfg.horizons.clone()).unwrap_or_else(|| vec![1, 2, 3]);
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(CliError::Usage("horizons must be positive".into()));
    }
    let results: Vec<Result<Vec<FitMetrics>, TvvarError>> =
        ctx.pool.install(|| configs.par_iter().map(|c| metrics_for(ctx, &series, c, &horizons)).collect());
    let labels = series.labels();
    let mut table = Table::new(
        ["d", "delta", "beta", "h"]
            .map(String::from)
            .into_iter()
            .chain(["msse", "mae", "me"].iter().flat_map(|k| labels.iter().map(move |l| format!("{k}_{l}")))),
    );
    let mut first_err = None;
    println!("{:>3} {:>6} {:>6} {:>3}  MSSE / MAE / ME", "d", "delta", "beta", "h");
    for (c, res) in configs.iter().zip(results) {
        match res {
            Ok(ms) => {
                for m in ms {
                    table.push(
                        [c.d().to_string(), num(c.delta()[0]), num(c.beta()), m.h.to_string()]
                            .into_iter()
                            .chain(nums(m.msse.iter().chain(m.mae.iter()).chain(m.me.iter()).copied()))
                            .collect(),
                    );
                    println!(
                        "{:>3} {:>6} {:>6} {:>3}  {} / {} / {}",
                        c.d(),
                        c.delta()[0],
                        c.beta(),
                        m.h,
                        fmt4(m.msse.iter()),
                        fmt4(m.mae.iter()),
                        fmt4(m.me.iter())
                    );
                }
            }
            Err(e) => {
                log::warn!("{} failed: {e}", tag(c));
                first_err.get_or_insert(e);
            }
        }
    }
    table.save(&ctx.path("forecast_metrics.csv"))?;
    match first_err {
        Some(e) if table.len() == 0 => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn backtest(ctx: &Context, args: &BacktestArgs) -> Result<(), CliError> {
    let series = ctx.load_series(&args.data)?;
    let configs = ctx.cells(series.dim(), &args.grid)?;
    let pf = &ctx.cfg.portfolio;
    let target = args.target.or(pf.target).unwrap_or(DEFAULT_TARGET);
    let strategies: Vec<Strategy> = match &args.strategies {
        Some(names) => names.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
        None => pf.strategies.clone().unwrap_or_else(|| Strategy::ALL.to_vec()),
    };
    if strategies.is_empty() {
        return Err(CliError::Usage("no strategies selected".into()));
    }
    if strategies.contains(&Strategy::Ewp) && series.dim() < 2 {
        return Err(CliError::Usage("the equal-weight strategy needs at least two series".into()));
    }
    let cumulation = if args.compound || pf.compound.unwrap_or(false) { Cumulation::Compound } else { Cumulation::Additive };
    let priors = configs.iter().map(|c| ctx.prior(c)).collect::<Result<Vec<_>, _>>()?;
    let reports: Vec<Result<BacktestReport, TvvarError>> = ctx.pool.install(|| {
        configs
            .par_iter()
            .zip(priors.par_iter())
            .map(|(c, pr)| run_backtest(&series, c, pr, target, &strategies, cumulation))
            .collect()
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut summary = Table::new(
        ["d", "delta", "beta"].map(String::from).into_iter().chain(strategies.iter().map(|s| s.name().to_string())),
    );
    println!("mean cumulative return (%), target {target}, {cumulation:?} cumulation");
    println!("{:>3} {:>6} {:>6}  {}", "d", "delta", "beta", strategies.iter().map(|s| format!("{:>9}", s.name())).collect::<String>());
    let single = configs.len() == 1;
    for (c, rep) in configs.iter().zip(&reports) {
        let vals: Vec<f64> = rep.paths.iter().map(|p| p.summary).collect();
        summary.push([c.d().to_string(), num(c.delta()[0]), num(c.beta())].into_iter().chain(nums(vals.iter().copied())).collect());
        println!("{:>3} {:>6} {:>6}  {}", c.d(), c.delta()[0], c.beta(), vals.iter().map(|v| format!("{v:>9.4}")).collect::<String>());
        for path in &rep.paths {
            if !path.flagged.is_empty() {
                log::warn!("{} {}: {} steps without a feasible allocation", tag(c), path.strategy.name(), path.flagged.len());
            }
        }
        write_paths(ctx, &series, rep, if single { String::new() } else { format!("_{}", tag(c)) })?;
    }
    summary.save(&ctx.path("portfolio_summary.csv"))?;
    ctx.write_json("backtest_summary.json", &reports.iter().map(BacktestMeta::from).collect::<Vec<_>>())?;
    Ok(())
}

#[derive(Serialize)]
struct BacktestMeta {
    first_trade: Option<usize>,
    target: f64,
    cumulation: Cumulation,
    flagged: Vec<(Strategy, Vec<usize>)>,
}

impl From<&BacktestReport> for BacktestMeta {
    fn from(r: &BacktestReport) -> Self {
        BacktestMeta {
            first_trade: r.t.first().copied(),
            target: r.target,
            cumulation: r.cumulation,
            flagged: r.paths.iter().map(|p| (p.strategy, p.flagged.clone())).collect(),
        }
    }
}

fn write_paths(ctx: &Context, series: &SeriesFrame, rep: &BacktestReport, suffix: String) -> Result<(), CliError> {
    let names: Vec<String> = rep.paths.iter().map(|p| p.strategy.name().to_string()).collect();
    let mut cum = Table::new(std::iter::once("t".to_string()).chain(names.iter().cloned()));
    let mut ret = Table::new(std::iter::once("t".to_string()).chain(names.iter().cloned()));
    for (i, t) in rep.t.iter().enumerate() {
        cum.push(std::iter::once(t.to_string()).chain(rep.paths.iter().map(|p| num(p.cumulative[i]))).collect());
        ret.push(std::iter::once(t.to_string()).chain(rep.paths.iter().map(|p| num(p.returns[i]))).collect());
    }
    cum.save(&ctx.path(&format!("cumulative_returns{suffix}.csv")))?;
    ret.save(&ctx.path(&format!("realized_returns{suffix}.csv")))?;
    for path in &rep.paths {
        let mut w = Table::new(std::iter::once("t".to_string()).chain(series.labels().iter().cloned()));
        for (t, a) in rep.t.iter().zip(&path.weights) {
            w.push(std::iter::once(t.to_string()).chain(nums(a.iter().copied())).collect());
        }
        w.save(&ctx.path(&format!("weights_{}{suffix}.csv", path.strategy.name().to_lowercase())))?;
    }
    Ok(())
}
