use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use mmhawkes::cascade::{balanced_sample, ingest, preprocess, write_jsonl, Cascade, Truncation, Veracity};
use mmhawkes::eval::{
    compute_metrics, extract_features, fit_logistic_cv, sweep_early_detection, sweep_with_refit, MetricsReport,
    DEFAULT_PENALTY_GRID,
};
use mmhawkes::gof::{gof_report, posterior_predictive_check, GofReport, PpcReport, ThinningRate, TEST_NAMES};
use mmhawkes::mixture::{write_scores, MixtureModel, TrainMode};
use mmhawkes::simulate::{simulate_labeled, CovariateGenerator, SimConfig, SyntheticCovariates};
use mmhawkes::{Error, HawkesProcess, PosteriorFit};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{Cli, Command, EvalArgs, FitArgs, GofArgs, ModeArg, ScoreArgs, SimulateArgs, SweepArgs};

pub fn run(cli: Cli) -> Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.sampler.seed = config.seed;
    match cli.command {
        Command::Validate { input } => validate(&input),
        Command::Fit(a) => fit(a, config),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a, config),
        Command::Simulate(a) => simulate(a, config),
        Command::Gof(a) => gof(a, config),
        Command::Sweep(a) => sweep(a, config),
    }
}

fn read_cascades(path: &Path) -> Result<Vec<Cascade>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(ingest(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?)
}

fn load_model(dir: &Path) -> Result<MixtureModel> {
    MixtureModel::load(dir).with_context(|| format!("loading model from {}", dir.display()))
}

fn labeled(cascades: &[Cascade]) -> Result<Vec<&Cascade>> {
    let out: Vec<&Cascade> = cascades.iter().filter(|c| c.label().is_some()).collect();
    if out.is_empty() {
        return Err(Error::Insufficient("no labeled cascades".into()).into());
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn validate(input: &Path) -> Result<()> {
    let cascades = read_cascades(input)?;
    let count = |l: Option<Veracity>| cascades.iter().filter(|c| c.label() == l).count();
    let events: usize = cascades.iter().map(Cascade::len).sum();
    println!(
        "{} cascades ({} false, {} true, {} unlabeled), {events} events",
        cascades.len(),
        count(Some(Veracity::False)),
        count(Some(Veracity::True)),
        count(None)
    );
    Ok(())
}

fn fit(a: FitArgs, mut config: RunConfig) -> Result<()> {
    if let Some(v) = a.chains {
        config.sampler.chains = v;
    }
    if let Some(v) = a.warmup {
        config.sampler.warmup = v;
    }
    if let Some(v) = a.samples {
        config.sampler.samples_per_chain = v;
    }
    if let Some(m) = a.mode {
        config.mode = match m {
            ModeArg::Mcmc => TrainMode::Mcmc,
            ModeArg::Map => TrainMode::Map,
        };
    }
    config.per_class = a.per_class.or(config.per_class);
    config.min_size = a.min_size.unwrap_or(config.min_size);
    config.sampler.validate()?;

    let mut train = preprocess(read_cascades(&a.train)?, config.min_size, true);
    if let Some(n) = config.per_class {
        let (f, t) = balanced_sample(&train, n, config.seed)?;
        train = f.into_iter().chain(t).collect();
    }
    let model = MixtureModel::train(&train, &config.model, config.mode, &config.sampler)?;
    model.save(&a.out)?;
    std::fs::write(a.out.join("config.toml"), toml::to_string(&config)?)?;
    for fit in [&model.fit_false, &model.fit_true] {
        print_fit(fit);
    }
    Ok(())
}

fn print_fit(fit: &PosteriorFit) {
    println!(
        "{:?} component: {} draws, {} divergences",
        fit.component,
        fit.num_draws(),
        fit.divergences
    );
    let names = fit.layout.names();
    for (j, name) in names.iter().enumerate() {
        let diag = fit.diagnostics.iter().find(|d| &d.name == name);
        let fmt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
        println!(
            "  {name:<24} map {:>9.4}  R-hat {:>7}  ESS {:>7}",
            fit.map_point[j],
            fmt(diag.and_then(|d| d.rhat), 4),
            fmt(diag.and_then(|d| d.ess), 0)
        );
    }
    for w in &fit.warnings {
        println!("  warning: {w}");
    }
}

fn score(a: ScoreArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let cascades = read_cascades(&a.input)?;
    let by = match (a.truncate_time, a.truncate_count) {
        (Some(t), _) => Some(Truncation::Time(t)),
        (None, Some(n)) => Some(Truncation::Count(n)),
        (None, None) => None,
    };
    let scores = cascades
        .iter()
        .map(|c| match by {
            Some(b) => model.score_partial(c, b),
            None => model.score(c),
        })
        .collect::<mmhawkes::Result<Vec<_>>>()?;
    let mut out = BufWriter::new(File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?);
    write_scores(&mut out, &scores)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    mixture: MetricsReport,
    baseline: Option<BaselineReport>,
}

#[derive(Serialize)]
struct BaselineReport {
    penalty: f64,
    cv_auc: f64,
    test: MetricsReport,
}

fn eval(a: EvalArgs, config: RunConfig) -> Result<()> {
    let threshold = a.threshold.unwrap_or(config.threshold);
    let model = load_model(&a.model)?;
    let cascades = read_cascades(&a.input)?;
    let test = labeled(&cascades)?;
    let scored = test
        .iter()
        .map(|c| Ok((model.score(c)?.p_false, c.label().expect("labeled"))))
        .collect::<mmhawkes::Result<Vec<_>>>()?;
    let mixture = compute_metrics(&scored, threshold)?;
    println!("Mixture model\n{}", mixture.to_table());

    let baseline = match &a.baseline_train {
        None => None,
        Some(path) => {
            let train_all = read_cascades(path)?;
            let train = labeled(&train_all)?;
            let rows: Vec<Vec<f64>> = train.iter().map(|c| extract_features(c).to_vec()).collect();
            let labels: Vec<Veracity> = train.iter().map(|c| c.label().expect("labeled")).collect();
            let (logit, cv) = fit_logistic_cv(&rows, &labels, &DEFAULT_PENALTY_GRID, 10, config.seed)?;
            let scored: Vec<(f64, Veracity)> = test
                .iter()
                .map(|c| (logit.predict(&extract_features(c).to_vec()), c.label().expect("labeled")))
                .collect();
            let report = compute_metrics(&scored, threshold)?;
            println!(
                "Logistic baseline (penalty {}, cross-validated AUC {:.2})\n{}",
                cv.chosen,
                cv.cv_auc,
                report.to_table()
            );
            Some(BaselineReport {
                penalty: cv.chosen,
                cv_auc: cv.cv_auc,
                test: report,
            })
        }
    };
    if let Some(path) = &a.json {
        write_json(path, &EvalReport { mixture, baseline })?;
    }
    Ok(())
}

/// Process definitions accepted by `simulate --processes`.
#[derive(Deserialize)]
struct ProcessPair {
    #[serde(rename = "false")]
    false_process: HawkesProcess,
    #[serde(rename = "true")]
    true_process: HawkesProcess,
}

fn map_process(model: &MixtureModel, fit: &PosteriorFit) -> HawkesProcess {
    HawkesProcess {
        params: fit.map_params(),
        schema: model.schema.clone(),
        standardizer: model.standardizer.clone(),
    }
}

fn simulate(a: SimulateArgs, config: RunConfig) -> Result<()> {
    let (f, t) = match (&a.model, &a.processes) {
        (Some(dir), _) => {
            let model = load_model(dir)?;
            (map_process(&model, &model.fit_false), map_process(&model, &model.fit_true))
        }
        (None, Some(path)) => {
            let pair: ProcessPair = serde_json::from_slice(&std::fs::read(path)?)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            (pair.false_process, pair.true_process)
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let covariates = match &a.covariates_from {
        Some(path) => CovariateGenerator::empirical(&read_cascades(path)?)?,
        None => CovariateGenerator::Synthetic(SyntheticCovariates::default()),
    };
    let sim = SimConfig {
        horizon: a.horizon.unwrap_or(config.horizon),
        covariates,
        max_events: a.max_events.unwrap_or(config.max_events),
    };
    let cascades = simulate_labeled(&f, &t, &sim, a.n, config.seed)?;
    let mut out = BufWriter::new(File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?);
    write_jsonl(&mut out, &cascades)?;
    out.flush()?;
    println!("wrote {} cascades to {}", cascades.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct GofOutput {
    level: f64,
    components: Vec<ComponentGof>,
}

#[derive(Serialize)]
struct ComponentGof {
    component: Veracity,
    report: GofReport,
    ppc: Option<PpcReport>,
}

fn gof(a: GofArgs, config: RunConfig) -> Result<()> {
    let level = a.level.unwrap_or(config.level);
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0, 1), got {level}")).into());
    }
    let model = load_model(&a.model)?;
    let cascades = read_cascades(&a.input)?;
    let mut components = Vec::new();
    println!("{:<10} {:<18} {:>9} {:>12}", "component", "test", "computed", format!("p > {level}"));
    for (k, fit) in [&model.fit_false, &model.fit_true].into_iter().enumerate() {
        let own: Vec<Cascade> = cascades
            .iter()
            .filter(|c| c.label() == Some(fit.component))
            .cloned()
            .collect();
        if own.is_empty() {
            continue;
        }
        let process = map_process(&model, fit);
        let report = gof_report(&process, &own, ThinningRate::Midrange, mmhawkes::rng::derive_seed(config.seed, k as u64))?;
        for name in TEST_NAMES {
            let computed = report.test(name).map_or(0, |s| s.computed);
            let pass = report.rejection_rate(name, level).map_or("-".to_string(), |r| format!("{:.3}", 1.0 - r));
            println!("{:<10} {name:<18} {computed:>9} {pass:>12}", format!("{:?}", fit.component));
        }
        let ppc = match a.ppc {
            None => None,
            Some(n) => {
                let processes: Vec<HawkesProcess> = fit
                    .draws()
                    .map(|d| HawkesProcess {
                        params: fit.layout.unpack(d, fit.component),
                        schema: model.schema.clone(),
                        standardizer: model.standardizer.clone(),
                    })
                    .collect();
                let r = posterior_predictive_check(
                    &processes,
                    &own,
                    n,
                    config.max_events,
                    mmhawkes::rng::derive_seed(config.seed, 10 + k as u64),
                )?;
                for s in &r.statistics {
                    println!(
                        "{:<10} ppc {:<14} observed {:>9.3} simulated {:>9.3} KS p {:.3}",
                        format!("{:?}", fit.component),
                        s.statistic,
                        s.observed_mean,
                        s.simulated_mean,
                        s.ks.p_value
                    );
                }
                Some(r)
            }
        };
        components.push(ComponentGof {
            component: fit.component,
            report,
            ppc,
        });
    }
    if components.is_empty() {
        return Err(Error::Insufficient("no labeled cascades to test".into()).into());
    }
    if let Some(path) = &a.json {
        write_json(path, &GofOutput { level, components })?;
    }
    Ok(())
}

fn sweep(a: SweepArgs, config: RunConfig) -> Result<()> {
    let times = a.times.unwrap_or(config.times.clone());
    let counts = a.counts.unwrap_or(config.counts.clone());
    let test = read_cascades(&a.input)?;
    let table = if a.refit {
        let path = a.train.as_ref().expect("clap enforces --train with --refit");
        let train = preprocess(read_cascades(path)?, config.min_size, true);
        sweep_with_refit(&train, &test, &config.model, config.mode, &config.sampler, &times, &counts)?
    } else {
        let dir = a.model.as_ref().expect("clap enforces --model without --refit");
        sweep_early_detection(&load_model(dir)?, &test, &times, &counts)?
    };
    print!("{}", table.to_table());
    if let Some(path) = &a.json {
        write_json(path, &table)?;
    }
    Ok(())
}
