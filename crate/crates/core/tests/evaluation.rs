mod common;

use mmhawkes::cascade::{Truncation, Veracity};
use mmhawkes::covariates::CovariateSchema;
use mmhawkes::eval::{
    compute_metrics, extract_features, fit_logistic_cv, sweep_early_detection, sweep_with_refit, DEFAULT_PENALTY_GRID,
};
use mmhawkes::inference::SamplerConfig;
use mmhawkes::mixture::{MixtureModel, MixtureSpec, TrainMode};
use mmhawkes::simulate::simulate_labeled;

fn spec() -> MixtureSpec {
    MixtureSpec {
        schema: CovariateSchema::from_names(&[], &["engagement"], &["depth"]).unwrap(),
        ..MixtureSpec::default()
    }
}

#[test]
fn sweep_cells_follow_the_grid() {
    let (f, t) = common::separation_processes();
    let sim = common::separation_sim();
    let train = simulate_labeled(&f, &t, &sim, 150, 1).unwrap();
    let test = simulate_labeled(&f, &t, &sim, 100, 2).unwrap();
    let model = MixtureModel::train(&train, &spec(), TrainMode::Map, &SamplerConfig::default()).unwrap();
    let table = sweep_early_detection(&model, &test, &[1.0, 48.0], &[5, 10_000]).unwrap();
    assert_eq!(table.cells.len(), 4);
    let full = table.full_auc.unwrap();
    assert_eq!(table.cell(Truncation::Time(48.0)).unwrap().auc, Some(full));
    let huge = table.cell(Truncation::Count(10_000)).unwrap();
    assert_eq!((huge.n_cascades, huge.auc), (0, None));
    let five = table.cell(Truncation::Count(5)).unwrap();
    assert_eq!(five.n_cascades, test.iter().filter(|c| c.retweets() >= 5).count());
    assert!(table.to_table().contains("5 retweets"));

    let refit = sweep_with_refit(&train, &test, &spec(), TrainMode::Map, &SamplerConfig::default(), &[6.0], &[]).unwrap();
    assert_eq!(refit.full_auc, table.full_auc);
    assert!(refit.cells[0].auc.unwrap() > 70.0);
}

#[test]
fn feature_baseline_beats_chance_on_separated_classes() {
    let (f, t) = common::separation_processes();
    let data = simulate_labeled(&f, &t, &common::separation_sim(), 200, 3).unwrap();
    let rows: Vec<Vec<f64>> = data.iter().map(|c| extract_features(c).to_vec()).collect();
    let labels: Vec<Veracity> = data.iter().map(|c| c.label().unwrap()).collect();
    let (model, cv) = fit_logistic_cv(&rows, &labels, &DEFAULT_PENALTY_GRID, 10, 4).unwrap();
    assert_eq!(cv.auc_by_penalty.len(), DEFAULT_PENALTY_GRID.len());
    assert!(cv.cv_auc > 60.0, "{cv:?}");
    let scored: Vec<(f64, Veracity)> = rows.iter().map(|r| model.predict(r)).zip(labels).collect();
    let report = compute_metrics(&scored, 0.5).unwrap();
    let c = report.confusion;
    assert_eq!(c.true_positive + c.false_positive + c.true_negative + c.false_negative, 400);
}
