mod common;

use common::*;
use muce::grid::{order_categories, stability_intervals, StabilityInterval};
use muce::indices::{confidence_indices, summarize_observation};
use muce::muce::{compute_muce, Method};
use muce::predictor::predict_proba;
use muce::{
    compute_ice, fit_grid, ExplanationGrid, FeatureKind, FeatureValue, MuceConfig, Observation, Predictor, Result,
};
use proptest::prelude::*;
use rand::Rng;

struct Instance {
    data: muce::Dataset,
    grid: ExplanationGrid,
    x: Observation,
    model: PiecewiseModel,
    config: MuceConfig,
}

fn instance(seed: u64, max_features: usize) -> Instance {
    let mut rng = rng(seed);
    let width = rng.gen_range(2..=max_features);
    let schema = random_schema(&mut rng, width, &ALL_KINDS);
    let data = random_dataset(&mut rng, &schema, 30);
    let grid = fit_grid(&data, rng.gen_range(2..=40), rng.gen_range(0.01..=0.5), rng.gen_range(1..=5)).unwrap();
    let x = random_observation(&mut rng, &data);
    let coupled = rng.gen_bool(0.5);
    let model = PiecewiseModel::random(&mut rng, &data, coupled);
    let mut config = MuceConfig::new(2 * rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=2));
    config.restarts = rng.gen_range(0..=2);
    config.seed = rng.gen();
    Instance { data, grid, x, model, config }
}

/// Answers in chunks of three and refuses concurrent use.
struct Chunked<'a>(&'a PiecewiseModel);

impl Predictor for Chunked<'_> {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for chunk in batch.chunks(3) {
            out.extend(self.0.predict_proba(chunk)?);
        }
        Ok(out)
    }

    fn concurrent_safe(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        "chunked".into()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn grids_are_sorted_and_representable(seed in any::<u64>()) {
        let inst = instance(seed, 6);
        for (j, fg) in inst.grid.features().iter().enumerate() {
            match fg.kind {
                FeatureKind::Continuous | FeatureKind::Integer | FeatureKind::Ordinal => {
                    let (lo, hi) = inst.data.observed_range(j).unwrap();
                    let v: Vec<f64> = fg.values.iter().map(|v| v.as_f64().unwrap()).collect();
                    prop_assert!(v.windows(2).all(|w| w[0] < w[1]));
                    prop_assert!(v.iter().all(|&e| lo <= e && e <= hi));
                    prop_assert_eq!(fg.delta(), inst.grid.stability_fraction() * (hi - lo));
                    if fg.kind != FeatureKind::Continuous {
                        prop_assert!(fg.values.iter().all(|v| matches!(v, FeatureValue::Int(_))));
                    }
                }
                FeatureKind::Binary => prop_assert_eq!(&fg.values, &vec![FeatureValue::Int(0), FeatureValue::Int(1)]),
                FeatureKind::Categorical => {
                    let labels = &inst.grid.schema().feature(j).categories;
                    prop_assert_eq!(fg.values.len(), labels.len());
                }
            }
        }
    }

    #[test]
    fn intervals_stay_in_the_observed_hull(seed in any::<u64>()) {
        let inst = instance(seed, 6);
        let intervals = stability_intervals(&inst.grid, &inst.x).unwrap();
        for (j, iv) in intervals.iter().enumerate() {
            prop_assert!(iv.contains(inst.x.get(j)));
            match iv {
                StabilityInterval::Continuous { lower, upper } => {
                    let (lo, hi) = inst.data.observed_range(j).unwrap();
                    prop_assert!(lo <= *lower && *upper <= hi);
                }
                StabilityInterval::Discrete { lower, upper } => {
                    let (lo, hi) = inst.data.observed_range(j).unwrap();
                    prop_assert!(lo <= *lower as f64 && *upper as f64 <= hi);
                }
                StabilityInterval::Binary => {}
                StabilityInterval::Categories { labels } => {
                    let card = inst.grid.schema().feature(j).categories.len();
                    prop_assert!(labels.len() >= 3.min(card));
                }
            }
        }
    }

    #[test]
    fn category_order_is_a_permutation(seed in any::<u64>()) {
        let inst = instance(seed, 6);
        for (j, spec) in inst.grid.schema().features().iter().enumerate() {
            if spec.kind != FeatureKind::Categorical {
                continue;
            }
            let ranked = order_categories(&inst.data, &spec.name, &inst.x, inst.grid.k_categories()).unwrap();
            let mut sorted = ranked.labels.clone();
            sorted.sort();
            let mut expected = spec.categories.clone();
            expected.sort();
            prop_assert_eq!(sorted, expected, "feature {}", j);
        }
    }

    #[test]
    fn full_ice_evaluates_the_observation(seed in any::<u64>()) {
        let inst = instance(seed, 4);
        let p = predict_proba(&inst.model, std::slice::from_ref(&inst.x)).unwrap()[0];
        for spec in inst.grid.schema().features() {
            let ice = compute_ice(&inst.grid, &inst.x, &spec.name, &inst.model).unwrap();
            prop_assert_eq!(ice.observation_prediction, p);
            prop_assert!(ice.points.iter().any(|pt| pt.value == ice.observation_value));
        }
    }

    #[test]
    fn muce_curves_are_well_formed(seed in any::<u64>()) {
        let inst = instance(seed, 4);
        let p = predict_proba(&inst.model, std::slice::from_ref(&inst.x)).unwrap()[0];
        let mut audit = Audit::default();
        for j in 0..inst.grid.schema().len() {
            let r = audit.run(&inst.grid, &inst.x, j, &inst.model, &inst.config);
            prop_assert_eq!(r.max_curve.points.len(), r.min_curve.points.len());
            if r.ordered {
                let h = inst.config.half() as i64;
                let idx: Vec<i64> = r.max_curve.points.iter().map(|p| p.index).collect();
                prop_assert_eq!(idx, (-h..=h).collect::<Vec<_>>());
                let at0 = (r.max_curve.at(0).unwrap().prediction, r.min_curve.at(0).unwrap().prediction);
                prop_assert!(at0.0 >= p && p >= at0.1);
                let ci = confidence_indices(&r).unwrap();
                let d0 = at0.0 - at0.1;
                let n = inst.config.n as f64;
                let lhs = n * ci.uncertainty;
                let rhs = (n / 2.0) * (ci.uncertainty_plus + ci.uncertainty_minus) - d0;
                prop_assert!((lhs - rhs).abs() <= 1e-12);
                prop_assert!(!ci.negative_gaps.contains(&0));
            }
            let ci = confidence_indices(&r).unwrap();
            prop_assert!((0.0..=1.0).contains(&ci.stability));
            for m in [Method::Max, Method::Min] {
                let e = r.extremal(m);
                prop_assert!(r.max_curve.points.iter().chain(&r.min_curve.points).any(|pt| pt.observation == e.observation));
            }
        }
        prop_assert_eq!(audit.outside, 0);
        prop_assert_eq!(audit.over_budget, 0);
        prop_assert_eq!(audit.variation_mismatch, 0);
    }

    #[test]
    fn indices_ignore_batching_and_scheduling(seed in any::<u64>()) {
        let inst = instance(seed, 5);
        let direct = summarize_observation(&inst.grid, &inst.x, &inst.model, &inst.config).unwrap();
        let chunked = summarize_observation(&inst.grid, &inst.x, &Chunked(&inst.model), &inst.config).unwrap();
        prop_assert_eq!(&direct.indices, &chunked.indices);
        prop_assert_eq!(&direct.results, &chunked.results);
    }

    #[test]
    fn grid_json_round_trips(seed in any::<u64>()) {
        let inst = instance(seed, 6);
        let back = ExplanationGrid::from_json(&inst.grid.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &inst.grid);
        prop_assert_eq!(back.to_json().unwrap(), inst.grid.to_json().unwrap());
    }

    #[test]
    fn grids_ignore_row_order(seed in any::<u64>()) {
        let inst = instance(seed, 5);
        let mut rows = inst.data.rows().to_vec();
        rows.reverse();
        let shuffled = muce::Dataset::new(inst.data.schema().clone(), rows, None).unwrap();
        let a = fit_grid(&inst.data, inst.grid.n_grid(), inst.grid.stability_fraction(), inst.grid.k_categories()).unwrap();
        let b = fit_grid(&shuffled, inst.grid.n_grid(), inst.grid.stability_fraction(), inst.grid.k_categories()).unwrap();
        prop_assert_eq!(a.features(), b.features());
    }

    #[test]
    fn constant_model_gives_unit_stability(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let inst = instance(seed, 8);
        let model = muce::predictor::ConstantPredictor(p);
        for j in 0..inst.grid.schema().len() {
            let name = inst.grid.schema().feature(j).name.clone();
            let r = compute_muce(&inst.grid, &inst.x, &name, &model, &inst.config).unwrap();
            let ci = confidence_indices(&r).unwrap();
            prop_assert_eq!((ci.stability, ci.uncertainty, ci.uncertainty_plus, ci.uncertainty_minus), (1.0, 0.0, 0.0, 0.0));
            prop_assert_eq!(&r.extremal_max.observation, &inst.x);
        }
    }
}

