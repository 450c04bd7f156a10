use droidops::classifiers::{
    ClassifierConfig, ClassifierKind, DecisionTreeParams, RandomForestParams, Trainer,
};
use droidops::evaluation::{
    confusion, cross_validate, feature_sweep, generate_synthetic_corpus, holdout, metrics,
    stratified_folds, write_folds_csv, write_sweep_csv, ConfusionMatrix, EvaluationError, Grid,
    RankingConfig, SweepConfig, PLANTED_PER_CLASS,
};
use droidops::selection::{class_means_of, compute_class_means, rank_features};
use droidops::{Dataset, Label, NormalizationMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn close(a: Option<f64>, b: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() < 1e-12)
}

#[test]
fn metric_examples() {
    let m = metrics(&ConfusionMatrix::new(40, 10, 45, 5)).unwrap();
    assert_eq!(m.accuracy_pct, 85.0);
    assert!(close(m.tpr, 0.8) && close(m.fnr, 0.2) && close(m.tnr, 0.9) && close(m.fpr, 0.1));

    let perfect = metrics(&ConfusionMatrix::new(7, 0, 3, 0)).unwrap();
    assert_eq!(
        (perfect.accuracy_pct, perfect.tpr, perfect.fpr),
        (100.0, Some(1.0), Some(0.0))
    );

    let no_benign = metrics(&ConfusionMatrix::new(5, 5, 0, 0)).unwrap();
    assert_eq!((no_benign.tnr, no_benign.fpr), (None, None));
    assert!(matches!(
        metrics(&ConfusionMatrix::default()),
        Err(EvaluationError::EmptyMatrix)
    ));
}

#[test]
fn confusion_matches_tally() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vectors: Vec<Vec<f64>> = (0..200)
        .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
        .collect();
    let labels: Vec<Label> = (0..200)
        .map(|_| {
            if rng.gen_bool(0.5) {
                Label::Malware
            } else {
                Label::Benign
            }
        })
        .collect();
    let d = Dataset::unnamed(vectors.clone(), labels.clone()).unwrap();
    let model = DecisionTreeParams {
        min_leaf: 10,
        max_depth: Some(3),
    }
    .train(&d)
    .unwrap();
    let cm = confusion(&model, &d).unwrap();
    let mut tally = [0u64; 4];
    for (x, y) in vectors.iter().zip(&labels) {
        let p = model.predict(x).unwrap().label;
        let slot = match (y, p) {
            (Label::Malware, Label::Malware) => 0,
            (Label::Malware, Label::Benign) => 1,
            (Label::Benign, Label::Benign) => 2,
            (Label::Benign, Label::Malware) => 3,
        };
        tally[slot] += 1;
    }
    assert_eq!([cm.tp, cm.fn_, cm.tn, cm.fp], tally);
    assert_eq!(cm.total(), 200);
}

#[test]
fn constant_malware_predictor() {
    let d = Dataset::unnamed(
        vec![vec![0.0]; 4],
        vec![Label::Malware, Label::Malware, Label::Benign, Label::Benign],
    )
    .unwrap();
    let train = Dataset::unnamed(vec![vec![0.0]; 2], vec![Label::Malware, Label::Malware]).unwrap();
    let model = DecisionTreeParams::default().train(&train).unwrap();
    let m = metrics(&confusion(&model, &d).unwrap()).unwrap();
    assert_eq!((m.tpr, m.fpr), (Some(1.0), Some(1.0)));
}

#[test]
fn cross_validation_shape() {
    let corpus = generate_synthetic_corpus(50, 50, 0.7, 1).unwrap();
    let dt = ClassifierConfig::DecisionTree(Default::default());
    let cv = cross_validate(&corpus.set, &dt, &RankingConfig::default(), 10, 5).unwrap();
    assert_eq!(cv.folds.len(), 10);
    assert!(cv.folds.iter().all(|f| f.n_test == 10 && f.n_train == 90));
    assert_eq!(cv.confusion.total(), 100);
    let mut sum = ConfusionMatrix::default();
    cv.folds.iter().for_each(|f| sum += f.confusion);
    assert_eq!(sum, cv.confusion);

    let again = cross_validate(&corpus.set, &dt, &RankingConfig::default(), 10, 5).unwrap();
    assert_eq!(cv, again);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_folds_csv(&mut a, &cv).unwrap();
    write_folds_csv(&mut b, &again).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fold_rankings_use_training_rows_only() {
    let corpus = generate_synthetic_corpus(30, 30, 0.5, 2).unwrap();
    let set = &corpus.set;
    let ranking = RankingConfig {
        n_features: 15,
        ..Default::default()
    };
    let cv = cross_validate(
        set,
        &ClassifierConfig::DecisionTree(Default::default()),
        &ranking,
        5,
        9,
    )
    .unwrap();
    let fold_of = stratified_folds(&set.labels(), 5, 9).unwrap();
    let everything = rank_features(&compute_class_means(set, ranking.mode).unwrap(), 15)
        .unwrap()
        .opcodes();
    let mut differs = false;
    for f in &cv.folds {
        let train: Vec<usize> = (0..set.len()).filter(|&i| fold_of[i] != f.fold).collect();
        let expected =
            rank_features(&class_means_of(set, &train, ranking.mode).unwrap(), 15).unwrap();
        assert_eq!(f.ranking, expected.opcodes());
        differs |= f.ranking != everything;
    }
    assert!(
        differs,
        "no fold ranking differs from the whole-set ranking"
    );

    let faithful = RankingConfig {
        paper_faithful: true,
        ..ranking
    };
    let cv = cross_validate(
        set,
        &ClassifierConfig::DecisionTree(Default::default()),
        &faithful,
        5,
        9,
    )
    .unwrap();
    assert!(cv.folds.iter().all(|f| f.ranking == everything));
}

#[test]
fn separable_corpus_is_learned() {
    let corpus = generate_synthetic_corpus(100, 100, 1.0, 3).unwrap();
    let cv = cross_validate(
        &corpus.set,
        &ClassifierConfig::DecisionTree(Default::default()),
        &RankingConfig::default(),
        10,
        0,
    )
    .unwrap();
    assert!(
        cv.metrics.accuracy_pct >= 95.0,
        "{}",
        cv.metrics.accuracy_pct
    );
}

#[test]
fn too_few_instances_for_k() {
    let corpus = generate_synthetic_corpus(20, 4, 0.5, 0).unwrap();
    let err = cross_validate(
        &corpus.set,
        &ClassifierConfig::DecisionTree(Default::default()),
        &RankingConfig::default(),
        5,
        0,
    )
    .unwrap_err();
    assert!(matches!(
        err,
        EvaluationError::TooFewInstances {
            label: Label::Malware,
            found: 4,
            k: 5
        }
    ));
}

#[test]
fn holdout_split_sizes() {
    let corpus = generate_synthetic_corpus(40, 60, 0.7, 4).unwrap();
    let dt = ClassifierConfig::DecisionTree(Default::default());
    let r = holdout(&corpus.set, &dt, &RankingConfig::default(), 0.2, 1, true).unwrap();
    assert_eq!(r.split.test.len(), 20);
    assert_eq!(r.confusion.total(), 20);
    assert_eq!(r.confusion.malware(), 12);
    let plain = holdout(&corpus.set, &dt, &RankingConfig::default(), 0.2, 1, false).unwrap();
    assert_eq!(plain.split.test.len(), 20);
}

fn small_forest() -> ClassifierConfig {
    ClassifierConfig::RandomForest(RandomForestParams {
        n_trees: 15,
        seed: 1,
        ..Default::default()
    })
}

#[test]
fn sweep_rows() {
    let corpus = generate_synthetic_corpus(60, 60, 0.7, 5).unwrap();
    let config = SweepConfig {
        classifiers: vec![
            ClassifierConfig::DecisionTree(Default::default()),
            small_forest(),
            ClassifierConfig::default_for(ClassifierKind::NaiveBayesTree),
        ],
        seed: 2,
        ..Default::default()
    };
    let report = feature_sweep(&corpus.set, &config).unwrap();
    assert_eq!(report.rows.len(), 30);
    assert_eq!(report.failed(), 0);
    let keys: Vec<(ClassifierKind, usize)> = report
        .rows
        .iter()
        .map(|r| (r.classifier, r.n_features))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(keys, sorted);

    let again = feature_sweep(&corpus.set, &config).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_sweep_csv(&mut a, &report, false).unwrap();
    write_sweep_csv(&mut b, &again, false).unwrap();
    assert_eq!(a, b);

    let rf_only = SweepConfig {
        classifiers: vec![small_forest()],
        ..config.clone()
    };
    assert_eq!(feature_sweep(&corpus.set, &rf_only).unwrap().rows.len(), 10);
    let single = SweepConfig {
        grid: Grid::new(20, 20, 20).unwrap(),
        ..rf_only
    };
    assert_eq!(feature_sweep(&corpus.set, &single).unwrap().rows.len(), 1);
}

#[test]
fn failing_cells_are_reported() {
    let corpus = generate_synthetic_corpus(30, 30, 0.7, 6).unwrap();
    // mtry 30 is out of range for n = 20 only
    let rf = ClassifierConfig::RandomForest(RandomForestParams {
        n_trees: 5,
        mtry: Some(30),
        ..Default::default()
    });
    let config = SweepConfig {
        classifiers: vec![rf],
        grid: Grid::new(20, 40, 10).unwrap(),
        ..Default::default()
    };
    let report = feature_sweep(&corpus.set, &config).unwrap();
    assert_eq!(report.failed(), 1);
    assert!(report.rows[0].outcome.is_err());
    let mut csv = Vec::new();
    write_sweep_csv(&mut csv, &report, false).unwrap();
    assert!(String::from_utf8(csv).unwrap().contains("error: "));
}

#[test]
fn separated_corpus_ranks_planted_opcodes() {
    let corpus = generate_synthetic_corpus(200, 200, 1.0, 7).unwrap();
    assert_eq!(corpus.discriminative().len(), 2 * PLANTED_PER_CLASS);
    let profile = compute_class_means(&corpus.set, NormalizationMode::MeanRawCount).unwrap();
    let top = rank_features(&profile, 10).unwrap().opcodes();
    let planted = corpus.discriminative();
    assert!(
        top.iter().all(|op| planted.contains(op)),
        "{top:?} vs {planted:?}"
    );
}

#[test]
fn null_corpus_difference_shrinks_with_size() {
    let max_d = |n: usize| {
        let mut total = 0.0;
        for seed in 0..3 {
            let corpus = generate_synthetic_corpus(n, n, 0.0, seed).unwrap();
            let p =
                compute_class_means(&corpus.set, NormalizationMode::MeanRelativeFrequency).unwrap();
            total += p.difference.iter().copied().fold(0.0, f64::max);
        }
        total / 3.0
    };
    let (small, medium, large) = (max_d(10), max_d(40), max_d(160));
    assert!(small > medium && medium > large, "{small} {medium} {large}");
}
