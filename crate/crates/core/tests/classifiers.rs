use droidops::classifiers::{
    best_root_split, decode_model, encode_model, load_model, save_model, ClassifierConfig,
    ClassifierError, DecisionTreeParams, NbtParams, RandomForestParams, Trainer, TreeNode,
};
use droidops::{Dataset, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data(rows: &[(&[f64], Label)]) -> Dataset {
    Dataset::unnamed(
        rows.iter().map(|r| r.0.to_vec()).collect(),
        rows.iter().map(|r| r.1).collect(),
    )
    .unwrap()
}

fn random_data(rng: &mut ChaCha8Rng, n: usize, m: usize, levels: u32) -> Dataset {
    let vectors = (0..n)
        .map(|_| (0..m).map(|_| rng.gen_range(0..levels) as f64).collect())
        .collect();
    let labels = (0..n)
        .map(|_| {
            if rng.gen_bool(0.5) {
                Label::Malware
            } else {
                Label::Benign
            }
        })
        .collect();
    Dataset::unnamed(vectors, labels).unwrap()
}

fn entropy(a: f64, b: f64) -> f64 {
    let n = a + b;
    [a, b]
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| -(c / n) * (c / n).log2())
        .sum()
}

/// Exhaustive root split: every midpoint of distinct adjacent values on
/// every feature, best gain ratio, ties to the lowest feature then
/// threshold.
fn oracle_root(d: &Dataset, min_leaf: usize) -> Option<(usize, f64)> {
    let n = d.len() as f64;
    let mut cands = Vec::new();
    for f in 0..d.n_features() {
        let mut values: Vec<f64> = d.vectors().iter().map(|v| v[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let mut l = [0.0; 2];
            let mut r = [0.0; 2];
            for (v, y) in d.vectors().iter().zip(d.labels()) {
                let side = if v[f] <= t { &mut l } else { &mut r };
                side[y.index()] += 1.0;
            }
            let (nl, nr) = (l[0] + l[1], r[0] + r[1]);
            if nl < min_leaf as f64 || nr < min_leaf as f64 {
                continue;
            }
            let gain = entropy(l[0] + r[0], l[1] + r[1])
                - nl / n * entropy(l[0], l[1])
                - nr / n * entropy(r[0], r[1]);
            let si = entropy(nl, nr);
            if gain > 1e-12 && si > 0.0 {
                cands.push((f, t, gain / si));
            }
        }
    }
    let best = cands.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    cands
        .into_iter()
        .find(|c| c.2 >= best - 1e-12)
        .map(|c| (c.0, c.1))
}

#[test]
fn forced_midpoint_split() {
    let d = data(&[
        (&[0.0], Label::Benign),
        (&[0.0], Label::Benign),
        (&[1.0], Label::Malware),
        (&[1.0], Label::Malware),
    ]);
    let m = DecisionTreeParams::default().train(&d).unwrap();
    assert!(
        matches!(m.trees[0].nodes[0], TreeNode::Internal { feature: 0, threshold, .. } if threshold == 0.5)
    );
    assert_eq!(m.predict(&[0.2]).unwrap().label, Label::Benign);
    assert_eq!(m.predict(&[0.7]).unwrap().label, Label::Malware);
}

#[test]
fn root_split_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..300 {
        let (n, m) = (rng.gen_range(2..=8), rng.gen_range(1..=3));
        let d = random_data(&mut rng, n, m, 4);
        for min_leaf in [1, 2] {
            let expected = oracle_root(&d, min_leaf);
            let got = best_root_split(&d, min_leaf).map(|c| (c.feature, c.threshold));
            assert_eq!(got, expected, "case {case} min_leaf {min_leaf}");
            let tree = &DecisionTreeParams {
                min_leaf,
                max_depth: None,
            }
            .train(&d)
            .unwrap()
            .trees[0];
            match (&tree.nodes[0], expected) {
                (
                    TreeNode::Internal {
                        feature, threshold, ..
                    },
                    Some((f, t)),
                ) => assert_eq!((*feature, *threshold), (f, t)),
                (TreeNode::Leaf { .. }, None) => {}
                (node, e) => panic!("case {case}: root {node:?} but oracle {e:?}"),
            }
        }
    }
}

#[test]
fn forest_degenerates_to_tree() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let d = random_data(&mut rng, 30, 4, 6);
        let tree = DecisionTreeParams {
            min_leaf: 1,
            max_depth: None,
        }
        .train(&d)
        .unwrap();
        let forest = RandomForestParams {
            n_trees: 1,
            mtry: Some(4),
            min_leaf: 1,
            bootstrap: false,
            ..Default::default()
        }
        .train(&d)
        .unwrap();
        assert_eq!(forest.trees[0], tree.trees[0]);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..7.0)).collect();
            assert_eq!(
                forest.predict(&x).unwrap().label,
                tree.predict(&x).unwrap().label
            );
        }
    }
}

#[test]
fn forest_seed_controls_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = random_data(&mut rng, 60, 5, 10);
    let p = RandomForestParams {
        n_trees: 15,
        seed: 3,
        ..Default::default()
    };
    assert_eq!(
        encode_model(&p.train(&d).unwrap()),
        encode_model(&p.train(&d).unwrap())
    );
    let other = RandomForestParams {
        seed: 4,
        ..p.clone()
    }
    .train(&d)
    .unwrap();
    assert_ne!(other.trees, p.train(&d).unwrap().trees);
}

/// Hand-coded Gaussian naive Bayes on the rows of one leaf.
fn oracle_nb(rows: &[(Vec<f64>, Label)], x: &[f64]) -> f64 {
    let m = x.len();
    let mut stats = Vec::new();
    for class in Label::ALL {
        let members: Vec<&Vec<f64>> = rows.iter().filter(|r| r.1 == class).map(|r| &r.0).collect();
        let k = members.len() as f64;
        let means: Vec<f64> = (0..m)
            .map(|f| members.iter().map(|v| v[f]).sum::<f64>() / k)
            .collect();
        let vars: Vec<f64> = (0..m)
            .map(|f| {
                members
                    .iter()
                    .map(|v| (v[f] - means[f]).powi(2))
                    .sum::<f64>()
                    / k
            })
            .collect();
        stats.push((k, means, vars));
    }
    let largest = stats
        .iter()
        .flat_map(|s| s.2.iter().copied())
        .fold(0.0, f64::max);
    let floor = 1e-9 * largest.max(1.0);
    let n = rows.len() as f64;
    let mut joint = [0.0; 2];
    for (c, (k, means, vars)) in stats.iter().enumerate() {
        let mut log_p = ((k + 1.0) / (n + 2.0)).ln();
        for f in 0..m {
            let var = vars[f] + floor;
            log_p += -(x[f] - means[f]).powi(2) / (2.0 * var)
                - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
        }
        joint[c] = log_p;
    }
    1.0 / (1.0 + (joint[0] - joint[1]).exp())
}

#[test]
fn nb_leaves_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let n = 80;
        let vectors: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..10.0)).collect())
            .collect();
        let labels: Vec<Label> = vectors
            .iter()
            .map(|v| {
                if v[0] + rng.gen_range(-3.0..3.0) > 5.0 {
                    Label::Malware
                } else {
                    Label::Benign
                }
            })
            .collect();
        let d = Dataset::unnamed(vectors.clone(), labels.clone()).unwrap();
        let model = NbtParams {
            min_leaf_for_nb: 30,
            ..Default::default()
        }
        .train(&d)
        .unwrap();
        let tree = &model.trees[0];
        for _ in 0..40 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..10.0)).collect();
            let leaf = tree.leaf_index(&x);
            let rows: Vec<(Vec<f64>, Label)> = (0..n)
                .filter(|&i| tree.leaf_index(&vectors[i]) == leaf)
                .map(|i| (vectors[i].clone(), labels[i]))
                .collect();
            let score = model.predict(&x).unwrap().score;
            let mixed = rows.iter().any(|r| r.1 == Label::Benign)
                && rows.iter().any(|r| r.1 == Label::Malware);
            if mixed {
                let expected = oracle_nb(&rows, &x);
                assert!((score - expected).abs() < 1e-9, "{score} vs {expected}");
            } else {
                assert_eq!(
                    score,
                    if rows[0].1 == Label::Malware {
                        1.0
                    } else {
                        0.0
                    }
                );
            }
        }
    }
}

#[test]
fn predict_rejects_bad_input() {
    let d = data(&[(&[0.0, 1.0], Label::Benign), (&[1.0, 0.0], Label::Malware)]);
    let m = DecisionTreeParams::default().train(&d).unwrap();
    assert!(matches!(
        m.predict(&[0.0]),
        Err(ClassifierError::DimensionMismatch {
            expected: 2,
            got: 1
        })
    ));
    assert!(matches!(
        m.predict(&[f64::NAN, 0.0]),
        Err(ClassifierError::NonFinite)
    ));
}

#[test]
fn save_load_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let d = random_data(&mut rng, 120, 6, 20);
    let dir = tempfile::tempdir().unwrap();
    for config in [
        ClassifierConfig::DecisionTree(Default::default()),
        ClassifierConfig::RandomForest(RandomForestParams {
            n_trees: 25,
            seed: 8,
            ..Default::default()
        }),
        ClassifierConfig::NaiveBayesTree(NbtParams {
            min_leaf_for_nb: 40,
            ..Default::default()
        }),
    ] {
        let model = config.train(&d).unwrap();
        let path = dir.path().join(format!("{}.model", model.kind));
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..22.0)).collect();
            let (a, b) = (model.predict(&x).unwrap(), back.predict(&x).unwrap());
            assert_eq!(a.label, b.label);
            assert_eq!(a.score.to_bits(), b.score.to_bits());
        }
    }
}

#[test]
fn corrupt_model_detected() {
    let d = data(&[(&[0.0], Label::Benign), (&[1.0], Label::Malware)]);
    let bytes = encode_model(&DecisionTreeParams::default().train(&d).unwrap());
    assert!(matches!(
        decode_model(&bytes[..bytes.len() / 2]),
        Err(ClassifierError::CorruptModel(_))
    ));
    let mut flipped = bytes.clone();
    let last = flipped.len() - 3;
    flipped[last] ^= 1;
    assert!(matches!(
        decode_model(&flipped),
        Err(ClassifierError::CorruptModel(_))
    ));
}

#[test]
fn unsupported_classifier_name() {
    let err = "ft"
        .parse::<droidops::classifiers::ClassifierKind>()
        .unwrap_err();
    assert!(err.to_string().contains("ft"));
}
