use droidops::classifiers::{
    DecisionTreeParams, NbtParams, RandomForestParams, Trainer, Tree, TreeNode,
};
use droidops::corpus::{random_split, split_labels};
use droidops::evaluation::{metrics, stratified_folds, ConfusionMatrix};
use droidops::opcodes::OPCODE_COUNT;
use droidops::selection::{compute_class_means, rank_features};
use droidops::{Dataset, Label, LabeledHistogramSet, NormalizationMode, OpcodeHistogram};
use proptest::prelude::*;

const MODES: [NormalizationMode; 2] = [
    NormalizationMode::MeanRawCount,
    NormalizationMode::MeanRelativeFrequency,
];

fn label(b: bool) -> Label {
    if b {
        Label::Malware
    } else {
        Label::Benign
    }
}

/// Sparse histograms over a handful of opcodes, at least one app per class.
fn corpus() -> impl Strategy<Value = Vec<(Vec<(u8, u64)>, bool)>> {
    prop::collection::vec(
        (
            prop::collection::vec((any::<u8>(), 0u64..1000), 0..12),
            any::<bool>(),
        ),
        2..30,
    )
    .prop_map(|mut rows| {
        rows[0].1 = false;
        rows[1].1 = true;
        rows
    })
}

fn build(rows: &[(Vec<(u8, u64)>, bool)], scale: u64) -> LabeledHistogramSet {
    LabeledHistogramSet::from_pairs(rows.iter().enumerate().map(|(i, (pairs, m))| {
        let mut counts = [0u64; OPCODE_COUNT];
        for &(op, c) in pairs {
            counts[op as usize] += c * scale;
        }
        (
            OpcodeHistogram::from_counts(format!("app{i}"), counts),
            label(*m),
        )
    }))
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..4, 4usize..40).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..6, m), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(|(rows, labels)| {
                Dataset::unnamed(
                    rows.into_iter()
                        .map(|r| r.into_iter().map(f64::from).collect())
                        .collect(),
                    labels.into_iter().map(label).collect(),
                )
                .unwrap()
            })
    })
}

fn subtree_total(tree: &Tree, i: usize) -> f64 {
    match &tree.nodes[i] {
        TreeNode::Internal { left, right, .. } => {
            subtree_total(tree, *left) + subtree_total(tree, *right)
        }
        TreeNode::Leaf { counts, .. } => counts[0] + counts[1],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_counts_scales_raw_means(rows in corpus(), c in 2u64..50) {
        let base = build(&rows, 1);
        let scaled = build(&rows, c);
        let a = compute_class_means(&base, MODES[0]).unwrap();
        let b = compute_class_means(&scaled, MODES[0]).unwrap();
        for op in 0..OPCODE_COUNT {
            let expected = a.difference[op] * c as f64;
            prop_assert!((b.difference[op] - expected).abs() <= 1e-9 * expected.max(1.0));
        }
        let ra = compute_class_means(&base, MODES[1]).unwrap();
        let rb = compute_class_means(&scaled, MODES[1]).unwrap();
        prop_assert_eq!(ra.difference, rb.difference);
    }

    #[test]
    fn row_order_is_irrelevant(rows in corpus(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        for mode in MODES {
            let a = compute_class_means(&build(&rows, 1), mode).unwrap();
            let b = compute_class_means(&build(&shuffled, 1), mode).unwrap();
            prop_assert_eq!(a.difference, b.difference);
            prop_assert_eq!(rank_features(&a, 256).unwrap().ranked, rank_features(&b, 256).unwrap().ranked);
        }
    }

    #[test]
    fn top_n_nests(rows in corpus(), n in 1usize..256, extra in 0usize..100) {
        let p = compute_class_means(&build(&rows, 1), MODES[0]).unwrap();
        let small = rank_features(&p, n).unwrap();
        let big = rank_features(&p, n + extra).unwrap();
        prop_assert_eq!(&big.ranked[..small.len()], &small.ranked[..]);
        prop_assert!(big.ranked.windows(2).all(|w| w[0].score > w[1].score
            || (w[0].score == w[1].score && w[0].opcode < w[1].opcode)));
    }

    #[test]
    fn split_partitions_rows(extra in prop::collection::vec(any::<bool>(), 0..180),
                             fraction in 0.1f64..0.9, seed in any::<u64>()) {
        // ten of each class first, so no class ends up empty on either side
        let labels: Vec<Label> = (0..20).map(|i| i % 2 == 0).chain(extra).map(label).collect();
        for split in [split_labels(&labels, fraction, seed).unwrap(), random_split(labels.len(), fraction, seed).unwrap()] {
            let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            prop_assert!(split.train.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(split.test.windows(2).all(|w| w[0] < w[1]));
        }
        let split = split_labels(&labels, fraction, seed).unwrap();
        for class in Label::ALL {
            let n_c = labels.iter().filter(|&&l| l == class).count() as f64;
            let in_test = split.test.iter().filter(|&&i| labels[i] == class).count() as f64;
            prop_assert!((in_test - n_c * fraction).abs() <= 0.5 + 1e-9);
        }
        prop_assert_eq!(&split, &split_labels(&labels, fraction, seed).unwrap());
    }

    #[test]
    fn folds_are_balanced(n_benign in 2usize..60, n_malware in 2usize..60, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(n_benign >= k && n_malware >= k);
        let labels: Vec<Label> = [vec![Label::Benign; n_benign], vec![Label::Malware; n_malware]].concat();
        let folds = stratified_folds(&labels, k, seed).unwrap();
        prop_assert!(folds.iter().all(|&f| f < k));
        let sizes = |filter: &dyn Fn(usize) -> bool| -> Vec<usize> {
            (0..k).map(|f| (0..labels.len()).filter(|&i| folds[i] == f && filter(i)).count()).collect()
        };
        for s in [sizes(&|_| true), sizes(&|i| labels[i] == Label::Benign), sizes(&|i| labels[i] == Label::Malware)] {
            prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn trees_cover_training_rows(d in dataset(), min_leaf in 1usize..4) {
        let model = DecisionTreeParams { min_leaf, max_depth: None }.train(&d).unwrap();
        let tree = &model.trees[0];
        prop_assert_eq!(subtree_total(tree, 0), d.len() as f64);
        for (i, node) in tree.nodes.iter().enumerate() {
            match node {
                TreeNode::Internal { left, right, feature, threshold } => {
                    prop_assert!(subtree_total(tree, *left) >= min_leaf as f64);
                    prop_assert!(subtree_total(tree, *right) >= min_leaf as f64);
                    prop_assert!(*feature < d.n_features() && threshold.is_finite());
                }
                TreeNode::Leaf { counts, .. } => {
                    let reached = d.vectors().iter().filter(|x| tree.leaf_index(x) == i).count();
                    prop_assert_eq!(reached as f64, counts[0] + counts[1]);
                }
            }
        }
    }

    #[test]
    fn nb_posteriors_are_distributions(d in dataset(), probes in prop::collection::vec(prop::collection::vec(-5.0f64..10.0, 3), 10)) {
        let model = NbtParams { min_leaf_for_nb: 8, ..Default::default() }.train(&d).unwrap();
        for p in &probes {
            let x = &p[..d.n_features()];
            if let TreeNode::Leaf { naive_bayes: Some(nb), .. } = model.trees[0].leaf(x) {
                let post = nb.posterior(x);
                prop_assert!(post.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!((post[0] + post[1] - 1.0).abs() < 1e-12);
            }
            let s = model.predict(x).unwrap().score;
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn forest_score_is_vote_fraction(d in dataset(), n_trees in 1usize..12, seed in any::<u64>()) {
        let model = RandomForestParams { n_trees, seed, ..Default::default() }.train(&d).unwrap();
        for x in d.vectors() {
            let single: Vec<f64> = model.trees.iter().map(|t| match t.leaf(x) {
                TreeNode::Leaf { counts, .. } => counts[1] / (counts[0] + counts[1]),
                TreeNode::Internal { .. } => unreachable!(),
            }).collect();
            let votes = single.iter().filter(|&&s| s >= 0.5).count();
            let p = model.predict(x).unwrap();
            prop_assert_eq!(p.score, votes as f64 / n_trees as f64);
            prop_assert_eq!(p.label, Label::from_score(p.score));
        }
    }

    #[test]
    fn metric_identities(tp in 0u64..1000, fn_ in 0u64..1000, tn in 0u64..1000, fp in 0u64..1000) {
        let cm = ConfusionMatrix::new(tp, fn_, tn, fp);
        prop_assume!(cm.total() > 0);
        let m = metrics(&cm).unwrap();
        prop_assert!((m.accuracy_pct - 100.0 * (tp + tn) as f64 / cm.total() as f64).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&m.accuracy_pct));
        if let (Some(a), Some(b)) = (m.tpr, m.fnr) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        } else {
            prop_assert_eq!(tp + fn_, 0);
        }
        if let (Some(a), Some(b)) = (m.tnr, m.fpr) {
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        } else {
            prop_assert_eq!(tn + fp, 0);
        }
    }
}
