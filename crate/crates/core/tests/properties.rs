use cocontrast::data::{self, EmbeddingMatrix, SynthSpec};
use cocontrast::eval::{classification_metrics, clustering_metrics, make_split};
use cocontrast::hin::{build_metapath_graph, select_positives};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn labels_and_preds() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2usize..5, 6usize..60).prop_flat_map(|(k, n)| (prop::collection::vec(0..k, n), prop::collection::vec(0..k, n)))
}

fn relabel(xs: &[usize], perm: &[usize]) -> Vec<usize> {
    xs.iter().map(|&x| perm[x]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clustering_metrics_ignore_cluster_ids((labels, clusters) in labels_and_preds(), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..5).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let (nmi, ari) = clustering_metrics(&clusters, &labels).unwrap();
        let (nmi2, ari2) = clustering_metrics(&relabel(&clusters, &perm), &labels).unwrap();
        prop_assert!((nmi - nmi2).abs() < 1e-12 && (ari - ari2).abs() < 1e-12);
        prop_assert!((-1.0..=1.0 + 1e-12).contains(&ari) && (0.0..=1.0 + 1e-12).contains(&nmi));
    }

    #[test]
    fn classification_metrics_follow_consistent_relabeling((labels, preds) in labels_and_preds()) {
        let k = labels.iter().chain(&preds).max().unwrap() + 1;
        let scores = Array2::from_shape_fn((preds.len(), k), |(i, c)| if preds[i] == c { 0.7 } else { 0.3 / (k - 1) as f64 });
        let perm: Vec<usize> = (0..k).rev().collect();
        let permuted = Array2::from_shape_fn(scores.dim(), |(i, c)| scores[[i, perm[c]]]);
        let a = classification_metrics(&preds, &scores, &labels).unwrap();
        let b = classification_metrics(&relabel(&preds, &perm), &permuted, &relabel(&labels, &perm)).unwrap();
        prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12 && (a.2 - b.2).abs() < 1e-12);
    }

    #[test]
    fn embeddings_survive_save_and_load(rows in 1usize..12, cols in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = Array2::from_shape_simple_fn((rows, cols), || {
            let m: f64 = rng.random_range(-1.0..1.0);
            m * 10f64.powi(rng.random_range(-300..300))
        });
        let e = EmbeddingMatrix { values, view: "mp".into(), epoch: 3, config_hash: "abc".into() };
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("e.txt");
        data::save_embeddings(&path, &e).unwrap();
        prop_assert_eq!(data::load_embeddings(&path).unwrap(), e);
    }

    #[test]
    fn splits_are_disjoint_and_reproducible(per_class in 1usize..6, extra in 2usize..10, seed in any::<u64>()) {
        let labels: Vec<usize> = (0..3 * (per_class + extra)).map(|i| i % 3).collect();
        let s = make_split(&labels, per_class, 0, 0, seed).unwrap();
        prop_assert_eq!(s.train.len(), 3 * per_class);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        all.dedup();
        prop_assert_eq!(all.len(), s.train.len() + s.val.len() + s.test.len());
        prop_assert_eq!(s, make_split(&labels, per_class, 0, 0, seed).unwrap());
    }

    #[test]
    fn positives_are_linked_bounded_and_exclude_self(seed in any::<u64>(), t_pos in 1usize..8) {
        let spec = SynthSpec { per_class: 8, seed, ..SynthSpec::default() };
        let ds = data::generate_synthetic(&spec).unwrap();
        let mpgs: Vec<_> = ds.metapaths.iter().map(|m| build_metapath_graph(&ds.graph, m).unwrap()).collect();
        let sets = select_positives(&mpgs, t_pos).unwrap();
        for i in 0..sets.len() {
            let p = sets.positives(i);
            prop_assert!(p.len() <= t_pos && !p.contains(&i));
            prop_assert!(p.iter().all(|&j| mpgs.iter().any(|m| m.contains(i, j))));
            prop_assert_eq!(p.len() + sets.negatives(i).len(), sets.len() - 1);
        }
        for m in &mpgs {
            prop_assert!(m.adjacency().is_symmetric());
        }
    }

    #[test]
    fn synthetic_generation_is_pure(seed in any::<u64>()) {
        let spec = SynthSpec { per_class: 6, seed, ..SynthSpec::default() };
        let a = data::generate_synthetic(&spec).unwrap();
        let b = data::generate_synthetic(&spec).unwrap();
        prop_assert_eq!(&a.labels, &b.labels);
        prop_assert_eq!(a.graph.features(0), b.graph.features(0));
        for (x, y) in a.graph.relations().iter().zip(b.graph.relations()) {
            prop_assert_eq!(x.forward(), y.forward());
        }
    }
}

/// Independent uniform labelings share almost no information.
#[test]
fn random_labelings_score_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut nmi, mut ari) = (0.0, 0.0);
    for _ in 0..5 {
        let a: Vec<usize> = (0..1000).map(|_| rng.random_range(0..3)).collect();
        let b: Vec<usize> = (0..1000).map(|_| rng.random_range(0..3)).collect();
        let (n, r) = clustering_metrics(&a, &b).unwrap();
        nmi += n / 5.0;
        ari += r / 5.0;
    }
    assert!(nmi < 0.05 && ari.abs() < 0.05, "nmi {nmi} ari {ari}");
}
