use std::path::Path;

use ndarray::Array2;
use proptest::prelude::*;

use meed::data::{Dataset, IdxImages, IdxLabels};
use meed::explainer::{fuse_prior, PriorMethod, PriorScores};
use meed::metrics::{mask_cosine, MetricsReport};
use meed::sampler::{relaxed_topk, topk_indices, GumbelNoise};
use meed::trainer::{Checkpoint, TrainConfig, Trainer};
use meed::types::{ScoreVector, SelectionSet};

fn simplex(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 2..max_len).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

proptest! {
    #[test]
    fn relaxed_mask_is_bounded_by_k(
        z in simplex(12),
        k_frac in 0.0f64..1.0,
        tau in 0.01f64..5.0,
        u in prop::collection::vec(0.0f64..1.0, 144),
    ) {
        let d = z.len();
        let k = 1 + ((d - 1) as f64 * k_frac) as usize;
        let u = Array2::from_shape_fn((d, k), |(i, j)| u[i * 12 + j]);
        let v = relaxed_topk(&ScoreVector::new(z).unwrap(), k, tau, &GumbelNoise::from_uniform(&u)).unwrap();
        prop_assert!(v.v.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!(v.v.iter().sum::<f64>() <= k as f64 + 1e-9);
    }

    #[test]
    fn hard_topk_keeps_the_largest(z in prop::collection::vec(-5.0f64..5.0, 1..20), k_frac in 0.0f64..1.0) {
        let k = 1 + ((z.len() - 1) as f64 * k_frac) as usize;
        let s = topk_indices(&z, k).unwrap();
        prop_assert_eq!(s.k(), k);
        let worst_in = s.indices().iter().map(|&j| z[j]).fold(f64::INFINITY, f64::min);
        let best_out = s.complement().iter().map(|&j| z[j]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(worst_in >= best_out);
    }

    #[test]
    fn fusion_stays_on_the_simplex(pair in (2usize..10).prop_flat_map(|d| (simplex_exact(d), simplex_exact(d))), m in 0u64..50) {
        let (z, r) = pair;
        let f = fuse_prior(&ScoreVector::new(z).unwrap(), &PriorScores::new(r.clone(), PriorMethod::Grad).unwrap(), m).unwrap();
        prop_assert!((f.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        if m == 0 {
            prop_assert_eq!(f.as_slice(), &r[..]);
        }
    }

    #[test]
    fn mask_cosine_is_symmetric_and_bounded(a in prop::collection::btree_set(0usize..10, 1..6), b in prop::collection::btree_set(0usize..10, 1..6)) {
        let a = vec![SelectionSet::new(a.into_iter().collect(), 10).unwrap()];
        let b = vec![SelectionSet::new(b.into_iter().collect(), 10).unwrap()];
        let ab = mask_cosine(&a, &b).unwrap();
        prop_assert_eq!(ab, mask_cosine(&b, &a).unwrap());
        prop_assert!((0.0..=100.0 + 1e-9).contains(&ab));
    }

    #[test]
    fn report_text_round_trips(v in prop::collection::vec(0.0f64..100.0, 5), s in prop::option::of(0.0f64..100.0), tps in 1e-7f64..1.0, k in 1usize..50) {
        let r = MetricsReport { fs_m: v[0], fu_m: v[1], fs_a: v[2], fu_a: v[3], sen: v[4], sanity_model: s, sanity_data: None, tps, k, n_eval: 10 };
        let text = r.to_string();
        let back: MetricsReport = text.parse().unwrap();
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn csv_round_trips_exactly(rows in prop::collection::vec((prop::collection::vec(-1e6f64..1e6, 3), 0usize..2), 1..30)) {
        let x = Array2::from_shape_fn((rows.len(), 3), |(i, j)| rows[i].0[j]);
        let labels = rows.iter().map(|r| r.1).collect();
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        let ds = Dataset::new(ids, x, labels, 2).unwrap();
        let back = Dataset::from_csv(&ds.to_csv(), Path::new("mem.csv")).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn parsers_reject_garbage_without_panicking(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let p = Path::new("garbage");
        let _ = IdxImages::parse(&bytes, p);
        let _ = IdxLabels::parse(&bytes, p);
        let _ = Checkpoint::from_bytes(&bytes, p);
        let _ = Dataset::from_csv(&String::from_utf8_lossy(&bytes), p);
    }
}

fn simplex_exact(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, d).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_checkpoint_prefix_is_rejected(seed in 0u64..1000, cut_frac in 0.0f64..1.0) {
        let t = Trainer::new(TrainConfig { k: 2, explainer_hidden: vec![4], approximator_hidden: vec![4], seed, ..TrainConfig::default() }, 5, 2).unwrap();
        let bytes = t.checkpoint().to_bytes();
        let p = Path::new("ckpt");
        prop_assert_eq!(&Checkpoint::from_bytes(&bytes, p).unwrap(), &t.checkpoint());
        let cut = (bytes.len() as f64 * cut_frac) as usize;
        prop_assert!(Checkpoint::from_bytes(&bytes[..cut], p).is_err());
    }
}
