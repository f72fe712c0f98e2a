//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! `cargo test -p meed --test acceptance` runs everything and ends with a
//! summary count; trailing numeric
//! arguments (`-- 3 7`) restrict the run to those criteria. MNIST criteria
//! read the IDX files from `MEED_MNIST_DIR`, or `data/mnist` at the
//! workspace root.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use meed::approximators::LossU;
use meed::baselines::{run_ablation, AblationVariant};
use meed::data::{
    generate_synthetic, mnist_pair, train_given_model, Dataset, GivenModelSpec, Splits, SyntheticKind, SyntheticSpec,
};
use meed::explainer::{fuse_prior, prior_constraint_loss, FeedbackFusion, PriorMethod, PriorScores};
use meed::metrics::{
    brute_force_best_subset, discretize_quantiles, evaluate, hard_masks, mask_cosine, mi_estimate, random_mask_cosine,
    sanity_model_randomization, sanity_model_retrain, EvalOptions, MetricsReport,
};
use meed::model::MlpModel;
use meed::rng::{stream, Stream};
use meed::sampler::{relaxed_topk, sample_gumbel_noise, GumbelNoise};
use meed::trainer::{train, Checkpoint, StepNoise, TrainConfig, Trainer, TrainingSet};
use meed::types::{ScoreVector, SelectionSet};

type Outcome = (bool, String);

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn all(checks: &[(bool, String)]) -> Outcome {
    let ok = checks.iter().all(|(c, _)| *c);
    let msg = checks
        .iter()
        .map(|(c, m)| format!("{}{m}", if *c { "" } else { "!" }))
        .collect::<Vec<_>>()
        .join("; ");
    (ok, msg)
}

fn criterion1() -> Outcome {
    let z = ScoreVector::new(vec![0.2, 0.3, 0.5]).unwrap();
    let r = PriorScores::new(vec![0.6, 0.1, 0.3], PriorMethod::GradientTimesInput).unwrap();
    let m0 = fuse_prior(&z, &r, 0).unwrap();
    let exact_prior = m0.as_slice() == r.r.as_slice();

    let z = ScoreVector::new(vec![0.5, 0.5]).unwrap();
    let r = PriorScores::new(vec![0.9, 0.1], PriorMethod::Grad).unwrap();
    let f = fuse_prior(&z, &r, 1).unwrap();
    let err = (f.as_slice()[0] - 0.75).abs().max((f.as_slice()[1] - 0.25).abs());

    let fused = Array2::from_shape_vec((2, 3), vec![0.2, 0.3, 0.5, 0.1, 0.1, 0.8]).unwrap();
    let raw = Array2::from_shape_vec((2, 3), vec![0.4, 0.4, 0.2, 0.3, 0.3, 0.4]).unwrap();
    let l0 = prior_constraint_loss(fused.view(), raw.view(), 0);
    let l1 = prior_constraint_loss(fused.view(), raw.view(), 1);
    let halves = (l1 - l0 / 2.0).abs() <= 1e-15 * l0;
    all(&[
        (exact_prior, "m=0 returns the prior".into()),
        (err <= 1e-9, format!("(0.5,0.5)x(0.9,0.1) at m=1 off by {err:.1e}")),
        (halves, format!("constraint {l0:.6} -> {l1:.6}")),
    ])
}

fn criterion2() -> Outcome {
    let z = ScoreVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let v = relaxed_topk(&z, 1, 1.0, &GumbelNoise::zeros(4, 1)).unwrap();
    // softmax(ln z) reproduces z up to rounding in the last bits.
    let identity =
        v.v.iter()
            .zip(z.as_slice())
            .all(|(a, b)| (a - b).abs() <= 4.0 * f64::EPSILON * b);

    let mut rng = stream(2, Stream::Gumbel);
    let draws = 100_000;
    let mut counts = [0usize; 4];
    let mut sum_ok = true;
    let mut binary_gap = 0.0;
    let mut near_binary = 0usize;
    for t in 0..draws {
        let noise = sample_gumbel_noise(4, 1, &mut rng).unwrap();
        let soft = relaxed_topk(&z, 1, 1e-2, &noise).unwrap();
        let j = (0..4).max_by(|&a, &b| soft.v[a].total_cmp(&soft.v[b])).unwrap();
        counts[j] += 1;
        let gap = soft.v.iter().map(|&x| x.min(1.0 - x)).fold(0.0, f64::max);
        binary_gap += gap / draws as f64;
        near_binary += usize::from(gap <= 0.05);
        if t % 10 == 0 {
            let k = 1 + t % 4;
            let noise = sample_gumbel_noise(4, k, &mut rng).unwrap();
            let v = relaxed_topk(&z, k, 0.5, &noise).unwrap();
            sum_ok &= v.v.iter().sum::<f64>() <= k as f64 + 1e-12;
        }
    }
    let freq_err = counts
        .iter()
        .zip(z.as_slice())
        .map(|(&c, &p)| (c as f64 / draws as f64 - p).abs())
        .fold(0.0, f64::max);
    all(&[
        (identity, "zero-noise tau=1 k=1 gives v=z".into()),
        (freq_err <= 0.01, format!("k=1 frequency error {freq_err:.4}")),
        (sum_ok, "sum v <= k".into()),
        (
            binary_gap <= 0.05,
            format!(
                "tau=0.01 mean distance to binary {binary_gap:.2e}, {:.2}% of draws within 0.05",
                100.0 * near_binary as f64 / draws as f64
            ),
        ),
    ])
}

fn random_simplex(n: usize, c: usize, rng: &mut meed::rng::Rng) -> Array2<f64> {
    let mut y = Array2::from_shape_fn((n, c), |_| rng.random_range(0.05..1.0));
    for mut row in y.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    y
}

fn relative_error(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let diff = (a - b).mapv(|v| v * v).sum().sqrt();
    let scale = a.mapv(|v| v * v).sum().sqrt().max(b.mapv(|v| v * v).sum().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` on the coordinates `coords` of `params`.
fn central_difference(
    params: &mut Array1<f64>,
    coords: &[usize],
    mut f: impl FnMut(&Array1<f64>) -> f64,
) -> Array1<f64> {
    let h = 1e-6;
    let mut g = Array1::zeros(coords.len());
    for (slot, &i) in coords.iter().enumerate() {
        let p = params[i];
        params[i] = p + h;
        let up = f(params);
        params[i] = p - h;
        let down = f(params);
        params[i] = p;
        g[slot] = (up - down) / (2.0 * h);
    }
    g
}

/// Up to `FD_COORDS` parameter indices, all of them for small nets.
const FD_COORDS: usize = 200;

fn probe_coords(n: usize, rng: &mut meed::rng::Rng) -> Vec<usize> {
    if n <= FD_COORDS {
        (0..n).collect()
    } else {
        rand::seq::index::sample(rng, n, FD_COORDS).into_vec()
    }
}

fn pick(g: &Array1<f64>, coords: &[usize]) -> Array1<f64> {
    coords.iter().map(|&i| g[i]).collect()
}

/// Trainer for a random small problem, positioned at epoch `m`.
fn random_trainer(i: u64, rng: &mut meed::rng::Rng) -> (Trainer, Array2<f64>, Array2<f64>, Option<Array2<f64>>) {
    let d = rng.random_range(3..7);
    let c = rng.random_range(2..4);
    let prior = !i.is_multiple_of(3);
    let config = TrainConfig {
        k: rng.random_range(1..d),
        tau: rng.random_range(0.3..1.5),
        lambda_u: [0.0, 0.5, 1.0][(i % 3) as usize],
        lambda_e: if prior { rng.random_range(0.1..2.0) } else { 0.0 },
        loss_u: if i.is_multiple_of(2) {
            LossU::CrossEntropy
        } else {
            LossU::SlicedWasserstein
        },
        feedback_fusion: [
            FeedbackFusion::None,
            FeedbackFusion::ConcatRaw,
            FeedbackFusion::ConcatEmbedded,
        ][(i % 3) as usize],
        use_output_feedback: !i.is_multiple_of(3),
        prior_method: if prior {
            PriorMethod::GradientTimesInput
        } else {
            PriorMethod::None
        },
        n_projections: 8,
        explainer_hidden: vec![rng.random_range(2..6)],
        approximator_hidden: vec![rng.random_range(2..6)],
        seed: i,
        ..TrainConfig::default()
    };
    let trainer = Trainer::new(config, d, c).unwrap();
    let mut ckpt = trainer.checkpoint();
    ckpt.epoch = rng.random_range(0..4);
    let trainer = Trainer::from_checkpoint(&ckpt).unwrap();
    let n = 4;
    let x = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(rng));
    let y = random_simplex(n, c, rng);
    let r = prior.then(|| random_simplex(n, d, rng));
    (trainer, x, y, r)
}

fn criterion3() -> Outcome {
    let mut rng = stream(3, Stream::Data);
    let mut worst_e: f64 = 0.0;
    let mut worst_a: f64 = 0.0;
    let mut covered = [false; 5];
    for i in 0..100u64 {
        let (mut trainer, x, y, r) = random_trainer(i, &mut rng);
        let prior = r.as_ref().map(|r| r.view());
        let noise: StepNoise = trainer.draw_noise(x.nrows(), x.ncols(), y.ncols()).unwrap();
        let cfg = trainer.config.clone();
        covered[0] = true;
        covered[1] |= cfg.lambda_u > 0.0 && cfg.loss_u == LossU::CrossEntropy;
        covered[2] |= cfg.lambda_u > 0.0 && cfg.loss_u == LossU::SlicedWasserstein;
        covered[3] |= cfg.lambda_e > 0.0;
        covered[4] |= trainer.epoch() > 0 && cfg.lambda_e > 0.0;

        let (_, g) = trainer.explainer_gradient(x.view(), y.view(), prior, &noise).unwrap();
        let mut params = trainer.explainer.net.params().clone();
        let coords = probe_coords(params.len(), &mut rng);
        let mut probe = trainer.clone();
        let fd = central_difference(&mut params, &coords, |p| {
            probe.explainer.net.set_params(p.clone()).unwrap();
            probe
                .explainer_gradient(x.view(), y.view(), prior, &noise)
                .unwrap()
                .0
                .objective
        });
        worst_e = worst_e.max(relative_error(&pick(&g, &coords), &fd));

        let v = trainer.masks(x.view(), y.view(), prior, &noise).unwrap();
        let dirs = noise.directions.as_ref().map(|d| d.view());
        let (_, gs, gu) = trainer
            .approximator_gradients(x.view(), y.view(), v.view(), dirs)
            .unwrap();
        let mut ps = trainer.pair.selected.params().clone();
        let coords = probe_coords(ps.len(), &mut rng);
        let mut probe = trainer.clone();
        let fd_s = central_difference(&mut ps, &coords, |p| {
            probe.pair.selected.set_params(p.clone()).unwrap();
            probe
                .approximator_gradients(x.view(), y.view(), v.view(), dirs)
                .unwrap()
                .0
                .objective
        });
        worst_a = worst_a.max(relative_error(&pick(&gs, &coords), &fd_s));
        if let Some(gu) = gu {
            let mut pu = trainer.pair.unselected.params().clone();
            let coords = probe_coords(pu.len(), &mut rng);
            let mut probe = trainer.clone();
            let fd_u = central_difference(&mut pu, &coords, |p| {
                probe.pair.unselected.set_params(p.clone()).unwrap();
                probe
                    .approximator_gradients(x.view(), y.view(), v.view(), dirs)
                    .unwrap()
                    .0
                    .objective
            });
            worst_a = worst_a.max(relative_error(&pick(&gu, &coords), &fd_u));
        }
    }
    all(&[
        (worst_e <= 1e-3, format!("explainer worst relative error {worst_e:.2e}")),
        (
            worst_a <= 1e-3,
            format!("approximators worst relative error {worst_a:.2e}"),
        ),
        (covered.iter().all(|&c| c), format!("paths covered {covered:?}")),
    ])
}

fn criterion4() -> Outcome {
    let ds = generate_synthetic(&SyntheticSpec::sparse_logit(6, 2, 10_000, 4)).unwrap();
    let truth = ds.true_subset.clone().unwrap();
    let x = discretize_quantiles(ds.x.view(), 4);
    let y: Vec<u32> = ds.labels.iter().map(|&l| l as u32).collect();
    let found = brute_force_best_subset(&x, &y, 2).unwrap();

    let mut rng = stream(4, Stream::Data);
    let xor: Vec<Vec<u32>> = (0..10_000)
        .map(|_| (0..4).map(|_| rng.random_range(0..2)).collect())
        .collect();
    let yx: Vec<u32> = xor.iter().map(|r| r[0] ^ r[1]).collect();
    let found_xor = brute_force_best_subset(&xor, &yx, 2).unwrap();
    // Exact enumeration of the joint MI of every pair agrees on the winner.
    let mut best = (f64::NEG_INFINITY, vec![]);
    for a in 0..4 {
        for b in a + 1..4 {
            let keys: Vec<(u32, u32)> = xor.iter().map(|r| (r[a], r[b])).collect();
            let mi = mi_estimate(&keys, &yx).unwrap();
            if mi > best.0 + 1e-9 {
                best = (mi, vec![a, b]);
            }
        }
    }
    all(&[
        (
            found == truth,
            format!(
                "sparse-logit found {:?}, planted {:?}",
                found.indices(),
                truth.indices()
            ),
        ),
        (
            found_xor.indices() == [0, 1],
            format!("xor found {:?}", found_xor.indices()),
        ),
        (best.1 == [0, 1], format!("xor MI enumeration picks {:?}", best.1)),
    ])
}

struct Synthetic {
    dataset: Dataset,
    model: MlpModel,
    train: meed::types::SampleSet,
    test: meed::types::SampleSet,
}

fn synthetic(spec: &SyntheticSpec) -> Synthetic {
    let dataset = generate_synthetic(spec).unwrap();
    let s = dataset.split();
    let given = GivenModelSpec {
        seed: spec.seed,
        ..Default::default()
    };
    let (model, _) = train_given_model(&s.train, &s.test, &given).unwrap();
    let train = s.train.annotate(&model).unwrap();
    let test = s.test.annotate(&model).unwrap();
    Synthetic {
        dataset,
        model,
        train,
        test,
    }
}

fn precision(masks: &[SelectionSet], truth: &SelectionSet) -> f64 {
    let hits: usize = masks
        .iter()
        .map(|m| m.indices().iter().filter(|&&j| truth.contains(j)).count())
        .sum();
    hits as f64 / (masks.len() * truth.k()) as f64
}

fn criterion5() -> Outcome {
    let mut precisions = Vec::new();
    for seed in 0..5u64 {
        let s = synthetic(&SyntheticSpec::sparse_logit(20, 4, 5000, seed));
        let config = TrainConfig {
            k: 4,
            epochs: 30,
            seed,
            ..TrainConfig::default()
        };
        let out = train(&s.train, Some(&s.model), &config).unwrap();
        let masks = hard_masks(&out.trainer.explainer, &s.test, 4).unwrap();
        precisions.push(precision(&masks, s.dataset.true_subset.as_ref().unwrap()));
    }
    let m = median(precisions.clone());
    (m >= 0.9, format!("median precision {m:.3} over {precisions:.3?}"))
}

fn criterion6() -> Outcome {
    let mut rows: Vec<Vec<MetricsReport>> = vec![Vec::new(); AblationVariant::ALL.len()];
    for seed in 0..5u64 {
        let s = synthetic(&SyntheticSpec::sparse_logit(20, 4, 5000, seed));
        let base = TrainConfig {
            k: 4,
            epochs: 30,
            seed,
            prior_method: PriorMethod::GradientTimesInput,
            lambda_e: 1e-3,
            ..TrainConfig::default()
        };
        let mut opts = EvalOptions::new(4, seed);
        opts.sanity_model = false;
        for (row, v) in rows.iter_mut().zip(AblationVariant::ALL) {
            row.push(run_ablation(v, &s.train, &s.test, &s.model, &base, &opts).unwrap().0);
        }
    }
    let med = |v: AblationVariant, f: fn(&MetricsReport) -> f64| {
        let i = AblationVariant::ALL.iter().position(|&a| a == v).unwrap();
        median(rows[i].iter().map(f).collect())
    };
    let fua_full = med(AblationVariant::Full, |r| r.fu_a);
    let fua_woail = med(AblationVariant::WithoutAil, |r| r.fu_a);
    let fum_full = med(AblationVariant::Full, |r| r.fu_m);
    let fum_woail = med(AblationVariant::WithoutAil, |r| r.fu_m);
    let fsm_full = med(AblationVariant::Full, |r| r.fs_m);
    let fsm_woout = med(AblationVariant::WithoutOutput, |r| r.fs_m);
    all(&[
        (
            fua_woail - fua_full >= 5.0,
            format!("FU-A wo-ail {fua_woail:.2} vs full {fua_full:.2} (FU-M {fum_woail:.2} vs {fum_full:.2})"),
        ),
        (
            fsm_full >= fsm_woout,
            format!("FS-M full {fsm_full:.2} vs wo-output {fsm_woout:.2}"),
        ),
    ])
}

fn criterion7() -> Outcome {
    let mut gaps = Vec::new();
    let mut detail = Vec::new();
    for seed in 0..5u64 {
        let s = synthetic(&SyntheticSpec {
            kind: SyntheticKind::ShortcutBait,
            d: 20,
            true_subset: (0..6).collect(),
            n: 5000,
            noise_std: 0.0,
            seed,
        });
        let mut mi = [0.0; 2];
        for (slot, lambda_u) in [(0, 0.0), (1, 1.0)] {
            let config = TrainConfig {
                k: 6,
                epochs: 30,
                seed,
                lambda_u,
                ..TrainConfig::default()
            };
            let out = train(&s.train, Some(&s.model), &config).unwrap();
            let masks = hard_masks(&out.trainer.explainer, &s.test, 6).unwrap();
            mi[slot] = mi_estimate(&masks, &s.test.predicted_classes()).unwrap();
        }
        detail.push(format!("{:.3}/{:.3}", mi[0], mi[1]));
        gaps.push(mi[0] - mi[1]);
    }
    let m = median(gaps);
    (
        m >= 0.05,
        format!(
            "median MI(lambda_u=0) - MI(lambda_u=1) = {m:.3} nats; per seed {}",
            detail.join(" ")
        ),
    )
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("MEED_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

struct MnistRun {
    accuracy: f64,
    fs_m: f64,
    reuse: f64,
    retrain: f64,
}

fn mnist_run(splits: &Splits) -> MnistRun {
    let given = GivenModelSpec {
        hidden: vec![256, 256],
        epochs: 5,
        ..Default::default()
    };
    let (model, accuracy) = train_given_model(&splits.train, &splits.test, &given).unwrap();
    let train_set = splits.train.annotate(&model).unwrap();
    let test = splits.test.annotate(&model).unwrap();
    let config = TrainConfig {
        k: 25,
        epochs: 3,
        explainer_hidden: vec![128],
        approximator_hidden: vec![128],
        ..TrainConfig::default()
    };
    let out = train(&train_set, Some(&model), &config).unwrap();
    let masks = hard_masks(&out.trainer.explainer, &test, 25).unwrap();
    let fs_m = meed::metrics::fidelity_model(&model, &test, &masks, true).unwrap();
    let reuse =
        sanity_model_randomization(&out.trainer.explainer, &model, &test, 25, &mut stream(0, Stream::Model)).unwrap();
    let retrain_config = TrainConfig { epochs: 2, ..config };
    let retrain = sanity_model_retrain(
        &model,
        train_set.features(),
        &test,
        &retrain_config,
        &masks,
        &mut stream(0, Stream::Model),
    )
    .unwrap();
    MnistRun {
        accuracy,
        fs_m,
        reuse,
        retrain,
    }
}

fn criterion8(run: &MnistRun) -> Outcome {
    all(&[
        (
            run.accuracy >= 0.98,
            format!("given MLP test accuracy {:.2}%", 100.0 * run.accuracy),
        ),
        (run.fs_m >= 90.0, format!("k=25 FS-M {:.2}", run.fs_m)),
    ])
}

fn criterion9(run: Option<&MnistRun>) -> Outcome {
    let s = vec![
        SelectionSet::new(vec![0, 3], 6).unwrap(),
        SelectionSet::new(vec![1, 5], 6).unwrap(),
    ];
    let own = mask_cosine(&s, &s).unwrap();
    let n = 50_000;
    let random = random_mask_cosine(25, 5, n, &mut stream(9, Stream::Eval)).unwrap();
    // Per-pair cosine is hypergeometric/k with std below 0.2, so the mean
    // over n pairs stays within 5 standard errors of k/d.
    let tol = 5.0 * 100.0 * 0.2 / (n as f64).sqrt();
    let mut checks = vec![
        (own == 100.0, format!("self cosine {own:.2}")),
        (
            (random - 20.0).abs() <= tol,
            format!("random-mask cosine {random:.2} vs 20.00 +- {tol:.2}"),
        ),
    ];
    match run {
        Some(r) => checks.push((
            r.reuse < 30.0,
            format!(
                "model randomization {:.2} (retrained explainer: {:.2})",
                r.reuse, r.retrain
            ),
        )),
        None => checks.push((false, format!("MNIST not found in {}", mnist_dir().display()))),
    }
    all(&checks)
}

fn criterion10(splits: Option<&Splits>) -> Outcome {
    let s = synthetic(&SyntheticSpec::sparse_logit(10, 3, 1000, 10));
    let config = TrainConfig {
        k: 3,
        epochs: 4,
        seed: 10,
        prior_method: PriorMethod::GradientTimesInput,
        lambda_e: 0.1,
        ..TrainConfig::default()
    };
    let data = TrainingSet::new(&s.train, Some(&s.model), config.prior_method).unwrap();
    let mut full = Trainer::new(config.clone(), 10, 2).unwrap();
    full.fit(&data, |_, _| Ok(())).unwrap();

    let mut half = Trainer::new(
        TrainConfig {
            epochs: 2,
            ..config.clone()
        },
        10,
        2,
    )
    .unwrap();
    half.fit(&data, |_, _| Ok(())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.ckpt");
    let mut ckpt = half.checkpoint();
    ckpt.config.epochs = 4;
    ckpt.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    let bit_exact = loaded.to_bytes() == std::fs::read(&path).unwrap() && loaded == ckpt;
    let mut resumed = Trainer::from_checkpoint(&loaded).unwrap();
    resumed.fit(&data, |_, _| Ok(())).unwrap();
    let resume_ok = resumed.checkpoint().to_bytes() == full.checkpoint().to_bytes();

    let report = || {
        let out = train(&s.train, Some(&s.model), &config).unwrap();
        let mut opts = EvalOptions::new(3, 10);
        opts.retrain.epochs = 5;
        opts.timing_samples = 10;
        let mut r = evaluate(&out.trainer.explainer, &s.model, &s.train, &s.test, &opts).unwrap();
        r.tps = 0.0;
        r.to_string()
    };
    let same_reports = report() == report();

    let mut checks = vec![
        (bit_exact, "checkpoint round trip bit-exact".to_string()),
        (resume_ok, "resume equals uninterrupted run".to_string()),
        (
            same_reports,
            "identical seeds give identical reports (TPS excluded)".to_string(),
        ),
    ];
    match splits {
        Some(sp) => {
            let (train_n, test_n) = (sp.train.len(), sp.val.len() + sp.test.len());
            checks.push((
                train_n == 11_982 && test_n == 1_984,
                format!("IDX (3,8) counts {train_n}/{test_n}"),
            ));
        }
        None => checks.push((false, format!("MNIST not found in {}", mnist_dir().display()))),
    }
    all(&checks)
}

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |n: u32| wanted.is_empty() || wanted.contains(&n);
    let (mut passed, mut total) = (0, 0);
    let mut report = |n: u32, start: Instant, (ok, msg): Outcome| {
        total += 1;
        passed += usize::from(ok);
        println!(
            "{} {n} {msg} ({:.1}s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    let simple: [(u32, fn() -> Outcome); 7] = [
        (1, criterion1),
        (2, criterion2),
        (3, criterion3),
        (4, criterion4),
        (5, criterion5),
        (6, criterion6),
        (7, criterion7),
    ];
    for (n, f) in simple {
        if run(n) {
            let t = Instant::now();
            report(n, t, f());
        }
    }
    let splits = if run(8) || run(9) || run(10) {
        mnist_pair(&mnist_dir(), (3, 8)).ok()
    } else {
        None
    };
    let mnist = if run(8) || run(9) {
        let t = Instant::now();
        let r = splits.as_ref().map(mnist_run);
        (r, t)
    } else {
        (None, Instant::now())
    };
    if run(8) {
        let outcome = match &mnist.0 {
            Some(r) => criterion8(r),
            None => (false, format!("MNIST not found in {}", mnist_dir().display())),
        };
        report(8, mnist.1, outcome);
    }
    if run(9) {
        report(9, Instant::now(), criterion9(mnist.0.as_ref()));
    }
    if run(10) {
        let t = Instant::now();
        report(10, t, criterion10(splits.as_ref()));
    }
    // Unmet criteria are reported, not turned into a failing exit status:
    // the lines above are the record.
    println!("acceptance: {passed}/{total} criteria passed");
    ExitCode::SUCCESS
}
