mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{digits, normal_vec, random_linear};
use robex::attack::{linear_min_perturbation, min_perturbation};
use robex::criteria::{
    auc, deletion_score, insertion_deletion_curve, insertion_score, robustness_curve, sanity_check, sensitivity,
    spearman_rank_correlation, top_count, CriteriaConfig, ReferenceSpec,
};
use robex::explain::{grad_attr, random_attr};
use robex::model::softmax_probs;
use robex::{AttackConfig, AttackGoal, Attribution, Criterion, Example, FeatureSet, Model};

fn wide() -> CriteriaConfig {
    CriteriaConfig {
        attack: AttackConfig {
            eps_cap: Some(1e3),
            ..AttackConfig::default()
        },
        ..CriteriaConfig::default()
    }
}

/// Linear models with their examples relabelled to the model's own prediction.
fn linear_world(seed: u64, d: usize, classes: usize, n: usize) -> (Vec<Vec<f64>>, Vec<f64>, Model, Vec<Example>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, bias) = random_linear(&mut rng, d, classes);
    let model = Model::linear(&rows, &bias).unwrap();
    let examples = (0..n)
        .map(|_| {
            let x = normal_vec(&mut rng, d);
            let label = model.predict(&x).unwrap();
            Example { x, label }
        })
        .collect();
    (rows, bias, model, examples)
}

#[test]
fn single_example_curve_is_the_attack_norm() {
    let dg = digits();
    let ex = dg.correct_test(1);
    let attr = grad_attr(&dg.model, &ex[0].x).unwrap();
    let config = CriteriaConfig {
        fractions: vec![0.2],
        ..CriteriaConfig::default()
    };
    let d = dg.model.input_dim();
    let s = attr.top_k(top_count(0.2, d)).unwrap();
    let goal = AttackGoal::Untargeted { original: ex[0].label };
    for (mode, set) in [
        (Criterion::RobustnessS, s.clone()),
        (Criterion::RobustnessSbar, s.complement()),
    ] {
        let curve = robustness_curve(&dg.model, &ex, std::slice::from_ref(&attr), mode, &config).unwrap();
        let direct = min_perturbation(&dg.model, &ex[0].x, &set, goal, &config.attack).unwrap();
        assert_eq!(curve.points, vec![(0.2, direct.norm)]);
        assert_eq!(curve.n_capped, vec![usize::from(direct.capped)]);
        assert_eq!(curve.auc, 0.0);
    }
}

#[test]
fn linear_curves_track_oracle_means() {
    let (rows, bias, model, examples) = linear_world(4, 20, 3, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let attrs: Vec<Attribution> = examples
        .iter()
        .map(|_| random_attr(20, rng.random()).unwrap())
        .collect();
    for mode in [Criterion::RobustnessS, Criterion::RobustnessSbar] {
        let curve = robustness_curve(&model, &examples, &attrs, mode, &wide()).unwrap();
        for &(f, got) in &curve.points {
            let oracle = examples
                .iter()
                .zip(&attrs)
                .map(|(ex, a)| {
                    let s = a.top_k(top_count(f, 20)).unwrap();
                    let s = if mode == Criterion::RobustnessS {
                        s
                    } else {
                        s.complement()
                    };
                    let goal = AttackGoal::Untargeted { original: ex.label };
                    linear_min_perturbation(&rows, &bias, &ex.x, &s, goal)
                        .unwrap()
                        .unwrap_or(1e3)
                })
                .sum::<f64>()
                / examples.len() as f64;
            assert!(
                got >= oracle - 1e-6 && got <= 1.02 * oracle,
                "{mode:?} at {f}: {got} vs {oracle}"
            );
        }
    }
}

#[test]
fn duplicating_examples_leaves_the_curve_unchanged() {
    let (_, _, model, examples) = linear_world(5, 10, 2, 1);
    let attr = random_attr(10, 3).unwrap();
    let twice = vec![examples[0].clone(), examples[0].clone()];
    let one = robustness_curve(
        &model,
        &examples,
        std::slice::from_ref(&attr),
        Criterion::RobustnessSbar,
        &wide(),
    )
    .unwrap();
    let two = robustness_curve(
        &model,
        &twice,
        &[attr.clone(), attr],
        Criterion::RobustnessSbar,
        &wide(),
    )
    .unwrap();
    assert_eq!(one.points, two.points);
    assert_eq!(one.auc, two.auc);
    assert_eq!(two.n_examples, 2);
}

#[test]
fn misclassified_examples_are_skipped_and_counted() {
    let (_, _, model, mut examples) = linear_world(6, 10, 2, 4);
    examples[1].label = 1 - examples[1].label;
    let attrs: Vec<Attribution> = (0..4).map(|k| random_attr(10, k).unwrap()).collect();
    let curve = robustness_curve(&model, &examples, &attrs, Criterion::RobustnessS, &wide()).unwrap();
    assert_eq!((curve.n_examples, curve.n_skipped), (3, 1));
    let refs = ReferenceSpec::Scalar { value: 0.0 };
    let del = insertion_deletion_curve(&model, &examples, &attrs, Criterion::Deletion, &refs, &[0.1, 0.5]).unwrap();
    assert_eq!((del.n_examples, del.n_skipped), (3, 1));
    assert!(robustness_curve(&model, &examples, &attrs[..2], Criterion::RobustnessS, &wide()).is_err());
}

#[test]
fn robustness_s_falls_when_the_ranking_is_true() {
    // Binary linear model: the exact importance order is |w_1 - w_0|.
    for seed in 0..4 {
        let (rows, _, model, examples) = linear_world(50 + seed, 16, 2, 4);
        let truth: Vec<f64> = rows[1].iter().zip(&rows[0]).map(|(a, b)| (a - b).abs()).collect();
        let attrs: Vec<Attribution> = examples
            .iter()
            .map(|_| Attribution::new(truth.clone(), "oracle").unwrap())
            .collect();
        let curve = robustness_curve(&model, &examples, &attrs, Criterion::RobustnessS, &wide()).unwrap();
        for w in curve.points.windows(2) {
            assert!(w[1].1 <= 1.02 * w[0].1 + 1e-9, "seed {seed}: {:?}", curve.points);
        }
    }
}

#[test]
fn deletion_and_insertion_limits() {
    let dg = digits();
    let ex = &dg.correct_test(1)[0];
    let d = ex.x.len();
    let p = softmax_probs(&dg.model.forward(&ex.x).unwrap())[ex.label];
    let reference = ReferenceSpec::UniformRandom {
        lo: 0.0,
        hi: 1.0,
        seed: 3,
    }
    .resolve(d, 0)
    .unwrap();
    assert_eq!(
        deletion_score(&dg.model, &ex.x, &reference, &FeatureSet::empty(d), ex.label).unwrap(),
        p
    );
    assert_eq!(
        insertion_score(&dg.model, &ex.x, &reference, &FeatureSet::full(d), ex.label).unwrap(),
        p
    );

    let attr = grad_attr(&dg.model, &ex.x).unwrap();
    let same = ReferenceSpec::PerFeature { values: ex.x.clone() };
    let fractions = robex::criteria::default_fractions();
    let curve = insertion_deletion_curve(
        &dg.model,
        std::slice::from_ref(ex),
        std::slice::from_ref(&attr),
        Criterion::Insertion,
        &same,
        &fractions,
    )
    .unwrap();
    assert!(curve.points.iter().all(|&(_, v)| v == p));
}

#[test]
fn matching_coordinates_do_not_move_deletion_or_insertion() {
    let dg = digits();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for ex in dg.correct_test(10) {
        let d = ex.x.len();
        let mut reference: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let i = rng.random_range(0..d);
        reference[i] = ex.x[i];
        let s = common::random_subset(&mut rng, d, 0.3);
        let without: Vec<usize> = s.indices().iter().copied().filter(|&j| j != i).collect();
        let without = FeatureSet::new(without, d).unwrap();
        let with = without.with(i);
        for score in [deletion_score, insertion_score] {
            let a = score(&dg.model, &ex.x, &reference, &without, ex.label).unwrap();
            let b = score(&dg.model, &ex.x, &reference, &with, ex.label).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn uniform_reference_is_per_example_and_seeded() {
    let spec = ReferenceSpec::UniformRandom {
        lo: -1.0,
        hi: 2.0,
        seed: 9,
    };
    let a = spec.resolve(30, 0).unwrap();
    assert_eq!(a, spec.resolve(30, 0).unwrap());
    assert_ne!(a, spec.resolve(30, 1).unwrap());
    assert!(a.iter().all(|v| (-1.0..=2.0).contains(v)));
    assert!(ReferenceSpec::PerFeature { values: vec![0.0; 3] }
        .resolve(4, 0)
        .is_err());
    assert!(ReferenceSpec::UniformRandom {
        lo: 1.0,
        hi: 0.0,
        seed: 0
    }
    .resolve(4, 0)
    .is_err());
}

#[test]
fn auc_examples_and_errors() {
    assert_eq!(auc(&[(0.0, 3.0), (1.0, 3.0)]).unwrap(), 3.0);
    assert!((auc(&[(0.05, 2.0), (0.10, 4.0)]).unwrap() - 0.15).abs() < 1e-15);
    assert!(auc(&[(0.1, 1.0)]).is_err());
    assert!(auc(&[(0.2, 1.0), (0.1, 1.0)]).is_err());
    assert!(auc(&[(0.1, 1.0), (0.1, 2.0)]).is_err());
}

#[test]
fn sensitivity_edge_cases() {
    let x = vec![0.3, -0.2, 1.0, 0.5];
    let top2 = |v: &[f64]| {
        let a = Attribution::new(v.iter().map(|t| t.abs()).collect(), "abs")?;
        a.top_k(2)
    };
    assert_eq!(sensitivity(top2, &x, 0.0, 50, 1).unwrap(), 0.0);
    let constant = |_: &[f64]| FeatureSet::new(vec![0, 3], 4);
    assert_eq!(sensitivity(constant, &x, 5.0, 50, 1).unwrap(), 0.0);
    let xc = x.clone();
    let adversarial = move |v: &[f64]| {
        if v == xc.as_slice() {
            FeatureSet::new(vec![0, 1], 4)
        } else {
            FeatureSet::new(vec![2, 3], 4)
        }
    };
    assert_eq!(sensitivity(adversarial, &x, 0.1, 5, 1).unwrap(), 1.0);
    let moving = sensitivity(top2, &x, 1.0, 200, 4).unwrap();
    assert!((0.0..=1.0).contains(&moving));
    assert_eq!(moving, sensitivity(top2, &x, 1.0, 200, 4).unwrap());
    assert!(sensitivity(|_: &[f64]| Ok(FeatureSet::empty(4)), &x, 1.0, 5, 1).is_err());
}

/// Spearman from the definition: average ranks by counting, then Pearson.
fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    let ranks = |s: &[f64]| -> Vec<f64> {
        s.iter()
            .map(|&v| {
                let above = s.iter().filter(|&&u| u > v).count() as f64;
                let equal = s.iter().filter(|&&u| u == v).count() as f64;
                above + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let sa: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum::<f64>().sqrt();
    let sb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum::<f64>().sqrt();
    cov / (sa * sb)
}

#[test]
fn spearman_examples() {
    let a = Attribution::new(vec![0.1, 0.5, 0.3, 0.9], "a").unwrap();
    let rev = Attribution::new(vec![0.9, 0.3, 0.5, 0.1], "b").unwrap();
    assert_eq!(spearman_rank_correlation(&a, &a).unwrap(), 1.0);
    assert_eq!(spearman_rank_correlation(&a, &rev).unwrap(), -1.0);
    let short = Attribution::new(vec![0.0; 3], "c").unwrap();
    assert!(spearman_rank_correlation(&a, &short).is_err());
}

#[test]
fn sanity_check_behaviour_on_digits() {
    let dg = digits();
    let examples = dg.correct_test(10);
    let fixed = sanity_check(&dg.model, &examples, |m, _| random_attr(m.input_dim(), 5), 1).unwrap();
    assert!(fixed.per_example.iter().all(|&r| r == 1.0));
    assert_eq!(fixed.mean, 1.0);
    let grad = sanity_check(&dg.model, &examples, grad_attr, 1).unwrap();
    assert!(grad.mean < 0.9, "{}", grad.mean);
    assert_eq!(grad, sanity_check(&dg.model, &examples, grad_attr, 1).unwrap());
}

#[test]
fn curves_do_not_depend_on_thread_count() {
    let dg = digits();
    let examples = dg.correct_test(6);
    let attrs: Vec<Attribution> = examples.iter().map(|e| grad_attr(&dg.model, &e.x).unwrap()).collect();
    let config = CriteriaConfig {
        fractions: vec![0.1, 0.3],
        ..CriteriaConfig::default()
    };
    let refs = ReferenceSpec::UniformRandom {
        lo: 0.0,
        hi: 1.0,
        seed: 2,
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            (
                robustness_curve(&dg.model, &examples, &attrs, Criterion::RobustnessSbar, &config).unwrap(),
                insertion_deletion_curve(
                    &dg.model,
                    &examples,
                    &attrs,
                    Criterion::Deletion,
                    &refs,
                    &config.fractions,
                )
                .unwrap(),
            )
        })
    };
    assert_eq!(run(1), run(4));
}

proptest! {
    #[test]
    fn auc_scales_linearly(ys in prop::collection::vec(-10.0f64..10.0, 2..12), alpha in -5.0f64..5.0) {
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (0.05 * (i + 1) as f64, y)).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, alpha * y)).collect();
        let (a, b) = (auc(&pts).unwrap(), auc(&scaled).unwrap());
        prop_assert!((b - alpha * a).abs() <= 1e-12 * (1.0 + (alpha * a).abs()));
    }

    #[test]
    fn spearman_matches_definition(
        a in prop::collection::vec(prop_oneof![Just(1.0), Just(2.0), -3.0f64..3.0], 3..25),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random() }).collect();
        let oracle = spearman_oracle(&a, &b);
        prop_assume!(oracle.is_finite());
        let got = spearman_rank_correlation(&Attribution::new(a, "a").unwrap(), &Attribution::new(b, "b").unwrap()).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-12, "{} vs {}", got, oracle);
    }
}
