//! Property tests over randomly drawn inputs.

use mcil::data::{self, Dataset, GeneratorConfig, Sample};
use mcil::labeling::vote;
use mcil::metrics::{fleiss_kappa, vote_table};
use mcil::nn::{self, Activation, ArchitectureSpec, Network};
use mcil::psychometric::{self, CurvePoint, ObserverModel};
use proptest::prelude::*;

fn observers() -> impl Strategy<Value = Vec<ObserverModel>> {
    prop::collection::vec((0.1f64..10.0, -2.0f64..2.0), 2..8)
        .prop_map(|v| v.into_iter().map(|(s, b)| ObserverModel::new(s, b).unwrap()).collect())
}

proptest! {
    #[test]
    fn joint_observer_is_never_worse(models in observers()) {
        let joint = psychometric::joint_model(&models).unwrap();
        let best = models.iter().map(|m| m.sigma()).fold(f64::INFINITY, f64::min);
        prop_assert!(joint.sigma() <= best * (1.0 + 1e-12));
        let w = psychometric::joint_weights(&models).unwrap();
        prop_assert!(w.iter().all(|&x| x > 0.0 && x < 1.0));
        // Weighted bias is a convex combination.
        let (lo, hi) = models.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), m| (l.min(m.bias()), h.max(m.bias())));
        prop_assert!(joint.bias() >= lo - 1e-12 && joint.bias() <= hi + 1e-12);
    }

    #[test]
    fn response_is_monotone(sigma in 0.1f64..10.0, bias in -2.0f64..2.0, a in -20.0f64..20.0, d in 0.0f64..5.0) {
        let m = ObserverModel::new(sigma, bias).unwrap();
        let lo = psychometric::psychometric_response(&m, a).unwrap();
        let hi = psychometric::psychometric_response(&m, a + d).unwrap();
        prop_assert!(lo <= hi);
        prop_assert!((0.0..=1.0).contains(&lo));
    }

    #[test]
    fn fit_recovers_generating_model(sigma in 0.3f64..5.0, bias in -1.0f64..1.0) {
        let m = ObserverModel::new(sigma, bias).unwrap();
        let points: Vec<CurvePoint> = (0..9)
            .map(|i| {
                let dc = -bias + sigma * (-1.0 + 0.25 * i as f64);
                CurvePoint { delta_c: dc, accuracy: psychometric::psychometric_response(&m, dc).unwrap(), count: 50 }
            })
            .collect();
        let fit = psychometric::fit_curve(&points).unwrap();
        prop_assert!((fit.model.sigma() - sigma).abs() < 1e-8 * sigma.max(1.0));
        prop_assert!((fit.model.bias() - bias).abs() < 1e-8 * sigma.max(1.0));
    }

    #[test]
    fn kappa_is_bounded(table in prop::collection::vec(prop::collection::vec(0usize..4, 3), 2..20)) {
        // Each row becomes three raters choosing among four categories.
        let k = 4;
        let rows: Vec<Vec<usize>> = table
            .iter()
            .map(|votes| {
                let mut r = vec![0; k];
                votes.iter().for_each(|&v| r[v] += 1);
                r
            })
            .collect();
        let r = fleiss_kappa(&rows, 3).unwrap();
        prop_assert!(r.kappa <= 1.0 + 1e-12);
        prop_assert!(r.kappa >= -1.0 - 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.p_bar));
    }

    #[test]
    fn vote_table_rows_sum_to_rater_count(preds in prop::collection::vec(prop::collection::vec(0usize..3, 6), 2..6)) {
        let table = vote_table(&preds, 3).unwrap();
        prop_assert_eq!(table.len(), 6);
        prop_assert!(table.iter().all(|row| row.iter().sum::<usize>() == preds.len()));
    }

    #[test]
    fn vote_is_a_distribution(votes in prop::collection::vec(0usize..5, 1..12)) {
        let l = vote(&votes, 5).unwrap();
        let sum: f64 = l.probabilities.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        for (c, &p) in l.probabilities.iter().enumerate() {
            let n = votes.iter().filter(|&&v| v == c).count();
            prop_assert_eq!(p, n as f64 / votes.len() as f64);
        }
    }

    #[test]
    fn forward_is_a_distribution(seed in any::<u64>(), x in prop::collection::vec(-50.0f64..50.0, 3)) {
        let spec = ArchitectureSpec::new("p", &[5, 5], Activation::Tanh).with_residual(0, 1);
        let net = Network::init(&spec, 3, 4, seed).unwrap();
        let p = nn::forward(&net, &x).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn kl_is_nonnegative(a in prop::collection::vec(0.0f64..1.0, 4), b in prop::collection::vec(0.01f64..1.0, 4)) {
        prop_assume!(a.iter().sum::<f64>() > 1e-3);
        let norm = |v: &[f64]| { let s: f64 = v.iter().sum(); v.iter().map(|x| x / s).collect::<Vec<_>>() };
        let (t, p) = (norm(&a), norm(&b));
        prop_assert!(nn::kl_loss(&t, &p).unwrap() >= -1e-12);
        prop_assert!(nn::kl_loss(&t, &t).unwrap().abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_partitions_and_orders_by_clarity(seed in any::<u64>(), n in 10usize..80) {
        let cfg = GeneratorConfig { num_classes: 3, feature_dim: 3, per_class: n, ..GeneratorConfig::default() };
        let ds = data::generate_synthetic(&cfg, seed).unwrap();
        let s = data::split(&ds, data::DEFAULT_FRACTIONS, seed ^ 1).unwrap();
        let mut all: Vec<usize> = s.d1_indices.iter().chain(&s.d2_indices).chain(&s.d3_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        let clarity = |d: &Dataset| d.samples().iter().map(|x| x.clarity.unwrap()).collect::<Vec<_>>();
        let min_d1 = clarity(&s.d1).into_iter().fold(f64::INFINITY, f64::min);
        let max_d2 = clarity(&s.d2).into_iter().fold(0.0, f64::max);
        let min_d2 = clarity(&s.d2).into_iter().fold(f64::INFINITY, f64::min);
        let max_d3 = clarity(&s.d3).into_iter().fold(0.0, f64::max);
        prop_assert!(min_d1 >= max_d2 && min_d2 >= max_d3);
        prop_assert!(s.d2.samples().iter().all(|x| x.label.is_none()));
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>()) {
        let cfg = GeneratorConfig { num_classes: 2, feature_dim: 2, per_class: 5, ..GeneratorConfig::default() };
        let ds = data::generate_synthetic(&cfg, seed).unwrap();
        let mut buf = Vec::new();
        data::write_csv(&ds, &mut buf).unwrap();
        let back = data::read_csv(buf.as_slice(), 2).unwrap();
        prop_assert_eq!(back, ds);
    }
}

#[test]
fn unlabeled_rows_survive_csv() {
    let samples = vec![
        Sample { features: vec![0.1, -2.5], label: None, clarity: Some(0.25) },
        Sample { features: vec![1e-9, 3.0], label: Some(1), clarity: None },
    ];
    let ds = Dataset::new(samples, 2).unwrap();
    let mut buf = Vec::new();
    data::write_csv(&ds, &mut buf).unwrap();
    assert_eq!(data::read_csv(buf.as_slice(), 2).unwrap(), ds);
}
