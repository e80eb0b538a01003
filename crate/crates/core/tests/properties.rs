use proptest::prelude::*;

use mathprep_core::exam::{grade_item, ItemBody, Response, ScoringScheme};
use mathprep_core::harness::fixtures;
use mathprep_core::memory::{Case, CaseBank};
use mathprep_core::mmdp::{mc_returns, mixture, AgentAction};
use mathprep_core::retrieval::{softmax, Embedding, EstimatorConfig, QEstimator};

fn response_strategy() -> impl Strategy<Value = Response> {
    prop_oneof![
        Just(Response::Unanswered),
        (0usize..4).prop_map(Response::Choice),
        any::<[bool; 4]>().prop_map(Response::TrueFalse),
        (-1e4f64..1e4).prop_map(Response::Numeric),
    ]
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(q in prop::collection::vec(-50.0f64..50.0, 1..20), alpha in 0.01f64..10.0) {
        let p = softmax(&q, alpha).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // Larger Q never gets less mass.
        for i in 0..q.len() {
            for j in 0..q.len() {
                if q[i] > q[j] {
                    prop_assert!(p[i] >= p[j]);
                }
            }
        }
    }

    #[test]
    fn mixture_of_distributions_is_a_distribution(
        raw_mu in prop::collection::vec(0.01f64..1.0, 1..5),
        raw_p in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 5),
    ) {
        let z: f64 = raw_mu.iter().sum();
        let mu: Vec<f64> = raw_mu.iter().map(|m| m / z).collect();
        let components: Vec<Vec<(AgentAction, f64)>> = raw_p[..mu.len()]
            .iter()
            .map(|row| {
                let s: f64 = row.iter().sum();
                ["a", "b", "c"].iter().zip(row).map(|(a, p)| (AgentAction::new(*a), p / s)).collect()
            })
            .collect();
        let out = mixture(&mu, &components).unwrap();
        prop_assert_eq!(out.len(), 3);
        prop_assert!((out.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn estimate_stays_within_record_values(
        records in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 4), -5.0f64..5.0), 1..12),
        query in prop::collection::vec(-1.0f64..1.0, 4),
        ell in 0.05f64..5.0,
    ) {
        let mut bank = CaseBank::new();
        bank.retain(Case::new("c", "s", "a", 0.0)).unwrap();
        let mut est = QEstimator::with_dim(4, ell, EstimatorConfig::default()).unwrap();
        for (x, q) in &records {
            est.add_record(&bank, "c", Embedding::new(x.clone()).unwrap(), *q).unwrap();
        }
        let v = est.q_ec(&Embedding::new(query).unwrap(), "c").unwrap().value;
        let lo = records.iter().map(|r| r.1).fold(f64::MAX, f64::min);
        let hi = records.iter().map(|r| r.1).fold(f64::MIN, f64::max);
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }

    #[test]
    fn bank_is_append_only(rewards in prop::collection::vec(-1.0f64..1.0, 1..40)) {
        let mut bank = CaseBank::new();
        let mut seqs = Vec::new();
        for (i, r) in rewards.iter().enumerate() {
            let snapshot = bank.clone();
            let id = format!("c{i}");
            seqs.push(bank.retain(Case::new(&id, "s", "a", *r)).unwrap().created_seq);
            prop_assert_eq!(&bank.cases()[..snapshot.len()], snapshot.cases());
            let duplicate = bank.retain(Case::new(&id, "s", "a", *r));
            prop_assert!(duplicate.is_err());
        }
        prop_assert_eq!(bank.len(), rewards.len());
        prop_assert!(seqs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn returns_satisfy_the_backward_recursion(rewards in prop::collection::vec(-1.0f64..1.0, 1..30), gamma in 0.0f64..0.99) {
        let g = mc_returns(&rewards, gamma);
        prop_assert_eq!(g.len(), rewards.len());
        let last = rewards.len() - 1;
        prop_assert!((g[last] - rewards[last]).abs() < 1e-12);
        for t in 0..last {
            prop_assert!((g[t] - (rewards[t] + gamma * g[t + 1])).abs() < 1e-9);
        }
    }

    #[test]
    fn grades_stay_within_item_maximum(pick in 0usize..22, response in response_strategy()) {
        let exam = fixtures::exam_2025().unwrap();
        let item = &exam.items[pick];
        let fits = matches!(
            (&item.body, &response),
            (_, Response::Unanswered)
                | (ItemBody::MultipleChoice { .. }, Response::Choice(_))
                | (ItemBody::TrueFalseGroup { .. }, Response::TrueFalse(_))
                | (ItemBody::ShortAnswer { .. }, Response::Numeric(_))
        );
        let graded = grade_item(item, &response, &ScoringScheme::default());
        prop_assert_eq!(graded.is_ok(), fits);
        let Ok(score) = graded else { return Ok(()) };
        prop_assert!(score.points >= 0.0 && score.points <= score.max_points);
        if matches!(response, Response::Unanswered) {
            prop_assert_eq!(score.points, 0.0);
        }
        let key = grade_item(item, &item.body.key_response(), &ScoringScheme::default()).unwrap();
        prop_assert!(key.is_full());
        if let (ItemBody::TrueFalseGroup { key, .. }, Response::TrueFalse(bits)) = (&item.body, &response) {
            let matching = key.iter().zip(bits).filter(|(a, b)| a == b).count();
            prop_assert_eq!(score.correct_parts, matching);
        }
    }
}
