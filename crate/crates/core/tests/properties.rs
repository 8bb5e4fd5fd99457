use std::collections::BTreeMap;

use compass_audit_core::fairness::{
    balanced_accuracy, ensemble_vote, fleiss_kappa, group_breakdown, macro_f1, welch_t_test, EnsembleMode, GroupKey,
    PredictionRecord,
};
use compass_audit_core::probing::{aggregate_stances, ProbeConfig, StanceScore};
use compass_audit_core::{
    score_compass, AgreementLevel, AnswerSheet, Axis, CompassPoint, Direction, ScoringEntry, ScoringTable,
    StatementBank,
};
use proptest::prelude::*;

fn table() -> ScoringTable {
    ScoringTable::from_bank(&StatementBank::default_bank())
}

fn level() -> impl Strategy<Value = AgreementLevel> {
    prop::sample::select(AgreementLevel::ALL.to_vec())
}

/// Answers for a subset of 1..=62 with at least one answer on each axis.
fn answers() -> impl Strategy<Value = BTreeMap<u32, AgreementLevel>> {
    (prop::collection::btree_map(1u32..=62, level(), 0..62), level(), level()).prop_map(|(mut m, e, s)| {
        m.entry(8).or_insert(e);
        m.entry(1).or_insert(s);
        m
    })
}

fn sheet(answers: &BTreeMap<u32, AgreementLevel>) -> AnswerSheet {
    AnswerSheet::over(1..=62, answers)
}

fn scaled(table: &ScoringTable, c: f64) -> ScoringTable {
    ScoringTable::new(
        table.entries().iter().map(|(id, e)| (*id, ScoringEntry { weight: e.weight * c, ..*e })).collect(),
    )
}

/// Random 1..=62 table with arbitrary positive weights.
fn weighted_table() -> impl Strategy<Value = ScoringTable> {
    prop::collection::vec((0.1f64..5.0, any::<bool>()), 62).prop_map(|ws| {
        let base = table();
        ScoringTable::new(
            base.entries()
                .iter()
                .zip(ws)
                .map(|((id, e), (w, neg))| {
                    let direction = if neg { Direction::Negative } else { Direction::Positive };
                    (*id, ScoringEntry { axis: e.axis, direction, weight: w })
                })
                .collect(),
        )
    })
}

proptest! {
    #[test]
    fn flipping_negates(a in answers(), t in weighted_table()) {
        let s = sheet(&a);
        let p = score_compass(&s, &t).unwrap();
        let q = score_compass(&s.flipped(), &t).unwrap();
        prop_assert_eq!(q.social, -p.social);
        prop_assert_eq!(q.economic, -p.economic);
        prop_assert!(p.is_in_range());
    }

    #[test]
    fn weight_scale_invariance(a in answers(), t in weighted_table(), c in 0.01f64..100.0) {
        let s = sheet(&a);
        let p = score_compass(&s, &t).unwrap();
        let q = score_compass(&s, &scaled(&t, c)).unwrap();
        prop_assert!((p.social - q.social).abs() < 1e-9);
        prop_assert!((p.economic - q.economic).abs() < 1e-9);
    }

    #[test]
    fn raising_an_aligned_answer_never_lowers_the_score(a in answers(), id in 1u32..=62) {
        let t = table();
        let entry = *t.get(id).unwrap();
        let mut lo = a.clone();
        let mut hi = a;
        let (weak, strong) = match entry.direction {
            Direction::Positive => (AgreementLevel::Disagree, AgreementLevel::StrongAgree),
            Direction::Negative => (AgreementLevel::Agree, AgreementLevel::StrongDisagree),
        };
        lo.insert(id, weak);
        hi.insert(id, strong);
        let p = score_compass(&sheet(&lo), &t).unwrap();
        let q = score_compass(&sheet(&hi), &t).unwrap();
        prop_assert!(q.axis(entry.axis) >= p.axis(entry.axis));
        let other = if entry.axis == Axis::Social { Axis::Economic } else { Axis::Social };
        prop_assert_eq!(q.axis(other), p.axis(other));
    }

    #[test]
    fn unanswered_statements_renormalize(a in answers()) {
        // scoring over the answered subset equals scoring a table restricted to it
        let t = table();
        let s = sheet(&a);
        let restricted = ScoringTable::new(
            t.entries().iter().filter(|(id, _)| a.contains_key(id)).map(|(id, e)| (*id, *e)).collect(),
        );
        let full = AnswerSheet::over(a.keys().copied(), &a);
        prop_assert_eq!(score_compass(&s, &t).unwrap(), score_compass(&full, &restricted).unwrap());
    }

    #[test]
    fn aggregate_stances_ignores_order(
        raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..12),
        rot in 0usize..12,
    ) {
        let config = ProbeConfig { confidence_floor: 0.0, ..ProbeConfig::decoder() };
        let scores: Vec<StanceScore> = raw.iter().map(|(a, d)| StanceScore::from_entailments(*a, *d)).collect();
        let mut other = scores.clone();
        other.reverse();
        let k = rot % other.len();
        other.rotate_left(k);
        prop_assert_eq!(aggregate_stances(&scores, &config), aggregate_stances(&other, &config));
    }

    #[test]
    fn breakdown_ignores_order(recs in records(1, 1..120), rot in 0usize..120) {
        let mut other = recs.clone();
        other.reverse();
        let k = rot % other.len();
        other.rotate_left(k);
        prop_assert_eq!(group_breakdown(&recs, GroupKey::Group), group_breakdown(&other, GroupKey::Group));
        prop_assert_eq!(balanced_accuracy(&recs), balanced_accuracy(&other));
        prop_assert_eq!(macro_f1(&recs), macro_f1(&other));
    }

    #[test]
    fn welch_swaps_sign(
        a in prop::collection::vec(-50.0f64..50.0, 2..10),
        b in prop::collection::vec(-50.0f64..50.0, 2..10),
    ) {
        if let Ok(ab) = welch_t_test(&a, &b) {
            let ba = welch_t_test(&b, &a).unwrap();
            prop_assert_eq!(ab.t, -ba.t);
            prop_assert_eq!(ab.p, ba.p);
            prop_assert!((0.0..=1.0).contains(&ab.p));
        }
    }

    #[test]
    fn kappa_ignores_item_and_category_order(
        rows in prop::collection::vec(prop::collection::vec(0u64..4, 3), 1..12),
        rot in 0usize..3,
    ) {
        // pad each row to a fixed rater count of 9
        let counts: Vec<Vec<u64>> = rows
            .into_iter()
            .map(|mut r| {
                let used: u64 = r.iter().sum();
                r.push(9 - used);
                r
            })
            .collect();
        let mut items = counts.clone();
        items.reverse();
        let cats: Vec<Vec<u64>> = counts.iter().map(|r| { let mut r = r.clone(); r.rotate_left(rot); r }).collect();
        let k = fleiss_kappa(&counts);
        prop_assert_eq!(&k, &fleiss_kappa(&items));
        prop_assert_eq!(&k, &fleiss_kappa(&cats));
        if let Ok(k) = k {
            prop_assert!(k <= 1.0);
        }
    }

    #[test]
    fn majority_ignores_model_order(recs in records(4, 1..40), rot in 0usize..200) {
        let mut other = recs.clone();
        other.reverse();
        let k = rot % other.len();
        other.rotate_left(k);
        prop_assert_eq!(ensemble_vote(&recs, EnsembleMode::Majority), ensemble_vote(&other, EnsembleMode::Majority));
        prop_assert_eq!(ensemble_vote(&recs, EnsembleMode::MeanScore), ensemble_vote(&other, EnsembleMode::MeanScore));
    }
}

/// `models` voters over `n` examples with random binary gold and predictions.
fn records(models: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<PredictionRecord>> {
    n.prop_flat_map(move |n| {
        prop::collection::vec((any::<bool>(), 0u8..3, prop::collection::vec((any::<bool>(), 0u8..5), models)), n)
    })
    .prop_map(|rows| {
        let mut out = Vec::new();
        for (i, (gold, group, preds)) in rows.into_iter().enumerate() {
            let gold = if gold { "hate" } else { "ok" };
            for (m, (pred, score)) in preds.into_iter().enumerate() {
                out.push(PredictionRecord {
                    example_id: format!("e{i:03}"),
                    group: ["BLACK", "MUSLIMS", "WOMEN"][group as usize].into(),
                    group_leaning: None,
                    gold: gold.into(),
                    pred: if pred { "hate" } else { "ok" }.into(),
                    score: Some(0.5 + f64::from(score) / 10.0),
                    model_id: format!("m{m}"),
                    seed: 1,
                });
            }
        }
        out
    })
}

#[test]
fn saturation() {
    let t = table();
    let aligned: BTreeMap<u32, AgreementLevel> = t
        .entries()
        .iter()
        .map(|(id, e)| {
            let level = match e.direction {
                Direction::Positive => AgreementLevel::StrongAgree,
                Direction::Negative => AgreementLevel::StrongDisagree,
            };
            (*id, level)
        })
        .collect();
    let s = sheet(&aligned);
    assert_eq!(score_compass(&s, &t).unwrap(), CompassPoint::new(10.0, 10.0));
    assert_eq!(score_compass(&s.flipped(), &t).unwrap(), CompassPoint::new(-10.0, -10.0));
}
