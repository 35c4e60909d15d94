use std::collections::BTreeSet;

use proptest::prelude::*;

use lakelens_core::ekg::matching::{brute_force_matching, max_bipartite_matching};
use lakelens_core::eval::metrics::{precision_recall_at_k, r_precision};
use lakelens_core::jointrep::model::{euclidean, triplet_loss};
use lakelens_core::profiler::minhash::{exact_jaccard, minhash_signature};
use lakelens_core::query::{drs_combine, min_max, CombineOp, Drs, DrsItem, OpRecord};
use lakelens_core::{DeId, DeKind};

fn ids(n: usize) -> Vec<DeId> {
    (0..n).map(|i| DeId::derive(DeKind::Column, "t.csv", &format!("c{i}"))).collect()
}

fn ranking_and_truth() -> impl Strategy<Value = (Vec<DeId>, BTreeSet<DeId>)> {
    (2usize..40).prop_flat_map(|n| {
        let all = ids(n);
        (Just(all.clone()).prop_shuffle(), proptest::sample::subsequence(all, 1..=n))
            .prop_map(|(ranked, truth)| (ranked, truth.into_iter().collect()))
    })
}

fn drs(name: &str, scores: &[(usize, f64)]) -> Drs {
    let all = ids(20);
    let items = scores.iter().map(|&(i, score)| DrsItem { id: all[i], score }).collect();
    Drs::new(items, OpRecord::new(name, serde_json::json!({}), vec![]), vec![])
}

fn scored_items() -> impl Strategy<Value = Vec<(usize, f64)>> {
    proptest::collection::btree_map(0usize..20, -5.0f64..5.0, 1..12).prop_map(|m| m.into_iter().collect())
}

fn is_sorted(d: &Drs) -> bool {
    d.items.windows(2).all(|w| w[0].score > w[1].score || (w[0].score == w[1].score && w[0].id < w[1].id))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn r_precision_is_recall_at_truth_size((ranked, truth) in ranking_and_truth()) {
        let (_, recall) = precision_recall_at_k(&ranked, &truth, truth.len()).unwrap();
        prop_assert_eq!(r_precision(&ranked, &truth).unwrap(), recall);
    }

    #[test]
    fn recall_never_drops_with_k((ranked, truth) in ranking_and_truth()) {
        let mut last = 0.0;
        for k in 1..=ranked.len() {
            let (p, r) = precision_recall_at_k(&ranked, &truth, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(r >= last);
            last = r;
        }
        prop_assert_eq!(last, 1.0);
    }

    #[test]
    fn matching_is_optimal_and_one_to_one(
        scores in proptest::collection::vec(proptest::collection::vec(0u32..=64, 1..6), 1..6),
        min in prop_oneof![Just(0.0), Just(0.25)],
    ) {
        let scores: Vec<Vec<f64>> = scores.into_iter().map(|r| r.into_iter().map(|k| k as f64 / 64.0).collect()).collect();
        let m = max_bipartite_matching(&scores, min);
        prop_assert_eq!(m.total, brute_force_matching(&scores, min));
        let rows: BTreeSet<usize> = m.pairs.iter().map(|p| p.0).collect();
        let cols: BTreeSet<usize> = m.pairs.iter().map(|p| p.1).collect();
        prop_assert_eq!(rows.len(), m.pairs.len());
        prop_assert_eq!(cols.len(), m.pairs.len());
        for &(r, c) in &m.pairs {
            prop_assert!(scores[r][c] >= min && scores[r][c] > 0.0);
        }
    }

    #[test]
    fn minhash_is_deterministic_and_symmetric(
        a in proptest::collection::btree_set("[a-z]{1,6}", 1..60),
        b in proptest::collection::btree_set("[a-z]{1,6}", 1..60),
        seed in any::<u64>(),
    ) {
        let sa = minhash_signature(&a, 128, seed).unwrap();
        let sb = minhash_signature(&b, 128, seed).unwrap();
        prop_assert_eq!(&sa, &minhash_signature(&a, 128, seed).unwrap());
        let j = sa.jaccard(&sb).unwrap();
        prop_assert_eq!(j, sb.jaccard(&sa).unwrap());
        prop_assert_eq!(sa.jaccard(&sa).unwrap(), 1.0);
        if exact_jaccard(&a, &b) == 0.0 {
            prop_assert!(j < 0.2);
        }
    }

    #[test]
    fn triplet_loss_is_a_hinge(
        v in proptest::collection::vec(-3.0f64..3.0, 12),
        margin in 0.0f64..2.0,
    ) {
        let (a, rest) = v.split_at(4);
        let (p, n) = rest.split_at(4);
        let loss = triplet_loss(a, p, n, margin);
        prop_assert!(loss >= 0.0);
        prop_assert!(loss >= margin + euclidean(a, p) - euclidean(a, n) - 1e-12);
        prop_assert_eq!(triplet_loss(a, a, a, margin), margin);
    }

    #[test]
    fn combine_laws(a in scored_items(), b in scored_items()) {
        let (da, db) = (drs("a", &a), drs("b", &b));
        let ab = drs_combine(&da, &db, CombineOp::Union);
        let ba = drs_combine(&db, &da, CombineOp::Union);
        let inter = drs_combine(&da, &db, CombineOp::Intersect);
        prop_assert!(is_sorted(&ab) && is_sorted(&inter));
        let ids_ab: BTreeSet<DeId> = ab.ids().into_iter().collect();
        let ids_ba: BTreeSet<DeId> = ba.ids().into_iter().collect();
        prop_assert_eq!(&ids_ab, &ids_ba);
        let ids_a: BTreeSet<DeId> = da.ids().into_iter().collect();
        let ids_b: BTreeSet<DeId> = db.ids().into_iter().collect();
        let want: BTreeSet<DeId> = ids_a.intersection(&ids_b).copied().collect();
        prop_assert_eq!(inter.ids().into_iter().collect::<BTreeSet<_>>(), want);
        for item in &ab.items {
            prop_assert!((0.0..=2.0).contains(&item.score));
        }
        for s in min_max(&da.items).values() {
            prop_assert!((0.0..=1.0).contains(s));
        }
        let last = ab.last_record().unwrap();
        prop_assert_eq!(&last.op, "drs_combine");
        prop_assert_eq!(&last.parents, &vec![da.id.clone(), db.id.clone()]);
        prop_assert_eq!(&ab.id, &last.id);
    }

    #[test]
    fn de_id_hex_round_trips(bytes in any::<[u8; 16]>()) {
        let id = DeId::from_bytes(bytes);
        prop_assert_eq!(id.to_hex().parse::<DeId>().unwrap(), id);
        let json = serde_json::to_string(&id).unwrap();
        prop_assert_eq!(serde_json::from_str::<DeId>(&json).unwrap(), id);
    }
}
