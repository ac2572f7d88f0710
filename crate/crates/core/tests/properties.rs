use credit_response::design::{assign_treatment, default_design, design_propensity};
use credit_response::domain::{
    encode_features, fit_standardizer, CreditRating, CustomerRecord, DUMMY_OFFSET, CUSTOMER_WIDTH,
};
use credit_response::evaluation::{build_groups, rmae, BinSpec};
use credit_response::gbdt::{fit_encoder, GbdtParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn record() -> impl Strategy<Value = CustomerRecord> {
    (
        0.0..1.0f64,
        0usize..6,
        prop::array::uniform5(0.0..50_000.0f64),
        1.0..100_000.0f64,
    )
        .prop_map(|(pd, rating, c, limit)| CustomerRecord {
            customer_id: "p".into(),
            prob_default: pd,
            credit_rating: CreditRating::ALL[rating],
            avg_spend_3m: c[0],
            avg_spend_6m: c[1],
            max_spend_12m: c[2],
            avg_balance_3m: c[3],
            avg_balance_6m: c[4],
            current_limit: limit,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardizer_round_trips(records in prop::collection::vec(record(), 3..40)) {
        let std = fit_standardizer(records.iter());
        prop_assume!(std.is_ok());
        let std = std.unwrap();
        for r in &records {
            let raw = r.raw_features().unwrap();
            let back = std.inverse_transform(&std.transform(&raw).unwrap()).unwrap();
            for (a, b) in raw.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn rating_block_is_one_hot(records in prop::collection::vec(record(), 3..20)) {
        let std = fit_standardizer(records.iter());
        prop_assume!(std.is_ok());
        let std = std.unwrap();
        for r in &records {
            let x = encode_features(r, &std).unwrap();
            let block = &x.values()[DUMMY_OFFSET..CUSTOMER_WIDTH];
            prop_assert_eq!(block.iter().sum::<f64>(), 1.0);
            prop_assert_eq!(block[r.credit_rating.index()], 1.0);
        }
    }

    #[test]
    fn leaf_code_has_one_hot_per_tree(
        records in prop::collection::vec(record(), 10..60),
        trees in 1usize..6,
        depth in 1usize..4,
    ) {
        let x: Vec<_> = records.iter().map(|r| r.raw_features().unwrap()).collect();
        let y: Vec<f64> = records.iter().map(|r| r.avg_balance_6m - r.prob_default * 1e4).collect();
        let params = GbdtParams { num_trees: trees, max_depth: depth, min_samples_leaf: 2, ..Default::default() };
        let model = fit_encoder(&x, &y, &params).unwrap();
        let offsets = model.block_offsets();
        for v in &x {
            let code = model.encode_leaves(v).unwrap();
            prop_assert_eq!(code.len(), model.total_leaves());
            prop_assert_eq!(code.values().iter().sum::<f64>(), trees as f64);
            for (t, &start) in offsets.iter().enumerate() {
                let end = offsets.get(t + 1).copied().unwrap_or(code.len());
                prop_assert_eq!(code.values()[start..end].iter().sum::<f64>(), 1.0);
            }
        }
    }

    #[test]
    fn assignments_stay_on_menu(seed in any::<u64>(), rating in 0usize..6) {
        let design = default_design();
        let rating = CreditRating::ALL[rating];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let t = assign_treatment(&design, rating, &mut rng).unwrap();
            prop_assert!(design_propensity(&design, rating, t).unwrap() > 0.0);
        }
    }

    #[test]
    fn every_record_lands_in_one_group(
        records in prop::collection::vec(record(), 1..80),
        bins in prop::collection::vec(1usize..10, 1..4),
    ) {
        let names = ["prob_default", "current_limit", "avg_spend_6m", "avg_balance_6m"];
        let spec: Vec<BinSpec> = bins.iter().zip(names).map(|(&b, f)| BinSpec::new(f, b)).collect();
        let groups = build_groups(&records, &spec).unwrap();
        let mut seen = vec![0; records.len()];
        for idx in groups.groups().values() {
            prop_assert!(!idx.is_empty());
            for &i in idx {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for (i, r) in records.iter().enumerate() {
            prop_assert!(groups.groups()[&groups.key_of(r)].contains(&i));
        }
    }

    #[test]
    fn rmae_is_scale_free_and_nonnegative(
        records in prop::collection::vec(record(), 5..50),
        c in 0.01..1000.0f64,
    ) {
        let groups = build_groups(&records, &[BinSpec::new("prob_default", 3)]).unwrap();
        let y: Vec<f64> = records.iter().map(|r| r.avg_balance_6m + 1.0).collect();
        let p: Vec<f64> = records.iter().map(|r| r.avg_balance_3m).collect();
        let a = rmae(&groups, &y, &p, "m").unwrap().rmae;
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
        let b = rmae(&groups, &ys, &ps, "m").unwrap().rmae;
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}

#[test]
fn propensities_sum_to_one() {
    let design = default_design();
    for rating in design.subgroups() {
        let total: f64 = design
            .menu(rating)
            .unwrap()
            .iter()
            .map(|e| design_propensity(&design, rating, e.t).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
