use credit_response::domain::{CreditRating, CustomerRecord};
use credit_response::evaluation::{build_groups, rmae, BinSpec, EvaluationReport, FeatureKey, GroupRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hand_computed_two_groups() {
    let rows = vec![
        GroupRow {
            key: vec![0],
            w: 2,
            y: 10.0,
            y_hat: 12.0,
        },
        GroupRow {
            key: vec![1],
            w: 3,
            y: 20.0,
            y_hat: 17.0,
        },
    ];
    assert_eq!(EvaluationReport::from_rows("hand", rows).unwrap().rmae, 0.1625);
}

fn random_records(rng: &mut ChaCha8Rng, n: usize) -> Vec<CustomerRecord> {
    (0..n)
        .map(|i| {
            // coarse values so that quantile edges tie
            let limit = rng.random_range(1..=8) as f64 * 1000.0;
            CustomerRecord {
                customer_id: format!("c{i}"),
                prob_default: rng.random_range(1..=12) as f64 / 100.0,
                credit_rating: CreditRating::ALL[rng.random_range(0..6)],
                avg_spend_3m: 100.0,
                avg_spend_6m: rng.random_range(0..=10) as f64 * 50.0,
                max_spend_12m: 900.0,
                avg_balance_3m: 300.0,
                avg_balance_6m: rng.random_range(0.0..limit),
                current_limit: limit,
            }
        })
        .collect()
}

fn brute_force(records: &[CustomerRecord], spec: &[(FeatureKey, usize)], y: &[f64], p: &[f64]) -> f64 {
    let n = records.len();
    let edges: Vec<Vec<f64>> = spec
        .iter()
        .map(|&(f, bins)| {
            let mut v: Vec<f64> = records.iter().map(|r| f.value(r)).collect();
            v.sort_by(f64::total_cmp);
            let mut e: Vec<f64> = (1..bins)
                .map(|j| v[((j * n) as f64 / bins as f64).ceil() as usize - 1])
                .collect();
            e.dedup();
            e
        })
        .collect();
    let key = |r: &CustomerRecord| -> Vec<usize> {
        spec.iter()
            .zip(&edges)
            .map(|(&(f, _), e)| e.iter().filter(|&&x| x < f.value(r)).count())
            .collect()
    };
    let keys: Vec<Vec<usize>> = records.iter().map(key).collect();
    let mut seen = vec![false; n];
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let members: Vec<usize> = (i..n).filter(|&j| keys[j] == keys[i]).collect();
        let w = members.len() as f64;
        let gy = members.iter().map(|&j| y[j]).sum::<f64>() / w;
        let gp = members.iter().map(|&j| p[j]).sum::<f64>() / w;
        for &j in &members {
            seen[j] = true;
        }
        num += w * (gp - gy).abs();
        den += w * gy;
    }
    num / den
}

fn bin_specs(spec: &[(FeatureKey, usize)]) -> Vec<BinSpec> {
    spec.iter().map(|(f, b)| BinSpec::new(f.name(), *b)).collect()
}

#[test]
fn matches_brute_force_grouping() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let features = [
        FeatureKey::ProbDefault,
        FeatureKey::CurrentLimit,
        FeatureKey::AvgSpend6m,
        FeatureKey::BalanceToLimit,
    ];
    for trial in 0..100 {
        let records = random_records(&mut rng, 100);
        let mut spec = Vec::new();
        for f in features {
            if rng.random_bool(0.7) {
                spec.push((f, rng.random_range(1..=6)));
            }
        }
        let y: Vec<f64> = (0..100).map(|_| rng.random_range(-50.0..150.0)).collect();
        let p: Vec<f64> = y.iter().map(|v| v + rng.random_range(-40.0..40.0)).collect();

        let groups = build_groups(&records, &bin_specs(&spec)).unwrap();
        let total: usize = groups.groups().values().map(Vec::len).sum();
        assert_eq!(total, 100);
        let ours = rmae(&groups, &y, &p, "m").unwrap().rmae;
        let oracle = brute_force(&records, &spec, &y, &p);
        assert!((ours - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "trial {trial}: {ours} vs {oracle}");
    }
}

#[test]
fn invariant_to_common_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let records = random_records(&mut rng, 100);
    let spec = [(FeatureKey::ProbDefault, 4), (FeatureKey::CurrentLimit, 3)];
    let groups = build_groups(&records, &bin_specs(&spec)).unwrap();
    let y: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..100.0)).collect();
    let p: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..100.0)).collect();
    let base = rmae(&groups, &y, &p, "m").unwrap().rmae;
    let c = 7.3;
    let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
    let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
    let scaled = rmae(&groups, &ys, &ps, "m").unwrap().rmae;
    assert!((base - scaled).abs() <= 1e-12 * base);
}

#[test]
fn negative_mean_outcome_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let records = random_records(&mut rng, 40);
    let groups = build_groups(&records, &bin_specs(&[(FeatureKey::ProbDefault, 2)])).unwrap();
    let y = vec![-1.0; 40];
    assert!(rmae(&groups, &y, &y, "m").is_err());
}
