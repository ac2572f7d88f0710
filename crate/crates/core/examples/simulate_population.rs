//! Draws a synthetic campaign and compares the noisy outcomes with the
//! noiseless oracle.
use credit_response::design::default_design;
use credit_response::domain::CreditRating;
use credit_response::simulator::{build_dataset, SimulationSpec};

fn main() -> credit_response::Result<()> {
    let spec = SimulationSpec {
        n: 20_000,
        seed: 7,
        ..Default::default()
    };
    let data = build_dataset(&spec, &default_design())?;
    println!("train {} / test {}", data.train.len(), data.test.len());

    let truth = &spec.ground_truth;
    println!(
        "{:<11} {:>6} {:>10} {:>12} {:>12}",
        "subgroup", "n", "mean pd", "mean y", "mean E[y]"
    );
    for rating in CreditRating::ALL {
        let rows: Vec<_> = data.train.iter().filter(|r| r.customer.credit_rating == rating).collect();
        let n = rows.len() as f64;
        let pd = rows.iter().map(|r| r.customer.prob_default).sum::<f64>() / n;
        let y = rows.iter().map(|r| r.outcome).sum::<f64>() / n;
        let mut ey = 0.0;
        for r in &rows {
            ey += truth.true_response(&r.customer, r.treatment)?;
        }
        println!("{:<11} {:>6} {:>10.4} {:>12.0} {:>12.0}", rating.name(), rows.len(), pd, y, ey / n);
    }

    let c = &data.train[0].customer;
    println!("\nresponse of {} (oracle):", c.customer_id);
    for t in [0.0, 10_000.0, 20_000.0, 30_000.0] {
        println!(
            "  T={t:>6}  E[y]={:>10.0}  dE/dT={:.3}",
            truth.true_response(c, t)?,
            truth.true_marginal_effect(c, t)?
        );
    }
    Ok(())
}
