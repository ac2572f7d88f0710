//! Fits the outcome-regression family on one training split and prints
//! counterfactual predictions and marginal effects for a single customer.
use credit_response::design::default_design;
use credit_response::gbdt::GbdtParams;
use credit_response::response::{
    fit_outcome_encoder, fit_response_with_encoder, ModelSpec, Regularization, TreatmentTransform, Variant,
};
use credit_response::simulator::{build_dataset, SimulationSpec};

fn main() -> credit_response::Result<()> {
    let spec = SimulationSpec {
        n: 20_000,
        ..Default::default()
    };
    let data = build_dataset(&spec, &default_design())?;
    let encoder = fit_outcome_encoder(&data.train, &GbdtParams::default())?;
    let log = TreatmentTransform::LogShift { k: 20_000.0 };

    let candidates = [
        ("linear", Variant::LinearRegression, TreatmentTransform::Identity, Regularization::None),
        ("or", Variant::OutcomeRegression, TreatmentTransform::Identity, Regularization::None),
        ("or_log", Variant::OutcomeRegression, log, Regularization::None),
        ("enc_or_log_l1", Variant::EncodedOutcomeRegression, log, Regularization::L1 { lambda: 100.0 }),
    ];
    let who = &data.test[0].customer;
    let truth = &spec.ground_truth;
    println!("customer {} ({})", who.customer_id, who.credit_rating);
    println!("{:<14} {:>10} {:>10} {:>10} {:>8} {:>8}", "model", "y(0)", "y(10k)", "y(30k)", "me(0)", "me(30k)");
    for (name, variant, transform, regularization) in candidates {
        let ms = ModelSpec {
            variant,
            transform,
            regularization,
            encoder: GbdtParams::default(),
        };
        let enc = (variant == Variant::EncodedOutcomeRegression).then(|| encoder.clone());
        let m = fit_response_with_encoder(&data.train, &ms, enc)?;
        let curve = m.response_curve(who, &[0.0, 10_000.0, 30_000.0])?;
        println!(
            "{name:<14} {:>10.0} {:>10.0} {:>10.0} {:>8.3} {:>8.3}",
            curve[0].1,
            curve[1].1,
            curve[2].1,
            m.marginal_effect(who, 0.0)?,
            m.marginal_effect(who, 30_000.0)?
        );
    }
    println!(
        "{:<14} {:>10.0} {:>10.0} {:>10.0} {:>8.3} {:>8.3}",
        "oracle",
        truth.true_response(who, 0.0)?,
        truth.true_response(who, 10_000.0)?,
        truth.true_response(who, 30_000.0)?,
        truth.true_marginal_effect(who, 0.0)?,
        truth.true_marginal_effect(who, 30_000.0)?
    );
    Ok(())
}
