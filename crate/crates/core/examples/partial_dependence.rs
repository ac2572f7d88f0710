//! Partial dependence of the regularized encoded model on default risk and
//! the two utilization ratios, against the oracle.
use credit_response::design::default_design;
use credit_response::domain::CustomerRecord;
use credit_response::evaluation::{partial_dependence, treatment_grid, FeatureKey, Partition};
use credit_response::gbdt::GbdtParams;
use credit_response::response::{fit_response, ModelSpec, Regularization, TreatmentTransform, Variant};
use credit_response::simulator::{build_dataset, SimulationSpec};

fn main() -> credit_response::Result<()> {
    let spec = SimulationSpec::default();
    let data = build_dataset(&spec, &default_design())?;
    let model = fit_response(
        &data.train,
        &ModelSpec {
            variant: Variant::EncodedOutcomeRegression,
            transform: TreatmentTransform::LogShift { k: 20_000.0 },
            regularization: Regularization::L1 { lambda: 100.0 },
            encoder: GbdtParams::default(),
        },
    )?;
    let customers: Vec<CustomerRecord> = data.test.iter().map(|r| r.customer.clone()).collect();
    let grid = treatment_grid(30_000.0, 1_000.0)?;

    for feature in [FeatureKey::ProbDefault, FeatureKey::BalanceToLimit, FeatureKey::SpendToLimit] {
        let partition = Partition::quantiles(feature, &customers, 5)?;
        let fitted = partial_dependence(&model, &customers, &partition, &grid)?;
        let oracle = partial_dependence(&spec.ground_truth, &customers, &partition, &grid)?;
        println!("\n{feature}: gain from 0 to 30k");
        for (m, o) in fitted.iter().zip(&oracle) {
            println!(
                "  ({:>8.4}, {:>8.4}]  model {:>9.0}  oracle {:>9.0}",
                m.lower,
                m.upper,
                m.total_gain(),
                o.total_gain()
            );
        }
    }
    Ok(())
}
