//! Average response curves per subgroup for the single GBDT, the log
//! outcome regression and the oracle. The GBDT is flat between menu
//! treatments.
use credit_response::design::default_design;
use credit_response::domain::CustomerRecord;
use credit_response::evaluation::ablation_curves;
use credit_response::gbdt::GbdtParams;
use credit_response::response::{
    fit_response, ModelSpec, Regularization, ResponseSurface, SingleGbdt, TreatmentTransform, Variant,
};
use credit_response::simulator::{build_dataset, SimulationSpec};

fn main() -> credit_response::Result<()> {
    let spec = SimulationSpec::default();
    let design = default_design();
    let data = build_dataset(&spec, &design)?;

    let gbdt = SingleGbdt::fit(&data.train, &GbdtParams::default())?;
    let or_log = fit_response(
        &data.train,
        &ModelSpec {
            variant: Variant::OutcomeRegression,
            transform: TreatmentTransform::LogShift { k: 20_000.0 },
            regularization: Regularization::None,
            encoder: GbdtParams::default(),
        },
    )?;
    let models: [&dyn ResponseSurface; 3] = [&gbdt, &or_log, &spec.ground_truth];
    let customers: Vec<CustomerRecord> = data.test.iter().map(|r| r.customer.clone()).collect();
    let curves = ablation_curves(&models, &customers, &design, spec.treatment_unit, 5_000.0)?;

    for (rating, avg) in &curves {
        println!("\n{} ({} customers)", rating.name(), avg.members);
        println!("{:>8} {:>10} {:>10} {:>10}", "T", "gbdt", "or_log", "oracle");
        for (i, t) in avg.grid.iter().enumerate() {
            println!(
                "{t:>8} {:>10.0} {:>10.0} {:>10.0}",
                avg.curves[0][i], avg.curves[1][i], avg.curves[2][i]
            );
        }
    }
    Ok(())
}
