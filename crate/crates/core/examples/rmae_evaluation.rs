//! Grouped relative error: why individual-level error is the wrong lens
//! for noisy outcomes, and how the number of groups changes the picture.
use credit_response::design::default_design;
use credit_response::domain::CustomerRecord;
use credit_response::evaluation::{build_groups, default_binning, rmae, BinSpec};
use credit_response::simulator::{build_dataset, SimulationSpec};

fn main() -> credit_response::Result<()> {
    let spec = SimulationSpec::default();
    let data = build_dataset(&spec, &default_design())?;
    let customers: Vec<CustomerRecord> = data.test.iter().map(|r| r.customer.clone()).collect();
    let y: Vec<f64> = data.test.iter().map(|r| r.outcome).collect();
    let oracle = data
        .test
        .iter()
        .map(|r| spec.ground_truth.true_response(&r.customer, r.treatment))
        .collect::<credit_response::Result<Vec<_>>>()?;

    // the best possible predictor still carries the noise of each group
    for bins in [1, 3, 5, 9, 15] {
        let binning: Vec<BinSpec> = default_binning()
            .into_iter()
            .map(|b| BinSpec { bins, ..b })
            .collect();
        let groups = build_groups(&customers, &binning)?;
        let report = rmae(&groups, &y, &oracle, "oracle")?;
        println!("{bins:>2} bins/feature: {:>5} groups, oracle RMAE {:.4}", groups.len(), report.rmae);
    }
    Ok(())
}
