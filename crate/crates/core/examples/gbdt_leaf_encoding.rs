//! Fits a small boosted ensemble and shows the one-hot leaf encoding that
//! feeds the encoded outcome regression.
use credit_response::design::default_design;
use credit_response::gbdt::{fit_encoder, GbdtParams};
use credit_response::simulator::{build_dataset, SimulationSpec};

fn main() -> credit_response::Result<()> {
    let spec = SimulationSpec {
        n: 5_000,
        ..Default::default()
    };
    let data = build_dataset(&spec, &default_design())?;
    let x = data
        .train
        .iter()
        .map(|r| r.customer.raw_features())
        .collect::<credit_response::Result<Vec<_>>>()?;
    let y: Vec<f64> = data.train.iter().map(|r| r.outcome).collect();

    let params = GbdtParams {
        num_trees: 4,
        max_depth: 2,
        ..Default::default()
    };
    let model = fit_encoder(&x, &y, &params)?;
    println!(
        "{} trees, {} leaves, block offsets {:?}",
        model.trees().len(),
        model.total_leaves(),
        model.block_offsets()
    );

    let code = model.encode_leaves(&x[0])?;
    let hot: Vec<&str> = code
        .schema()
        .names()
        .iter()
        .zip(code.values())
        .filter(|(_, v)| **v == 1.0)
        .map(|(n, _)| n.as_str())
        .collect();
    println!("first customer lands in {hot:?}");
    println!("prediction {:.0} (observed {:.0})", model.predict(&x[0])?, y[0]);
    Ok(())
}
