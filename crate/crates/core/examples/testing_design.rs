//! Builds the default testing design, checks common support and audits
//! the realized assignment of a simulated campaign.
//!
//! ```text
//! cargo run --example testing_design
//! ```
use credit_response::design::{
    default_design, design_propensity, validate_assignment_balance, validate_common_support,
    TestingDesign,
};
use credit_response::domain::CreditRating;
use credit_response::simulator::{build_dataset, SimulationSpec};

fn main() -> credit_response::Result<()> {
    let design = default_design();
    for rating in design.subgroups() {
        let menu: Vec<String> = design
            .menu(rating)?
            .iter()
            .map(|e| format!("{}:{:.2}", e.t, e.p))
            .collect();
        println!("{:<11} {}", rating.name(), menu.join("  "));
    }
    println!(
        "P(T=100 | very_good) = {}",
        design_propensity(&design, CreditRating::VeryGood, 100.0)?
    );

    let support = validate_common_support(&design);
    println!("common support violations: {}", support.violations.len());

    // a menu that always grants the increase has no control arm
    let broken = TestingDesign::from_menus([(CreditRating::Poor, vec![(10.0, 1.0)])])?;
    for v in validate_common_support(&broken).violations {
        println!("  broken design: {v}");
    }

    let spec = SimulationSpec {
        n: 50_000,
        ..Default::default()
    };
    let data = build_dataset(&spec, &design)?;
    let mut all = data.train;
    all.extend(data.test);
    let audit = validate_assignment_balance(&all, &design, spec.treatment_unit, 0.01)?;
    println!("\nbalance audit (flag below p = {:.4})", audit.threshold);
    for row in &audit.rows {
        println!(
            "{:<11} n={:<6} chi2={:>6.2} dof={} p={:.3}{}",
            row.subgroup.name(),
            row.n,
            row.chi_square,
            row.dof,
            row.p_value,
            if row.flagged { "  FLAGGED" } else { "" }
        );
    }
    Ok(())
}
