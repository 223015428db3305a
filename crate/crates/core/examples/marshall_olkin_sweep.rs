// Common-shock dependence: root fraction of branch 1 as the shock intensity
// grows, with marginal rates held fixed and with idiosyncratic rates held
// fixed.

use riskalloc::joint_models::MarshallOlkin;
use riskalloc::solvers::{sweep_model_parameter, SolverConfig};
use riskalloc::{Indicator, JointModel};

pub fn run_example() -> riskalloc::Result<()> {
    let base: JointModel = MarshallOlkin::new(0.0, 0.05, 0.25)?.into();
    let grid = [0.0, 0.01, 0.02, 0.03, 0.04];
    let config = SolverConfig::default();
    for (label, hold) in [("marginal rates fixed", true), ("idiosyncratic rates fixed", false)] {
        println!("{label}:");
        for row in sweep_model_parameter(&base, "lambda0", &grid, 50.0, Indicator::I, hold, &config) {
            match row.beta_frac {
                Some(b) => println!("  lambda0={:<5} beta={b:.6}", row.parameter),
                None => println!("  lambda0={:<5} {:?}", row.parameter, row.status),
            }
        }
    }
    Ok(())
}

fn main() {
    run_example().expect("marshall-olkin example");
}
