// Root fraction of branch 1 under FGM dependence as theta moves, at three
// capital levels.

use riskalloc::joint_models::FgmExponential;
use riskalloc::solvers::{sweep_model_parameter, Grid, SolverConfig};
use riskalloc::{Indicator, JointModel};

pub fn run_example() -> riskalloc::Result<()> {
    let base: JointModel = FgmExponential::new(0.05, 0.25, 0.0)?.into();
    let grid = Grid::Range { start: -1.0, stop: 1.0, step: 0.25 }.values()?;
    for u in [40.0, 50.0, 60.0] {
        let rows = sweep_model_parameter(&base, "theta", &grid, u, Indicator::I, false, &SolverConfig::default());
        let betas: Vec<String> = rows
            .iter()
            .map(|r| r.beta_frac.map_or_else(|| "err".into(), |b| format!("{b:.5}")))
            .collect();
        println!("u={u}: {}", betas.join(" "));
    }
    Ok(())
}

fn main() {
    run_example().expect("fgm example");
}
