// Simulation-only optimization: entropic mirror descent compared with the
// closed-form root.

use riskalloc::joint_models::IndependentExponential;
use riskalloc::solvers::{mirror_descent_minimize, solve_closed_form, MirrorSchedule, SolverConfig};
use riskalloc::{Indicator, JointModel, Penalty};

pub fn run_example() -> riskalloc::Result<()> {
    let model: JointModel = IndependentExponential::new(vec![0.05, 0.25])?.into();
    let u = 50.0;
    let penalty = Penalty::absolute();
    let schedule = MirrorSchedule { iterations: 1000, batch: 5000, ..Default::default() };
    for indicator in [Indicator::I, Indicator::J] {
        let exact = solve_closed_form(&model, indicator, u, &penalty, &SolverConfig::default())?;
        let md = mirror_descent_minimize(&model, u, indicator, &penalty, &schedule, 2024)?;
        println!(
            "{indicator}: closed form u1={:.3}, mirror descent u1={:.3}",
            exact.fractions[0] * u,
            md.capitals()[0]
        );
    }
    Ok(())
}

fn main() {
    run_example().expect("mirror descent example");
}
