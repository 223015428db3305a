// Monte Carlo indicators and a stationarity certificate at the closed-form
// root.

use riskalloc::indicators::{estimate_all, stationarity_certificate};
use riskalloc::joint_models::MarshallOlkin;
use riskalloc::solvers::{solve_closed_form, SolverConfig};
use riskalloc::{Allocation, Indicator, JointModel, Penalty, Side};

pub fn run_example() -> riskalloc::Result<()> {
    let model: JointModel = MarshallOlkin::new(0.1, 0.05, 0.1)?.into();
    let u = 30.0;
    let penalty = Penalty::absolute();
    let root = solve_closed_form(&model, Indicator::I, u, &penalty, &SolverConfig::default())?;
    let at_root = Allocation::from_fractions(&root.fractions, u)?;
    for alloc in [Allocation::uniform(2, u)?, at_root.clone()] {
        let t = estimate_all(&model, &alloc, &penalty, 400_000, 11)?;
        println!(
            "capitals {:.3?}: I={:.4}±{:.4} J={:.4}±{:.4} I_loc={:.4}±{:.4}",
            alloc.capitals(), t.i.value, t.i.std_error, t.j.value, t.j.std_error, t.i_loc.value, t.i_loc.std_error
        );
    }
    let cert = stationarity_certificate(&model, &at_root, Side::Lower, 400_000, 12, 4.0)?;
    println!("certificate at root: z={:.2} passed={}", cert.max_z, cert.passed);

    let squared = Penalty::power(2.0)?;
    let t = estimate_all(&model, &at_root, &squared, 400_000, 11)?;
    println!("squared penalty at the same allocation: I={:.4} J={:.4}", t.i.value, t.j.value);
    Ok(())
}

fn main() {
    run_example().expect("monte carlo example");
}
