// Exponential branches sharing a Gamma frailty: finite-capital I and J
// allocations and their asymptotic systems.

use riskalloc::closed_form::{
    mixture_asymptotic_i_system, mixture_asymptotic_j_system, mixture_i_system, mixture_j_system,
};
use riskalloc::joint_models::CorrelatedParetoMixture;
use riskalloc::solvers::{solve_simplex, SolverConfig};

pub fn run_example() -> riskalloc::Result<()> {
    let model = CorrelatedParetoMixture::new(2.5, 1.0, vec![1.0, 2.0, 4.0])?;
    let config = SolverConfig::default();
    for u in [1.0, 10.0, 100.0, 1000.0] {
        let i = solve_simplex(&mixture_i_system(&model, u)?, &config)?;
        let j = solve_simplex(&mixture_j_system(&model, u)?, &config)?;
        println!("u={u:<6} I {:.4?}  J {:.4?}", i.fractions, j.fractions);
    }
    let i = solve_simplex(&mixture_asymptotic_i_system(&model)?, &config)?;
    let j = solve_simplex(&mixture_asymptotic_j_system(&model)?, &config)?;
    println!("limit    I {:.4?}  J {:.4?}", i.fractions, j.fractions);
    Ok(())
}

fn main() {
    run_example().expect("mixture example");
}
