// Heavy-tailed branches: asymptotic allocations for independent Pareto-Lomax
// losses.

use riskalloc::closed_form::{iloc_allocation, pareto_asymptotic_i_system, pareto_asymptotic_j};
use riskalloc::marginals::Marginal;
use riskalloc::solvers::{solve_simplex, SolverConfig};

pub fn run_example() -> riskalloc::Result<()> {
    let shape = 2.0;
    let scales = [1.0, 2.0];
    let i = solve_simplex(&pareto_asymptotic_i_system(shape, &scales)?, &SolverConfig::default())?;
    println!("asymptotic I fractions: {:.6} {:.6}", i.fractions[0], i.fractions[1]);
    println!("asymptotic J fractions: {:?}", pareto_asymptotic_j(&scales)?);

    let marginals: Vec<Marginal> = scales.iter().map(|&b| Marginal::pareto(shape, b)).collect::<Result<_, _>>()?;
    let loc = iloc_allocation(&marginals, 100.0)?;
    println!("I_loc fractions (any capital): {:.6} {:.6}", loc.fractions()[0], loc.fractions()[1]);
    Ok(())
}

fn main() {
    run_example().expect("pareto example");
}
