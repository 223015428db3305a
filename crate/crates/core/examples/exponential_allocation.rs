// Optimal I and J allocations for independent exponential branches, and how
// they approach their large-capital limits.

use riskalloc::closed_form::{asymptotic_exponential_i, asymptotic_exponential_j, eizo_system, eizv_system};
use riskalloc::solvers::{solve_simplex, SolverConfig};

pub fn run_example() -> riskalloc::Result<()> {
    let rates = [0.5, 1.0, 2.0];
    let config = SolverConfig::default();
    println!("rates {rates:?}");
    println!("{:>6}  {:>28}  {:>28}", "u", "I fractions", "J fractions");
    for u in [5.0, 20.0, 50.0, 200.0, 500.0] {
        let i = solve_simplex(&eizo_system(&rates, u)?, &config)?;
        let j = solve_simplex(&eizv_system(&rates, u)?, &config)?;
        println!("{u:>6}  {:>28}  {:>28}", show(&i.fractions), show(&j.fractions));
    }
    println!("limit   {:>28}  {:>28}", show(&asymptotic_exponential_i(&rates)), show(&asymptotic_exponential_j(&rates)?));
    Ok(())
}

fn show(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    run_example().expect("exponential example");
}
