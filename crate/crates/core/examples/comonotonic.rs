// Comonotonic branches: the allocation equalizing the marginal cdf levels,
// for exponential, log-normal and Pareto margins.

use riskalloc::closed_form::comonotonic_allocation;
use riskalloc::marginals::Marginal;

pub fn run_example() -> riskalloc::Result<()> {
    let cases = [
        ("exponential", vec![Marginal::exponential(0.05)?, Marginal::exponential(0.25)?], 50.0),
        ("log-normal", vec![Marginal::log_normal(0.0, 0.5)?, Marginal::log_normal(2f64.ln(), 0.5)?], 3.0),
        ("pareto", vec![Marginal::pareto(3.0, 1.0)?, Marginal::pareto(3.0, 3.0)?], 8.0),
        ("mixed", vec![Marginal::gamma(2.0, 0.5)?, Marginal::exponential(0.3)?, Marginal::log_normal(1.0, 0.4)?], 12.0),
    ];
    for (name, marginals, u) in &cases {
        let a = comonotonic_allocation(marginals, *u)?;
        let level = marginals[0].cdf(a.capitals()[0]);
        println!("{name:<12} u={u:<5} capitals {:?}  common cdf level {level:.6}", a.capitals());
    }
    Ok(())
}

fn main() {
    run_example().expect("comonotonic example");
}
