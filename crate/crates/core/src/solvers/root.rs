use serde::{Deserialize, Serialize};

use super::SolverConfig;
use crate::closed_form::{asymptotic_problem, closed_form_problem, ClosedForm, ResidualSystem};
use crate::error::{Error, Result};
use crate::indicators::{Indicator, Penalty};
use crate::joint_models::JointModel;

const INTERIOR: f64 = 1e-12;
const JACOBIAN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexSolution {
    pub fractions: Vec<f64>,
    /// Max-norm of the log-ratio residual at `fractions`.
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Brent's method on `[lo, hi]`.
pub fn solve_bracketed(f: impl Fn(f64) -> f64, lo: f64, hi: f64, config: &SolverConfig) -> Result<f64> {
    brent(&f, lo, hi, config).map(|(x, _)| x)
}

fn brent(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, config: &SolverConfig) -> Result<(f64, usize)> {
    config.validate()?;
    let tol = config.abs_tol;
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() || fa * fb > 0.0 {
        return Err(Error::Bracket { lo, hi, f_lo: fa, f_hi: fb });
    }
    if fa == 0.0 {
        return Ok((a, 0));
    }
    if fb == 0.0 {
        return Ok((b, 0));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=config.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + f64::MIN_POSITIVE;
        let m = 0.5 * (c - b);
        if fb.abs() <= tol || m.abs() <= tol1 {
            return Ok((b, iter));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b);
    }
    Err(Error::Convergence { iterations: config.max_iter, last_iterate: vec![b], residual_norm: fb.abs() })
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

fn project(alpha: &mut [f64]) {
    for a in alpha.iter_mut() {
        *a = a.clamp(INTERIOR, 1.0 - INTERIOR);
    }
    let s: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= s);
}

fn full(x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    a.push(1.0 - x.iter().sum::<f64>());
    a
}

/// Solves `A z = b` by Gaussian elimination with partial pivoting.
fn linear_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > 1e-300) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * z[k]).sum();
        z[row] = (b[row] - s) / a[row][row];
    }
    z.iter().all(|v| v.is_finite()).then_some(z)
}

struct NewtonOutcome {
    alpha: Vec<f64>,
    norm: f64,
    iterations: usize,
    converged: bool,
}

fn newton(system: &ResidualSystem, start: &[f64], config: &SolverConfig) -> NewtonOutcome {
    let d = system.dim();
    let mut alpha = start.to_vec();
    project(&mut alpha);
    let mut r = system.log_residual(&alpha);
    let mut norm = max_norm(&r);
    for iter in 1..=config.max_iter {
        if norm <= config.abs_tol {
            return NewtonOutcome { alpha, norm, iterations: iter - 1, converged: true };
        }
        let x = &alpha[..d - 1];
        let mut jac = vec![vec![0.0; d - 1]; d - 1];
        for k in 0..d - 1 {
            let h = JACOBIAN_STEP.min(0.5 * x[k]).min(0.5 * alpha[d - 1]);
            let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
            xp[k] += h;
            xm[k] -= h;
            let (rp, rm) = (system.log_residual(&full(&xp)), system.log_residual(&full(&xm)));
            for row in 0..d - 1 {
                jac[row][k] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        let Some(step) = linear_solve(jac, r.iter().map(|v| -v).collect()) else {
            break;
        };
        let mut t = config.newton_damping;
        let mut improved = false;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&step).map(|(xi, si)| xi + t * si).collect();
            let mut cand = full(&xn);
            project(&mut cand);
            let rc = system.log_residual(&cand);
            let nc = max_norm(&rc);
            if nc < norm {
                alpha = cand;
                r = rc;
                norm = nc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            let converged = norm <= config.abs_tol;
            return NewtonOutcome { alpha, norm, iterations: iter, converged };
        }
    }
    let converged = norm <= config.abs_tol;
    NewtonOutcome { alpha, norm, iterations: config.max_iter, converged }
}

/// Golden-section search for the smallest residual norm on the segment
/// between `from` and `to`.
fn segment_search(system: &ResidualSystem, from: &[f64], to: &[f64]) -> Vec<f64> {
    let point = |t: f64| {
        let mut a: Vec<f64> = from.iter().zip(to).map(|(f, g)| f + t * (g - f)).collect();
        project(&mut a);
        a
    };
    let norm = |t: f64| max_norm(&system.log_residual(&point(t)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, 1.0);
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (norm(x1), norm(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = norm(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = norm(x2);
        }
    }
    point(0.5 * (a + b))
}

/// Root of a residual system on the open simplex. Bivariate systems are
/// solved by Brent on `beta = alpha_1`; larger ones by damped Newton from the
/// uniform point, retried from the best point on the segment towards the
/// system hint.
pub fn solve_simplex(system: &ResidualSystem, config: &SolverConfig) -> Result<SimplexSolution> {
    config.validate()?;
    let d = system.dim();
    if d < 2 {
        return Err(Error::domain("systems need at least two branches"));
    }
    if d == 2 {
        let f = |b: f64| system.log_residual_at(b);
        let (beta, iterations) = brent(&f, INTERIOR, 1.0 - INTERIOR, config)?;
        let fractions = vec![beta, 1.0 - beta];
        let residual_norm = max_norm(&system.log_residual(&fractions));
        return Ok(SimplexSolution { fractions, residual_norm, iterations });
    }
    let uniform = vec![1.0 / d as f64; d];
    let first = newton(system, &uniform, config);
    if first.converged {
        return Ok(SimplexSolution { fractions: first.alpha, residual_norm: first.norm, iterations: first.iterations });
    }
    let target = system.hint().map(<[f64]>::to_vec).unwrap_or_else(|| first.alpha.clone());
    let restart = segment_search(system, &uniform, &target);
    let second = newton(system, &restart, config);
    let iterations = first.iterations + second.iterations;
    if second.converged {
        return Ok(SimplexSolution { fractions: second.alpha, residual_norm: second.norm, iterations });
    }
    let best = if second.norm <= first.norm { second } else { first };
    Err(Error::Convergence { iterations, last_iterate: best.alpha, residual_norm: best.norm })
}

fn finish(problem: ClosedForm, config: &SolverConfig) -> Result<SimplexSolution> {
    match problem {
        ClosedForm::Direct(fractions) => Ok(SimplexSolution { fractions, residual_norm: 0.0, iterations: 0 }),
        ClosedForm::System(system) => solve_simplex(&system, config),
    }
}

/// Optimal fractions for `indicator` at capital `u` from the model's
/// closed-form equations.
pub fn solve_closed_form(
    model: &JointModel,
    indicator: Indicator,
    u: f64,
    penalty: &Penalty,
    config: &SolverConfig,
) -> Result<SimplexSolution> {
    finish(closed_form_problem(model, indicator, u, penalty)?, config)
}

/// Large-capital limit of the optimal fractions.
pub fn solve_asymptotic(model: &JointModel, indicator: Indicator, config: &SolverConfig) -> Result<SimplexSolution> {
    finish(asymptotic_problem(model, indicator)?, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{eizo_system, eizv_system, fgm_residual, pareto_asymptotic_i_system};
    use proptest::prelude::*;

    #[test]
    fn brent_examples() {
        let c = SolverConfig::default();
        let x = solve_bracketed(|x| x - 0.25, 0.0, 1.0, &c).unwrap();
        assert!((x - 0.25).abs() < 1e-10);
        assert!(matches!(solve_bracketed(|x| x * x + 1.0, -1.0, 1.0, &c), Err(Error::Bracket { .. })));
    }

    #[test]
    fn fgm_at_zero_theta_has_the_independent_root() {
        let c = SolverConfig::default();
        let fgm = solve_bracketed(|b| fgm_residual(0.05, 0.25, 0.0, 50.0, b).unwrap(), 1e-9, 1.0 - 1e-9, &c).unwrap();
        let eizo = solve_simplex(&eizo_system(&[0.05, 0.25], 50.0).unwrap(), &c).unwrap();
        assert!((fgm - eizo.fractions[0]).abs() < 1e-8, "{fgm} {:?}", eizo.fractions);
    }

    #[test]
    fn pareto_scalar_root() {
        let sys = pareto_asymptotic_i_system(2.0, &[1.0, 2.0]).unwrap();
        let c = SolverConfig::default();
        let b = solve_bracketed(|b| sys.log_residual_at(b), 1e-9, 1.0 - 1e-9, &c).unwrap();
        assert!((b - 0.3732).abs() < 1e-4);
    }

    #[test]
    fn three_branch_exponential_approaches_asymptote() {
        let c = SolverConfig::default();
        let s = solve_simplex(&eizo_system(&[0.5, 1.0, 2.0], 200.0).unwrap(), &c).unwrap();
        assert!(s.residual_norm <= 1e-10);
        for (a, b) in s.fractions.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert!((a - b).abs() < 1e-2);
        }
        let sj = solve_simplex(&eizv_system(&[0.5, 1.0, 2.0], 200.0).unwrap(), &c).unwrap();
        assert!(sj.residual_norm <= 1e-10 && sj.fractions[0] > 0.8);
    }

    #[test]
    fn permuted_system_has_permuted_root() {
        let c = SolverConfig::default();
        let a = solve_simplex(&eizo_system(&[0.5, 1.0, 2.0], 30.0).unwrap(), &c).unwrap();
        let b = solve_simplex(&eizo_system(&[2.0, 0.5, 1.0], 30.0).unwrap(), &c).unwrap();
        for (x, y) in [(0, 1), (1, 2), (2, 0)] {
            assert!((a.fractions[x] - b.fractions[y]).abs() < 1e-8);
        }
    }

    #[test]
    fn rescaling_does_not_move_the_root() {
        let c = SolverConfig::default();
        let sys = eizo_system(&[0.5, 1.0, 2.0, 3.0], 15.0).unwrap();
        let a = solve_simplex(&sys, &c).unwrap();
        let b = solve_simplex(&sys.scaled(1e-30), &c).unwrap();
        for (x, y) in a.fractions.iter().zip(&b.fractions) {
            assert!((x - y).abs() <= c.abs_tol);
        }
    }

    #[test]
    fn failure_is_reported_with_diagnostics() {
        let sys = crate::closed_form::ResidualSystem::new(3, "no root", |a: &[f64]| vec![0.0, 1.0 + a[1], 2.0], None);
        let c = SolverConfig { max_iter: 5, ..Default::default() };
        match solve_simplex(&sys, &c) {
            Err(Error::Convergence { last_iterate, residual_norm, .. }) => {
                assert_eq!(last_iterate.len(), 3);
                assert!(residual_norm > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn exponential_scale_homogeneity(b1 in 0.1f64..2.0, b2 in 0.1f64..2.0, k in 0.2f64..5.0) {
            prop_assume!((b1 - b2).abs() > 0.05);
            let c = SolverConfig::default();
            let a = solve_simplex(&eizo_system(&[b1, b2], 10.0).unwrap(), &c).unwrap();
            let s = solve_simplex(&eizo_system(&[b1 / k, b2 / k], 10.0 * k).unwrap(), &c).unwrap();
            prop_assert!((a.fractions[0] - s.fractions[0]).abs() < 1e-8);
        }

        #[test]
        fn smaller_rate_gets_more_capital(b1 in 0.05f64..2.0, b2 in 0.05f64..2.0, u in 1.0f64..60.0) {
            prop_assume!((b1 - b2).abs() > 1e-3);
            let s = solve_simplex(&eizo_system(&[b1, b2], u).unwrap(), &SolverConfig::default()).unwrap();
            prop_assert_eq!(b1 < b2, s.fractions[0] > s.fractions[1]);
        }
    }
}
