use super::table::{argmax, QFunction, QTable, StochasticPolicy};
use super::transform::ValueTransform;
use super::{RewardSelect, TabularMdp};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Discounts must lie strictly inside (0, 1).
pub fn check_discount(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("discount must lie in (0, 1), got {gamma}")))
    }
}

/// `v(y) = sum_b pi(b|y) f(Q(y, b))`
fn policy_values(pi: &StochasticPolicy, q: &QFunction, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..q.num_states())
        .map(|y| pi.row(y).iter().zip(q.row(y)).map(|(&p, &v)| if p == 0.0 { 0.0 } else { p * f(v) }).sum())
        .collect()
}

fn backup(mdp: &TabularMdp, next_values: &[f64], gamma: f64, select: RewardSelect, out: impl Fn(f64) -> f64) -> QFunction {
    QFunction::from_fn(mdp.num_states(), mdp.num_actions(), |x, a| {
        let expected: f64 = mdp.successors(x, a).iter().map(|&(y, p)| p * next_values[y]).sum();
        out(mdp.reward(x, a, select) + gamma * expected)
    })
}

/// One application of `T^pi Q = r + gamma P^pi Q`.
pub fn bellman_eval_step(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    q: &QFunction,
    gamma: f64,
    select: RewardSelect,
) -> Result<QFunction> {
    check_discount(gamma)?;
    mdp.check_table(q, "bellman_eval_step")?;
    mdp.check_policy(pi, "bellman_eval_step")?;
    let v = policy_values(pi, q, |z| z);
    Ok(backup(mdp, &v, gamma, select, |z| z))
}

/// One application of `T^pi_h Q = h(r + gamma P^pi h^-1(Q))`.
pub fn transformed_bellman_eval_step(
    mdp: &TabularMdp,
    pi: &StochasticPolicy,
    q: &QFunction,
    gamma: f64,
    transform: &impl ValueTransform,
    select: RewardSelect,
) -> Result<QFunction> {
    check_discount(gamma)?;
    mdp.check_table(q, "transformed_bellman_eval_step")?;
    mdp.check_policy(pi, "transformed_bellman_eval_step")?;
    let v = policy_values(pi, q, |z| transform.invert(z));
    Ok(backup(mdp, &v, gamma, select, |z| transform.apply(z)))
}

#[derive(Debug, Clone)]
pub struct ValueIterationOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Starting table; zeros when absent.
    pub initial: Option<QFunction>,
}

impl Default for ValueIterationOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 1_000_000, initial: None }
    }
}

/// Greedy value iteration `pi_k = G(Q_k)`, `Q_{k+1} = T^{pi_k} Q_k` from a zero table.
///
/// Stops at the first `Q_{k+1}` with `||Q_{k+1} - Q_k||_inf <= tol`.
pub fn value_iteration(mdp: &TabularMdp, gamma: f64, tol: f64, max_iters: usize, select: RewardSelect) -> Result<QFunction> {
    run_value_iteration(mdp, gamma, select, &ValueIterationOptions { tol, max_iters, initial: None }, &super::IdentityTransform)
}

pub fn value_iteration_from(
    mdp: &TabularMdp,
    initial: QFunction,
    gamma: f64,
    tol: f64,
    max_iters: usize,
    select: RewardSelect,
) -> Result<QFunction> {
    let opts = ValueIterationOptions { tol, max_iters, initial: Some(initial) };
    run_value_iteration(mdp, gamma, select, &opts, &super::IdentityTransform)
}

/// Transformed greedy scheme `Q_{k+1} = h(r + gamma P^{G(Q_k)} h^-1(Q_k))`.
pub fn transformed_value_iteration(
    mdp: &TabularMdp,
    gamma: f64,
    transform: &impl ValueTransform,
    opts: &ValueIterationOptions,
    select: RewardSelect,
) -> Result<QFunction> {
    run_value_iteration(mdp, gamma, select, opts, transform)
}

fn run_value_iteration(
    mdp: &TabularMdp,
    gamma: f64,
    select: RewardSelect,
    opts: &ValueIterationOptions,
    transform: &impl ValueTransform,
) -> Result<QFunction> {
    check_discount(gamma)?;
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut q = match &opts.initial {
        Some(q0) => {
            mdp.check_table(q0, "value_iteration initial table")?;
            q0.clone()
        }
        None => QFunction::zeros(mdp.num_states(), mdp.num_actions()),
    };
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let v: Vec<f64> = (0..q.num_states())
            .map(|y| {
                let row = q.row(y);
                transform.invert(row[argmax(row)])
            })
            .collect();
        let next = backup(mdp, &v, gamma, select, |z| transform.apply(z));
        residual = next.max_abs_diff(&q);
        q = next;
        if residual <= opts.tol {
            return Ok(q);
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iters, residual })
}

/// Exact `Q^pi` from the linear system `(I - gamma P^pi) Q = r`.
pub fn policy_eval_exact(mdp: &TabularMdp, pi: &StochasticPolicy, gamma: f64, select: RewardSelect) -> Result<QFunction> {
    check_discount(gamma)?;
    mdp.check_policy(pi, "policy_eval_exact")?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let n = ns * na;
    let mut system = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for x in 0..ns {
        for a in 0..na {
            let row = x * na + a;
            rhs[row] = mdp.reward(x, a, select);
            for &(y, p) in mdp.successors(x, a) {
                for b in 0..na {
                    let w = pi.row(y)[b];
                    if w != 0.0 {
                        system[(row, y * na + b)] -= gamma * p * w;
                    }
                }
            }
        }
    }
    let solution = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Internal("policy evaluation system is singular".into()))?;
    QFunction::from_values(ns, na, solution.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::MdpGenerator;
    use crate::mdp::{greedy_policy, SquashTransform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn self_loop(reward: f64) -> TabularMdp {
        TabularMdp::from_dense(1, 1, &[1.0], vec![reward], None, vec![false]).unwrap()
    }

    fn random_table(rng: &mut impl Rng, ns: usize, na: usize) -> QFunction {
        QFunction::from_fn(ns, na, |_, _| rng.gen_range(-5.0..5.0))
    }

    fn random_policy(rng: &mut impl Rng, ns: usize, na: usize) -> StochasticPolicy {
        let mut probs = Vec::new();
        for _ in 0..ns {
            let w: Vec<f64> = (0..na).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            probs.extend(w.iter().map(|v| v / s));
        }
        StochasticPolicy::new(ns, na, probs).unwrap()
    }

    #[test]
    fn one_state_backup_and_fixed_point() {
        let mdp = self_loop(1.0);
        let pi = StochasticPolicy::uniform(1, 1);
        let q1 = bellman_eval_step(&mdp, &pi, &QFunction::zeros(1, 1), 0.5, RewardSelect::Extrinsic).unwrap();
        assert_eq!(q1.get(0, 0), 1.0);
        let mut q = QFunction::zeros(1, 1);
        for _ in 0..200 {
            q = bellman_eval_step(&mdp, &pi, &q, 0.5, RewardSelect::Extrinsic).unwrap();
        }
        assert!((q.get(0, 0) - 2.0).abs() < 1e-15);
        let exact = policy_eval_exact(&mdp, &pi, 0.5, RewardSelect::Extrinsic).unwrap();
        assert!((exact.get(0, 0) - 2.0).abs() < 1e-12);
        let zero = policy_eval_exact(&self_loop(0.0), &pi, 0.5, RewardSelect::Extrinsic).unwrap();
        assert_eq!(zero.get(0, 0), 0.0);
    }

    #[test]
    fn discount_and_shape_errors() {
        let mdp = self_loop(1.0);
        let pi = StochasticPolicy::uniform(1, 1);
        let q = QFunction::zeros(1, 1);
        for g in [0.0, 1.0, 1.5, -0.1] {
            assert!(matches!(bellman_eval_step(&mdp, &pi, &q, g, RewardSelect::Extrinsic), Err(Error::Domain(_))));
        }
        assert!(bellman_eval_step(&mdp, &pi, &q, 0.9999, RewardSelect::Extrinsic).is_ok());
        let wrong = QFunction::zeros(2, 1);
        assert!(matches!(bellman_eval_step(&mdp, &pi, &wrong, 0.5, RewardSelect::Extrinsic), Err(Error::Dimension(_))));
    }

    #[test]
    fn iterated_backup_matches_linear_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..5 {
            let mdp = MdpGenerator::new(5, 3).seed(seed).generate().unwrap();
            let pi = random_policy(&mut rng, 5, 3);
            let exact = policy_eval_exact(&mdp, &pi, 0.9, RewardSelect::Mixed(0.3)).unwrap();
            let mut q = QFunction::zeros(5, 3);
            for _ in 0..500 {
                q = bellman_eval_step(&mdp, &pi, &q, 0.9, RewardSelect::Mixed(0.3)).unwrap();
            }
            assert!(q.max_abs_diff(&exact) <= 1e-9);
            let fixed = bellman_eval_step(&mdp, &pi, &exact, 0.9, RewardSelect::Mixed(0.3)).unwrap();
            assert!(fixed.max_abs_diff(&exact) <= 1e-9);
        }
    }

    #[test]
    fn evaluation_operator_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mdp = MdpGenerator::new(6, 3).seed(1).generate().unwrap();
        let gamma = 0.8;
        for _ in 0..100 {
            let pi = random_policy(&mut rng, 6, 3);
            let (q1, q2) = (random_table(&mut rng, 6, 3), random_table(&mut rng, 6, 3));
            let t1 = bellman_eval_step(&mdp, &pi, &q1, gamma, RewardSelect::Extrinsic).unwrap();
            let t2 = bellman_eval_step(&mdp, &pi, &q2, gamma, RewardSelect::Extrinsic).unwrap();
            assert!(t1.max_abs_diff(&t2) <= gamma * q1.max_abs_diff(&q2) + 1e-12);
        }
    }

    #[test]
    fn transformed_step_on_one_state() {
        let t = SquashTransform::default();
        let mdp = self_loop(1.0);
        let pi = StochasticPolicy::uniform(1, 1);
        // fixed point of the untransformed operator is 2; h(2) must be fixed for the transformed one
        let fixed = QFunction::filled(1, 1, t.apply(2.0));
        let out = transformed_bellman_eval_step(&mdp, &pi, &fixed, 0.5, &t, RewardSelect::Extrinsic).unwrap();
        assert!((out.get(0, 0) - t.apply(2.0)).abs() < 1e-8);

        let (mut plain, mut squashed) = (QFunction::zeros(1, 1), QFunction::zeros(1, 1));
        for _ in 0..30 {
            plain = bellman_eval_step(&mdp, &pi, &plain, 0.5, RewardSelect::Extrinsic).unwrap();
            squashed = transformed_bellman_eval_step(&mdp, &pi, &squashed, 0.5, &t, RewardSelect::Extrinsic).unwrap();
            assert!((t.invert(squashed.get(0, 0)) - plain.get(0, 0)).abs() < 1e-8);
        }

        let zero_mdp = MdpGenerator::new(4, 2).seed(2).zero_rewards().generate().unwrap();
        let zero = QFunction::zeros(4, 2);
        let pi = StochasticPolicy::uniform(4, 2);
        let out = transformed_bellman_eval_step(&zero_mdp, &pi, &zero, 0.9, &t, RewardSelect::Extrinsic).unwrap();
        assert_eq!(out, zero);
    }

    #[test]
    fn two_state_chain_optimum() {
        // state 0 --right(r=1)--> 1 (terminal); left stays with r=0
        let transition = [1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let mdp = TabularMdp::from_dense(2, 2, &transition, vec![0.0, 1.0, 0.0, 0.0], None, vec![false, true]).unwrap();
        let q = value_iteration(&mdp, 0.9, 1e-10, 10_000, RewardSelect::Extrinsic).unwrap();
        assert!((q.get(0, 1) - 1.0).abs() < 1e-12);
        assert!((q.get(0, 0) - 0.9).abs() < 1e-9);

        // start -> mid (r=0) -> goal (r=1): the first step is worth gamma
        let succ = vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![(2, 1.0)]];
        let chain = TabularMdp::from_sparse(3, 1, succ, vec![0.0, 1.0, 0.0], None, vec![false, false, true]).unwrap();
        let q = value_iteration(&chain, 0.9, 1e-10, 10_000, RewardSelect::Extrinsic).unwrap();
        assert!((q.get(0, 0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn value_iteration_optimality_residual_and_init_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tol = 1e-10;
        for seed in 0..10 {
            let mdp = MdpGenerator::new(5, 3).seed(seed).generate().unwrap();
            let q = value_iteration(&mdp, 0.9, tol, 1_000_000, RewardSelect::Extrinsic).unwrap();
            let pi = greedy_policy(&q);
            let backed = bellman_eval_step(&mdp, &pi, &q, 0.9, RewardSelect::Extrinsic).unwrap();
            assert!(backed.max_abs_diff(&q) <= 10.0 * tol);
            let q_rand = value_iteration_from(&mdp, random_table(&mut rng, 5, 3), 0.9, tol, 1_000_000, RewardSelect::Extrinsic).unwrap();
            assert!(q_rand.max_abs_diff(&q) <= 1e-8);
        }
    }

    #[test]
    fn optimal_values_grow_with_discount() {
        for seed in 0..5 {
            let mdp = MdpGenerator::new(5, 3).seed(seed).generate().unwrap();
            let low = value_iteration(&mdp, 0.5, 1e-10, 1_000_000, RewardSelect::Extrinsic).unwrap();
            let high = value_iteration(&mdp, 0.99, 1e-10, 1_000_000, RewardSelect::Extrinsic).unwrap();
            assert!(low.values().iter().zip(high.values()).all(|(l, h)| *l <= *h + 1e-9));
        }
    }

    #[test]
    fn value_iteration_reports_non_convergence() {
        let mdp = self_loop(1.0);
        match value_iteration(&mdp, 0.99, 1e-10, 5, RewardSelect::Extrinsic) {
            Err(Error::NoConvergence { iterations: 5, residual }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
        assert!(value_iteration(&mdp, 0.9, 0.0, 5, RewardSelect::Extrinsic).is_err());
    }
}
