//! Oracle and equivalence suites behind the `verify` command. Each suite
//! returns the measured worst case so callers can apply their own tolerance.

use crate::decomposition::{equivalence_report, retrace_equivalence_report, EquivalenceReport, Initialization};
use crate::env::MdpGenerator;
use crate::error::Result;
use crate::family::{beta_schedule, build_family, gamma_schedule, FamilySchedule};
use crate::mdp::{
    policy_eval_exact, value_iteration, QFunction, RewardSelect, SquashTransform, StochasticPolicy, TabularMdp,
};
use crate::metrics::{hns, ScoreTriple};
use crate::retrace::{
    retrace_loss, retrace_loss_gradient, retrace_operator_exact, retrace_targets_sampled, sequence_targets,
    BehaviorRule, RetraceControl, TraceConfig,
};
use crate::sequence::{Transition, TransitionSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

pub const SUITE_STATES: usize = 5;
pub const SUITE_ACTIONS: usize = 3;
pub const SUITE_GAMMA: f64 = 0.9;
pub const SUITE_BETAS: [f64; 5] = [0.0, 0.1, 0.3, 1.0, 5.0];
pub const SUITE_MDPS: usize = 50;
pub const SUITE_ITERATIONS: usize = 200;

/// The 50 random 5-state, 3-action MDPs shared by the equivalence suites.
pub fn suite_mdps(count: usize) -> Result<Vec<TabularMdp>> {
    (0..count as u64).map(|s| MdpGenerator::new(SUITE_STATES, SUITE_ACTIONS).seed(s).generate()).collect()
}

fn random_policy(rng: &mut impl Rng, ns: usize, na: usize) -> Result<StochasticPolicy> {
    let mut probs = Vec::with_capacity(ns * na);
    for _ in 0..ns {
        let w: Vec<f64> = (0..na).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        probs.extend(w.iter().map(|v| v / total));
    }
    StochasticPolicy::new(ns, na, probs)
}

/// One equivalence run of the suite.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceCase {
    pub mdp_index: usize,
    pub beta: f64,
    pub report: EquivalenceReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceSummary {
    pub cases: Vec<EquivalenceCase>,
    pub max_deviation: f64,
    pub policies_agree: bool,
}

impl EquivalenceSummary {
    fn from_cases(cases: Vec<EquivalenceCase>) -> Self {
        let max_deviation = cases.iter().map(|c| c.report.max_deviation).fold(0.0, f64::max);
        let policies_agree = cases.iter().all(|c| c.report.policies_agree);
        Self { cases, max_deviation, policies_agree }
    }

    /// `mdp,beta,iteration,deviation` rows for every case.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mdp,beta,iteration,deviation\n");
        for c in &self.cases {
            for (k, d) in c.report.deviations.iter().enumerate() {
                out.push_str(&format!("{},{},{},{:e}\n", c.mdp_index, c.beta, k, d));
            }
        }
        out
    }
}

/// Decomposed versus mixed value iteration from zero tables.
pub fn decomposition_equivalence(mdps: &[TabularMdp], transformed: bool, iterations: usize) -> Result<EquivalenceSummary> {
    let h = SquashTransform::default();
    let transform = transformed.then_some(&h);
    let mut cases = Vec::new();
    for (i, mdp) in mdps.iter().enumerate() {
        for &beta in &SUITE_BETAS {
            let report = equivalence_report(mdp, beta, SUITE_GAMMA, iterations, transform, Initialization::Zeros)?;
            cases.push(EquivalenceCase { mdp_index: i, beta, report });
        }
    }
    Ok(EquivalenceSummary::from_cases(cases))
}

/// Decomposed versus mixed-reward Retrace control from zero tables.
pub fn retrace_decomposition(mdps: &[TabularMdp], transformed: bool, iterations: usize) -> Result<EquivalenceSummary> {
    let h = SquashTransform::default();
    let transform = transformed.then_some(&h);
    let cfg = TraceConfig::new(TraceConfig::DEFAULT_LAMBDA, SUITE_GAMMA)?;
    let mut cases = Vec::new();
    for (i, mdp) in mdps.iter().enumerate() {
        for &beta in &SUITE_BETAS {
            let report = retrace_equivalence_report(mdp, beta, &cfg, iterations, transform, &BehaviorRule::default())?;
            cases.push(EquivalenceCase { mdp_index: i, beta, report });
        }
    }
    Ok(EquivalenceSummary::from_cases(cases))
}

/// Worst `||T^{mu,pi} Q^pi - Q^pi||_inf` over random `(MDP, mu, pi)` triples,
/// with `Q^pi` from the linear solve.
pub fn retrace_fixed_point_residual(triples: usize) -> Result<f64> {
    let cfg = TraceConfig::new(TraceConfig::DEFAULT_LAMBDA, SUITE_GAMMA)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for k in 0..triples as u64 {
        let mdp = MdpGenerator::new(SUITE_STATES, SUITE_ACTIONS).seed(1_000 + k).generate()?;
        let mu = random_policy(&mut rng, SUITE_STATES, SUITE_ACTIONS)?;
        let pi = random_policy(&mut rng, SUITE_STATES, SUITE_ACTIONS)?;
        let q_pi = policy_eval_exact(&mdp, &pi, cfg.gamma, RewardSelect::Extrinsic)?;
        let out = retrace_operator_exact(&mdp, &mu, &pi, &q_pi, &cfg, None, RewardSelect::Extrinsic)?;
        worst = worst.max(out.q.max_abs_diff(&q_pi));
    }
    Ok(worst)
}

/// Worst `||Q_final - Q*||_inf` of Retrace control against value iteration.
pub fn retrace_control_gap(count: usize) -> Result<f64> {
    let cfg = TraceConfig::new(TraceConfig::DEFAULT_LAMBDA, SUITE_GAMMA)?;
    let mut worst: f64 = 0.0;
    for k in 0..count as u64 {
        let mdp = MdpGenerator::new(SUITE_STATES, SUITE_ACTIONS).seed(2_000 + k).generate()?;
        let q_star = value_iteration(&mdp, cfg.gamma, 1e-13, 100_000, RewardSelect::Extrinsic)?;
        let control = RetraceControl::new(&mdp, cfg, RewardSelect::Extrinsic);
        let mut q = QFunction::zeros(SUITE_STATES, SUITE_ACTIONS);
        for _ in 0..1_000 {
            let next = control.step(&q)?;
            let change = next.max_abs_diff(&q);
            q = next;
            if change < 1e-13 {
                break;
            }
        }
        worst = worst.max(q.max_abs_diff(&q_star));
    }
    Ok(worst)
}

/// Sampled-target consistency: worst gap between sampled targets along an
/// on-policy trajectory of a deterministic MDP and the exact operator truncated
/// at the same horizon.
pub fn sampled_target_gap(count: usize, trajectory_len: usize) -> Result<f64> {
    let cfg = TraceConfig::new(TraceConfig::DEFAULT_LAMBDA, SUITE_GAMMA)?;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for k in 0..count as u64 {
        let mdp = MdpGenerator::new(6, 3).seed(3_000 + k).deterministic().generate()?;
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let q = QFunction::from_fn(ns, na, |_, _| rng.gen_range(-1.0..1.0));
        let actions: Vec<usize> = (0..ns).map(|_| rng.gen_range(0..na)).collect();
        let pi = StochasticPolicy::deterministic(na, &actions)?;
        let mut x = rng.gen_range(0..ns);
        let mut steps = Vec::with_capacity(trajectory_len);
        for _ in 0..trajectory_len {
            let a = actions[x];
            let y = mdp.successors(x, a)[0].0;
            steps.push(Transition::simple(x, a, 1.0, mdp.reward(x, a, RewardSelect::Extrinsic), y));
            x = y;
        }
        let seq = TransitionSequence::new(steps);
        let (targets, _) = sequence_targets(&seq, &q, &pi, &cfg, RewardSelect::Extrinsic)?;
        for (s, t) in seq.valid().iter().enumerate() {
            let horizon = trajectory_len - 1 - s;
            let exact = retrace_operator_exact(&mdp, &pi, &pi, &q, &cfg, Some(horizon), RewardSelect::Extrinsic)?;
            worst = worst.max((targets[s] - exact.q.get(t.observation, t.action)).abs());
        }
    }
    Ok(worst)
}

/// Worst relative error between the analytic loss gradient and central finite
/// differences, with targets held fixed.
pub fn gradient_check(count: usize) -> Result<f64> {
    let cfg = TraceConfig::new(TraceConfig::DEFAULT_LAMBDA, SUITE_GAMMA)?;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (ns, na) = (6, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let q_target = QFunction::from_fn(ns, na, |_, _| rng.gen_range(-1.0..1.0));
        let q = QFunction::from_fn(ns, na, |_, _| rng.gen_range(-1.0..1.0));
        let pi = random_policy(&mut rng, ns, na)?;
        let mut batch = Vec::with_capacity(3);
        for _ in 0..3 {
            let mut x = rng.gen_range(0..ns);
            let mut steps = Vec::with_capacity(8);
            for _ in 0..8 {
                let y = rng.gen_range(0..ns);
                let t = Transition::simple(x, rng.gen_range(0..na), rng.gen_range(0.1..1.0), rng.gen_range(0.0..1.0), y);
                steps.push(t);
                x = y;
            }
            batch.push(TransitionSequence::new(steps));
        }
        let targets = retrace_targets_sampled(&batch, &q_target, &pi, &cfg, None, RewardSelect::Extrinsic)?;
        let grad = retrace_loss_gradient(&batch, &q, &targets)?;
        let step = 1e-5;
        for x in 0..ns {
            for a in 0..na {
                let mut plus = q.clone();
                plus.set(x, a, q.get(x, a) + step);
                let mut minus = q.clone();
                minus.set(x, a, q.get(x, a) - step);
                let fd = (retrace_loss(&batch, &plus, &targets)?.loss - retrace_loss(&batch, &minus, &targets)?.loss)
                    / (2.0 * step);
                let g = grad.get(&(x, a)).copied().unwrap_or(0.0);
                let scale = g.abs().max(fd.abs());
                let err = if scale < 1e-12 { (fd - g).abs() } else { (fd - g).abs() / scale };
                worst = worst.max(err);
            }
        }
    }
    Ok(worst)
}

/// Largest gap between `build_family` and the direct schedule formulas.
pub fn schedule_gap() -> Result<f64> {
    let sched = FamilySchedule::default();
    let family = build_family(&sched)?;
    let mut worst: f64 = 0.0;
    for j in 0..family.len() {
        worst = worst.max((family.beta(j) - beta_schedule(j, &sched)?).abs());
        worst = worst.max((family.gamma(j) - gamma_schedule(j, &sched)?).abs());
    }
    Ok(worst)
}

/// Outcome of one suite in a verify run.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub elapsed: Duration,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: measured {:.3e} (tolerance {:.1e}, {:.2}s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.elapsed.as_secs_f64()
        )
    }
}

fn timed(name: &'static str, tolerance: f64, f: impl FnOnce() -> Result<f64>) -> Result<SuiteOutcome> {
    let start = Instant::now();
    let measured = f()?;
    Ok(SuiteOutcome { name, measured, tolerance, elapsed: start.elapsed() })
}

/// Every oracle and equivalence suite. The decomposition deviations are also
/// returned so the caller can write them out.
pub fn run_all() -> Result<(Vec<SuiteOutcome>, EquivalenceSummary)> {
    let mdps = suite_mdps(SUITE_MDPS)?;
    let mut equivalence = None;
    let mut out = vec![timed("decomposition equivalence (identity mix)", 1e-10, || {
        let s = decomposition_equivalence(&mdps, false, SUITE_ITERATIONS)?;
        let worst = s.max_deviation;
        equivalence = Some(s);
        Ok(worst)
    })?];
    out.push(timed("decomposition equivalence (transformed mix)", 1e-8, || {
        Ok(decomposition_equivalence(&mdps, true, SUITE_ITERATIONS)?.max_deviation)
    })?);
    out.push(timed("retrace fixed point", 1e-9, || retrace_fixed_point_residual(20))?);
    out.push(timed("retrace control against value iteration", 1e-6, || retrace_control_gap(20))?);
    out.push(timed("retrace decomposition", 1e-10, || {
        Ok(retrace_decomposition(&mdps, false, SUITE_ITERATIONS)?.max_deviation)
    })?);
    out.push(timed("retrace decomposition (transformed)", 1e-10, || {
        Ok(retrace_decomposition(&mdps, true, SUITE_ITERATIONS)?.max_deviation)
    })?);
    out.push(timed("sampled targets against the exact operator", 1e-9, || sampled_target_gap(20, 30))?);
    out.push(timed("loss gradient against finite differences", 1e-6, || gradient_check(10))?);
    out.push(timed("family schedule against direct formulas", 1e-12, schedule_gap)?);
    out.push(timed("normalized score example", 1e-3, || {
        let v = hns(&ScoreTriple { agent: -3272.0, human: -4336.9, random: -17098.1 })?;
        Ok((v - 1.0834).abs())
    })?);
    Ok((out, equivalence.expect("identity suite ran")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        let mdps = suite_mdps(2).unwrap();
        assert!(decomposition_equivalence(&mdps, false, 20).unwrap().max_deviation <= 1e-10);
        assert!(retrace_fixed_point_residual(2).unwrap() <= 1e-9);
        assert!(sampled_target_gap(2, 10).unwrap() <= 1e-9);
        assert!(gradient_check(1).unwrap() <= 1e-6);
        assert!(schedule_gap().unwrap() <= 1e-12);
    }

    #[test]
    fn summary_csv_has_one_row_per_iterate() {
        let s = decomposition_equivalence(&suite_mdps(1).unwrap(), false, 3).unwrap();
        assert_eq!(s.to_csv().lines().count(), 1 + 5 * 4);
    }
}
