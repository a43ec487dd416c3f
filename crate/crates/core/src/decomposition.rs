//! Extrinsic/intrinsic value splits, the decomposed value-iteration scheme and
//! numerical checks of its equivalence with a single value on the mixed reward.

use crate::error::{Error, Result};
use crate::mdp::{
    bellman_eval_step, check_discount, greedy_policy, transformed_bellman_eval_step, QFunction, QTable, RewardSelect,
    SquashTransform, TabularMdp, ValueTransform,
};
use crate::retrace::{retrace_decomposed_scheme, BehaviorRule, RetraceControl, TraceConfig};

/// Extrinsic and intrinsic tables with the mixing weight `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePair {
    pub q_extrinsic: QFunction,
    pub q_intrinsic: QFunction,
    pub beta: f64,
}

impl ValuePair {
    pub fn new(q_extrinsic: QFunction, q_intrinsic: QFunction, beta: f64) -> Result<Self> {
        q_extrinsic.check_same_shape(&q_intrinsic, "value pair")?;
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("beta must be finite and non-negative, got {beta}")));
        }
        Ok(Self { q_extrinsic, q_intrinsic, beta })
    }

    pub fn zeros(num_states: usize, num_actions: usize, beta: f64) -> Result<Self> {
        Self::new(QFunction::zeros(num_states, num_actions), QFunction::zeros(num_states, num_actions), beta)
    }
}

/// How a value pair is combined into one table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MixKind {
    /// `Q^e + beta Q^i`
    #[default]
    Identity,
    /// `h(h^-1(Q^e) + beta h^-1(Q^i))`
    Transformed,
}

impl MixKind {
    pub fn mix(self, vp: &ValuePair, t: &SquashTransform) -> Result<QFunction> {
        match self {
            MixKind::Identity => mix_identity(vp),
            MixKind::Transformed => mix_transformed(vp, t),
        }
    }

    /// Mix of a single pair of entries.
    #[inline]
    pub fn mix_values(self, qe: f64, qi: f64, beta: f64, t: &SquashTransform) -> f64 {
        match self {
            MixKind::Identity => qe + beta * qi,
            MixKind::Transformed => t.apply(t.invert(qe) + beta * t.invert(qi)),
        }
    }
}

fn mix_with(vp: &ValuePair, f: impl Fn(f64, f64) -> f64) -> Result<QFunction> {
    vp.q_extrinsic.check_same_shape(&vp.q_intrinsic, "mix")?;
    let values = vp
        .q_extrinsic
        .values()
        .iter()
        .zip(vp.q_intrinsic.values())
        .map(|(&e, &i)| f(e, i))
        .collect();
    QFunction::from_values(vp.q_extrinsic.num_states(), vp.q_extrinsic.num_actions(), values)
}

pub fn mix_identity(vp: &ValuePair) -> Result<QFunction> {
    mix_with(vp, |e, i| e + vp.beta * i)
}

pub fn mix_transformed(vp: &ValuePair, t: &impl ValueTransform) -> Result<QFunction> {
    mix_with(vp, |e, i| t.apply(t.invert(e) + vp.beta * t.invert(i)))
}

/// Discounts for the two components. The equivalence results need them equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaPair {
    pub extrinsic: f64,
    pub intrinsic: f64,
}

impl GammaPair {
    pub fn shared(gamma: f64) -> Self {
        Self { extrinsic: gamma, intrinsic: gamma }
    }
}

/// Advances both components one step under the greedy policy of their mix.
pub fn decomposed_vi_step(
    mdp: &TabularMdp,
    vp: &ValuePair,
    gammas: GammaPair,
    transform: Option<&SquashTransform>,
) -> Result<ValuePair> {
    check_discount(gammas.extrinsic)?;
    check_discount(gammas.intrinsic)?;
    let mixed = match transform {
        Some(t) => mix_transformed(vp, t)?,
        None => mix_identity(vp)?,
    };
    let pi = greedy_policy(&mixed);
    let step = |q: &QFunction, gamma: f64, select: RewardSelect| match transform {
        Some(t) => transformed_bellman_eval_step(mdp, &pi, q, gamma, t, select),
        None => bellman_eval_step(mdp, &pi, q, gamma, select),
    };
    let q_i = step(&vp.q_intrinsic, gammas.intrinsic, RewardSelect::Intrinsic)?;
    let q_e = step(&vp.q_extrinsic, gammas.extrinsic, RewardSelect::Extrinsic)?;
    ValuePair::new(q_e, q_i, vp.beta)
}

/// One greedy step of the single-table scheme on `r^e + beta r^i`.
pub fn mixed_vi_step(mdp: &TabularMdp, q: &QFunction, beta: f64, gamma: f64, transform: Option<&SquashTransform>) -> Result<QFunction> {
    let pi = greedy_policy(q);
    match transform {
        Some(t) => transformed_bellman_eval_step(mdp, &pi, q, gamma, t, RewardSelect::Mixed(beta)),
        None => bellman_eval_step(mdp, &pi, q, gamma, RewardSelect::Mixed(beta)),
    }
}

/// Initial tables for an equivalence run. `Consistent` derives the mixed
/// table from the pair.
#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    Zeros,
    Consistent { q_extrinsic: QFunction, q_intrinsic: QFunction },
    Inconsistent { q_extrinsic: QFunction, q_intrinsic: QFunction, q_mixed: QFunction },
}

/// Per-iteration sup-norm gaps between the decomposed mix and the single-table
/// scheme; entry `k` compares the iterates after `k` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    /// Policies of the two schemes agreed state by state at every iteration.
    pub policies_agree: bool,
}

impl EquivalenceReport {
    fn from_deviations(deviations: Vec<f64>, policies_agree: bool) -> Self {
        let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
        Self { deviations, max_deviation, policies_agree }
    }

    pub fn final_deviation(&self) -> f64 {
        self.deviations.last().copied().unwrap_or(0.0)
    }

    /// `iteration,deviation` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,deviation\n");
        for (k, d) in self.deviations.iter().enumerate() {
            out.push_str(&format!("{k},{d:e}\n"));
        }
        out
    }
}

fn initial_tables(
    mdp: &TabularMdp,
    beta: f64,
    init: Initialization,
    transform: Option<&SquashTransform>,
) -> Result<(ValuePair, QFunction)> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let (vp, mixed) = match init {
        Initialization::Zeros => (ValuePair::zeros(ns, na, beta)?, None),
        Initialization::Consistent { q_extrinsic, q_intrinsic } => (ValuePair::new(q_extrinsic, q_intrinsic, beta)?, None),
        Initialization::Inconsistent { q_extrinsic, q_intrinsic, q_mixed } => {
            (ValuePair::new(q_extrinsic, q_intrinsic, beta)?, Some(q_mixed))
        }
    };
    mdp.check_table(&vp.q_extrinsic, "equivalence initial table")?;
    let mixed = match mixed {
        Some(q) => {
            mdp.check_table(&q, "equivalence initial mixed table")?;
            q
        }
        None => match transform {
            Some(t) => mix_transformed(&vp, t)?,
            None => mix_identity(&vp)?,
        },
    };
    Ok((vp, mixed))
}

/// Runs the decomposed value-iteration scheme and the mixed-reward scheme side
/// by side for `iters` steps.
pub fn equivalence_report(
    mdp: &TabularMdp,
    beta: f64,
    gamma: f64,
    iters: usize,
    transform: Option<&SquashTransform>,
    init: Initialization,
) -> Result<EquivalenceReport> {
    if iters == 0 {
        return Err(Error::Domain("equivalence_report needs at least one iteration".into()));
    }
    check_discount(gamma)?;
    let (mut vp, mut q) = initial_tables(mdp, beta, init, transform)?;
    let mix = |vp: &ValuePair| match transform {
        Some(t) => mix_transformed(vp, t),
        None => mix_identity(vp),
    };
    let mut mixed = mix(&vp)?;
    let mut deviations = vec![mixed.max_abs_diff(&q)];
    let mut agree = true;
    for _ in 0..iters {
        agree &= greedy_policy(&mixed) == greedy_policy(&q);
        vp = decomposed_vi_step(mdp, &vp, GammaPair::shared(gamma), transform)?;
        q = mixed_vi_step(mdp, &q, beta, gamma, transform)?;
        mixed = mix(&vp)?;
        deviations.push(mixed.max_abs_diff(&q));
    }
    Ok(EquivalenceReport::from_deviations(deviations, agree))
}

/// Same comparison for Retrace control: the decomposed Retrace scheme against
/// Retrace control on the mixed reward, both with the default behavior rule.
pub fn retrace_equivalence_report(
    mdp: &TabularMdp,
    beta: f64,
    cfg: &TraceConfig,
    iters: usize,
    transform: Option<&SquashTransform>,
    behavior: &BehaviorRule,
) -> Result<EquivalenceReport> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut mixed_iterates = Vec::with_capacity(iters + 1);
    RetraceControl::new(mdp, *cfg, RewardSelect::Mixed(beta))
        .behavior(behavior.clone())
        .transform(transform.copied())
        .run_with(QFunction::zeros(ns, na), iters, |_, q| mixed_iterates.push(q.clone()))?;
    let mut deviations = Vec::with_capacity(iters + 1);
    let mut agree = true;
    retrace_decomposed_scheme(
        mdp,
        QFunction::zeros(ns, na),
        QFunction::zeros(ns, na),
        beta,
        cfg,
        transform,
        behavior,
        iters,
        |k, q| {
            agree &= greedy_policy(q) == greedy_policy(&mixed_iterates[k]);
            deviations.push(q.max_abs_diff(&mixed_iterates[k]));
        },
    )?;
    Ok(EquivalenceReport::from_deviations(deviations, agree))
}
