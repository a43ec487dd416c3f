use crate::error::{Error, Result};

/// Read access to a dense state-action value table.
pub trait QTable {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn row(&self, state: usize) -> &[f64];

    #[inline]
    fn value(&self, state: usize, action: usize) -> f64 {
        self.row(state)[action]
    }
}

/// Read access to action probabilities `pi(a | x)`.
pub trait Policy {
    fn prob(&self, state: usize, action: usize) -> f64;
}

/// Dense `Q(x, a)` table stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QFunction {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::filled(num_states, num_actions, 0.0)
    }

    pub fn filled(num_states: usize, num_actions: usize, value: f64) -> Self {
        Self {
            num_states,
            num_actions,
            values: vec![value; num_states * num_actions],
        }
    }

    pub fn from_values(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_states * num_actions {
            return Err(Error::Dimension(format!(
                "expected {} values for a {num_states}x{num_actions} table, got {}",
                num_states * num_actions,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("action values must be finite, got {bad}")));
        }
        Ok(Self { num_states, num_actions, values })
    }

    pub fn from_fn(num_states: usize, num_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(num_states * num_actions);
        for x in 0..num_states {
            for a in 0..num_actions {
                values.push(f(x, a));
            }
        }
        Self { num_states, num_actions, values }
    }

    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state * self.num_actions + action]
    }

    #[inline]
    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        self.values[state * self.num_actions + action] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_shape(&self, other: &QFunction) -> bool {
        self.num_states == other.num_states && self.num_actions == other.num_actions
    }

    pub fn check_same_shape(&self, other: &QFunction, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.num_states, self.num_actions, other.num_states, other.num_actions
            )))
        }
    }

    /// `max |self - other|` over all entries.
    pub fn max_abs_diff(&self, other: &QFunction) -> f64 {
        debug_assert!(self.same_shape(other));
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> QFunction {
        QFunction {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl QTable for QFunction {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    fn row(&self, state: usize) -> &[f64] {
        let start = state * self.num_actions;
        &self.values[start..start + self.num_actions]
    }
}

/// Index of the largest entry; ties go to the lowest index.
#[inline]
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Table `pi(a | x)` with rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if num_actions == 0 || probs.len() != num_states * num_actions {
            return Err(Error::Dimension(format!(
                "policy table needs {} entries, got {}",
                num_states * num_actions,
                probs.len()
            )));
        }
        for x in 0..num_states {
            let row = &probs[x * num_actions..(x + 1) * num_actions];
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::Domain(format!("negative or non-finite probability in state {x}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > Self::ROW_SUM_TOLERANCE {
                return Err(Error::Domain(format!("policy row {x} sums to {sum}")));
            }
        }
        Ok(Self { num_states, num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self {
            num_states,
            num_actions,
            probs: vec![p; num_states * num_actions],
        }
    }

    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (x, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(Error::OutOfRange { index: a, limit: num_actions });
            }
            probs[x * num_actions + a] = 1.0;
        }
        Ok(Self { num_states: actions.len(), num_actions, probs })
    }

    /// Mass `1 - eps + eps/|A|` on the greedy action of `q`, `eps/|A|` elsewhere.
    pub fn epsilon_greedy(q: &impl QTable, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Domain(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        let na = q.num_actions();
        let off = epsilon / na as f64;
        let mut probs = vec![off; q.num_states() * na];
        for x in 0..q.num_states() {
            let best = argmax(q.row(x));
            probs[x * na + best] += 1.0 - epsilon;
        }
        Ok(Self { num_states: q.num_states(), num_actions: na, probs })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.probs[state * self.num_actions..(state + 1) * self.num_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

impl Policy for StochasticPolicy {
    #[inline]
    fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.num_actions + action]
    }
}

/// The greedy operator: all mass on the argmax action, lowest index on ties.
pub fn greedy_policy(q: &impl QTable) -> StochasticPolicy {
    let actions: Vec<usize> = (0..q.num_states()).map(|x| argmax(q.row(x))).collect();
    StochasticPolicy::deterministic(q.num_actions(), &actions).expect("argmax is always in range")
}
