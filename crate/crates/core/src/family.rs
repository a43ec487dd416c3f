//! The `(beta_j, gamma_j)` policy family.

use crate::error::{Error, Result};
use crate::mdp::check_discount;

/// Parameters of the default schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilySchedule {
    pub num_policies: usize,
    pub beta_max: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Serve the `j >= 8` discounts in descending order instead of the
    /// ascending order the formula produces.
    pub reverse_gamma_tail: bool,
}

impl Default for FamilySchedule {
    fn default() -> Self {
        Self { num_policies: 32, beta_max: 0.3, gamma0: 0.9999, gamma1: 0.997, gamma2: 0.99, reverse_gamma_tail: false }
    }
}

impl FamilySchedule {
    pub fn with_size(num_policies: usize) -> Self {
        Self { num_policies, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_policies < 2 {
            return Err(Error::ScheduleDomain(format!("family needs at least 2 policies, got {}", self.num_policies)));
        }
        if !(self.beta_max >= 0.0) || !self.beta_max.is_finite() {
            return Err(Error::ScheduleDomain(format!("beta_max must be finite and non-negative, got {}", self.beta_max)));
        }
        if !(0.0 < self.gamma2 && self.gamma2 <= self.gamma1 && self.gamma1 <= self.gamma0 && self.gamma0 < 1.0) {
            return Err(Error::ScheduleDomain(format!(
                "need 0 < gamma2 <= gamma1 <= gamma0 < 1, got ({}, {}, {})",
                self.gamma2, self.gamma1, self.gamma0
            )));
        }
        Ok(())
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.num_policies {
            return Err(Error::OutOfRange { index: j, limit: self.num_policies });
        }
        Ok(())
    }
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `beta_j`: 0 at `j = 0`, `beta_max` at `j = N - 1`, and
/// `beta_max * sigmoid(10 (2j - (N - 2)) / (N - 2))` in between.
pub fn beta_schedule(j: usize, sched: &FamilySchedule) -> Result<f64> {
    sched.check_index(j)?;
    let n = sched.num_policies;
    Ok(if j == 0 {
        0.0
    } else if j == n - 1 {
        sched.beta_max
    } else {
        let span = (n - 2) as f64;
        sched.beta_max * sigmoid(10.0 * (2.0 * j as f64 - span) / span)
    })
}

/// `gamma_j` from the four-branch schedule, before any tail reversal.
pub fn gamma_schedule(j: usize, sched: &FamilySchedule) -> Result<f64> {
    sched.check_index(j)?;
    let (g0, g1, g2) = (sched.gamma0, sched.gamma1, sched.gamma2);
    Ok(match j {
        0 => g0,
        1..=6 => g1 + (g0 - g1) * sigmoid(10.0 * (2.0 * j as f64 - 6.0) / 6.0),
        7 => g1,
        _ => {
            let n = sched.num_policies;
            if n <= 9 {
                return Err(Error::ScheduleDomain(format!("the j >= 8 discount branch needs N > 9, got N = {n}")));
            }
            let m = (n - 9) as f64;
            1.0 - ((m * (1.0 - g1).ln() + (j - 8) as f64 * (1.0 - g2).ln()) / m).exp()
        }
    })
}

/// The `N` pairs `(beta_j, gamma_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFamily {
    pairs: Vec<(f64, f64)>,
}

impl PolicyFamily {
    /// A family with arbitrary pairs, e.g. the two-member family of the coin experiment.
    pub fn from_pairs(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::ScheduleDomain("family must not be empty".into()));
        }
        for &(beta, gamma) in &pairs {
            if !(beta >= 0.0) || !beta.is_finite() {
                return Err(Error::ScheduleDomain(format!("beta must be finite and non-negative, got {beta}")));
            }
            check_discount(gamma)?;
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn beta(&self, j: usize) -> f64 {
        self.pairs[j].0
    }

    pub fn gamma(&self, j: usize) -> f64 {
        self.pairs[j].1
    }

    /// `j,beta,gamma` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,beta,gamma\n");
        for (j, (b, g)) in self.pairs.iter().enumerate() {
            out.push_str(&format!("{j},{b:?},{g:?}\n"));
        }
        out
    }
}

pub fn build_family(sched: &FamilySchedule) -> Result<PolicyFamily> {
    sched.validate()?;
    let n = sched.num_policies;
    let betas = (0..n).map(|j| beta_schedule(j, sched)).collect::<Result<Vec<_>>>()?;
    let mut gammas = (0..n).map(|j| gamma_schedule(j, sched)).collect::<Result<Vec<_>>>()?;
    if sched.reverse_gamma_tail && n > 8 {
        gammas[8..].reverse();
    }
    PolicyFamily::from_pairs(betas.into_iter().zip(gammas).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_examples() {
        let s = FamilySchedule::default();
        assert_eq!(beta_schedule(0, &s).unwrap(), 0.0);
        assert_eq!(beta_schedule(31, &s).unwrap(), 0.3);
        // independent evaluation: 0.3 / (1 + e^{-2/3})
        let expected = 0.3 / (1.0 + (-2.0f64 / 3.0).exp());
        assert!((beta_schedule(16, &s).unwrap() - expected).abs() < 1e-15);
        assert!((beta_schedule(16, &s).unwrap() - 0.19822).abs() < 1e-5);
        assert!(beta_schedule(32, &s).is_err());
    }

    #[test]
    fn gamma_examples() {
        let s = FamilySchedule::default();
        assert_eq!(gamma_schedule(0, &s).unwrap(), 0.9999);
        assert_eq!(gamma_schedule(7, &s).unwrap(), 0.997);
        assert!((gamma_schedule(31, &s).unwrap() - (1.0 - 3e-5)).abs() < 1e-12);
        assert!(matches!(gamma_schedule(8, &FamilySchedule::with_size(9)), Err(Error::ScheduleDomain(_))));
    }

    #[test]
    fn default_family() {
        let f = build_family(&FamilySchedule::default()).unwrap();
        assert_eq!(f.len(), 32);
        assert_eq!((f.beta(0), f.beta(31)), (0.0, 0.3));
        assert!(f.pairs().windows(2).all(|w| w[0].0 <= w[1].0));
        assert!(f.pairs().iter().all(|&(_, g)| g > 0.0 && g < 1.0));
        assert_eq!(f.to_csv().lines().count(), 33);
    }

    #[test]
    fn two_member_family() {
        let f = build_family(&FamilySchedule::with_size(2)).unwrap();
        let g1 = 0.997 + (0.9999 - 0.997) * sigmoid(10.0 * (2.0 - 6.0) / 6.0);
        assert_eq!(f.pairs(), &[(0.0, 0.9999), (0.3, g1)]);
    }

    #[test]
    fn reversed_tail() {
        let plain = build_family(&FamilySchedule::default()).unwrap();
        let reversed = build_family(&FamilySchedule { reverse_gamma_tail: true, ..Default::default() }).unwrap();
        assert_eq!(plain.gamma(8), reversed.gamma(31));
        assert_eq!(plain.gamma(7), reversed.gamma(7));
        assert!(reversed.pairs()[8..].windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn custom_pairs_are_checked() {
        assert!(PolicyFamily::from_pairs(vec![(0.0, 0.99), (0.3, 0.99)]).is_ok());
        assert!(PolicyFamily::from_pairs(vec![(0.0, 1.0)]).is_err());
        assert!(PolicyFamily::from_pairs(vec![(-0.1, 0.9)]).is_err());
        assert!(PolicyFamily::from_pairs(vec![]).is_err());
    }
}
