//! Every tolerance used by a check, in one place.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceProfile {
    Strict,
    #[default]
    Default,
    Fast,
}

impl ToleranceProfile {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "strict" => Some(ToleranceProfile::Strict),
            "default" => Some(ToleranceProfile::Default),
            "fast" => Some(ToleranceProfile::Fast),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ToleranceProfile::Strict => "strict",
            ToleranceProfile::Default => "default",
            ToleranceProfile::Fast => "fast",
        }
    }

    pub fn ledger(self) -> Tolerances {
        let base = Tolerances::default();
        match self {
            ToleranceProfile::Default => base,
            ToleranceProfile::Strict => base.scaled(0.1),
            ToleranceProfile::Fast => base.scaled(10.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|N|` and `|W|` on the flat model.
    pub flat_entropy: f64,
    /// `|μ|` of a large flat ball.
    pub flat_mu: f64,
    /// Random `W̄` against a theorem lower bound.
    pub random_margin: f64,
    /// Solver `ν̂` against a theorem lower bound.
    pub nu_margin: f64,
    /// Random `W̄` against the solver's own `μ̂`.
    pub mu_soundness: f64,
    /// Monotonicity and ordering of entropies.
    pub monotone: f64,
    /// Relative residual of the Nash derivative identity.
    pub identity_residual: f64,
    /// Required residual reduction when the step halves.
    pub identity_reduction: f64,
    /// Relative error of the flat kernel variance.
    pub kernel_variance: f64,
    /// Harnack inequality margin.
    pub harnack: f64,
    /// `W1` monotonicity along a ladder.
    pub w1_monotone: f64,
    /// Distance between `ν̂` and the extrapolated entropy limit.
    pub plateau: f64,
    /// `|N(2τ) − N(τ)|` at the largest scales.
    pub plateau_flatness: f64,
    /// Curvature lower bound.
    pub max_principle: f64,
    /// Sobolev and volume inequalities.
    pub inequality: f64,
    /// Relative mismatch of the transplanted cutoff bound.
    pub transplant: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            flat_entropy: 1e-3,
            flat_mu: 5e-3,
            random_margin: 1e-4,
            nu_margin: 1e-3,
            mu_soundness: 1e-6,
            monotone: 1e-4,
            identity_residual: 1e-2,
            identity_reduction: 2.0,
            kernel_variance: 1e-2,
            harnack: 1e-3,
            w1_monotone: 1e-4,
            plateau: 5e-2,
            plateau_flatness: 1e-2,
            max_principle: 1e-6,
            inequality: 0.0,
            transplant: 1e-3,
        }
    }
}

impl Tolerances {
    /// Scales every absolute tolerance; the reduction ratio is a rate and
    /// stays fixed.
    fn scaled(self, k: f64) -> Self {
        Tolerances {
            flat_entropy: self.flat_entropy * k,
            flat_mu: self.flat_mu * k,
            random_margin: self.random_margin * k,
            nu_margin: self.nu_margin * k,
            mu_soundness: self.mu_soundness * k,
            monotone: self.monotone * k,
            identity_residual: self.identity_residual * k,
            identity_reduction: self.identity_reduction,
            kernel_variance: self.kernel_variance * k,
            harnack: self.harnack * k,
            w1_monotone: self.w1_monotone * k,
            plateau: self.plateau * k,
            plateau_flatness: self.plateau_flatness * k,
            max_principle: self.max_principle * k,
            inequality: self.inequality * k,
            transplant: self.transplant * k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_order_tolerances() {
        let strict = ToleranceProfile::Strict.ledger();
        let default = ToleranceProfile::Default.ledger();
        let fast = ToleranceProfile::Fast.ledger();
        assert!(strict.harnack < default.harnack && default.harnack < fast.harnack);
        assert_eq!(strict.identity_reduction, fast.identity_reduction);
        assert_eq!(default.random_margin, 1e-4);
        for p in ["strict", "default", "fast"] {
            assert_eq!(ToleranceProfile::parse(p).unwrap().as_str(), p);
        }
        assert!(ToleranceProfile::parse("loose").is_none());
    }
}
