//! Problem parameters, dimension-like numbers and the closed-form exponents.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "plus")]
    MPlus,
    #[serde(rename = "minus")]
    MMinus,
}

impl Operator {
    pub fn name(self) -> &'static str {
        match self {
            Operator::MPlus => "plus",
            Operator::MMinus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ParamError {
    #[error("ellipticity constants must be positive (lambda={lambda}, Lambda={big_lambda})")]
    NonPositiveEllipticity { lambda: f64, big_lambda: f64 },
    #[error("lambda={lambda} exceeds Lambda={big_lambda}")]
    LambdaOrder { lambda: f64, big_lambda: f64 },
    #[error("dimension N={0} is below 3")]
    DimensionTooSmall(u32),
    #[error("weight exponent a={0} must exceed -1")]
    WeightTooNegative(f64),
    #[error("Ñ₊ ≤ 2 (Ñ₊ = {0}): the dimension-like number must exceed 2")]
    DegenerateDimensionLike(f64),
    #[error("exponent p={0} must exceed 1")]
    PBelowOne(f64),
}

/// Validated parameters of `M±(D²u) + |x|^a u^p = 0`; `p` is passed separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemParams {
    lambda: f64,
    #[serde(rename = "Lambda")]
    big_lambda: f64,
    operator: Operator,
    #[serde(rename = "N")]
    n: u32,
    a: f64,
}

impl ProblemParams {
    pub fn new(
        lambda: f64,
        big_lambda: f64,
        operator: Operator,
        n: u32,
        a: f64,
    ) -> Result<Self, ParamError> {
        if !(lambda > 0.0 && big_lambda > 0.0) || !lambda.is_finite() || !big_lambda.is_finite() {
            return Err(ParamError::NonPositiveEllipticity { lambda, big_lambda });
        }
        if lambda > big_lambda {
            return Err(ParamError::LambdaOrder { lambda, big_lambda });
        }
        if n < 3 {
            return Err(ParamError::DimensionTooSmall(n));
        }
        if !(a > -1.0) || !a.is_finite() {
            return Err(ParamError::WeightTooNegative(a));
        }
        let params = Self {
            lambda,
            big_lambda,
            operator,
            n,
            a,
        };
        if operator == Operator::MPlus && params.n_tilde_plus() <= 2.0 {
            return Err(ParamError::DegenerateDimensionLike(params.n_tilde_plus()));
        }
        Ok(params)
    }

    /// The Laplacian case `λ = Λ = 1`.
    pub fn laplacian(n: u32, a: f64) -> Result<Self, ParamError> {
        Self::new(1.0, 1.0, Operator::MPlus, n, a)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }

    pub fn operator(&self) -> Operator {
        self.operator
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn n_tilde_plus(&self) -> f64 {
        self.lambda / self.big_lambda * (self.dim() - 1.0) + 1.0
    }

    pub fn n_tilde_minus(&self) -> f64 {
        self.big_lambda / self.lambda * (self.dim() - 1.0) + 1.0
    }

    /// Dimension-like number governing the convex region of the first quadrant.
    pub fn n_tilde(&self) -> f64 {
        match self.operator {
            Operator::MPlus => self.n_tilde_plus(),
            Operator::MMinus => self.n_tilde_minus(),
        }
    }

    /// Ellipticity constant multiplying `u''` where `u'' < 0` (above the concavity line).
    pub fn kappa_upper(&self) -> f64 {
        match self.operator {
            Operator::MPlus => self.lambda,
            Operator::MMinus => self.big_lambda,
        }
    }

    /// Ellipticity constant multiplying `u''` where `u'' > 0` (below the concavity line).
    pub fn kappa_lower(&self) -> f64 {
        match self.operator {
            Operator::MPlus => self.big_lambda,
            Operator::MMinus => self.lambda,
        }
    }

    /// Dimension-like number and ellipticity constant for increasing solutions (third quadrant).
    pub fn third_quadrant_pair(&self) -> (f64, f64) {
        match self.operator {
            Operator::MPlus => (self.n_tilde_minus(), self.lambda),
            Operator::MMinus => (self.n_tilde_plus(), self.big_lambda),
        }
    }

    /// Height of the concavity line `Z = κ(N−1)`.
    pub fn concavity_level(&self) -> f64 {
        self.kappa_upper() * (self.dim() - 1.0)
    }

    /// Height of the saddle on the Z axis, `κ(N+a)`.
    pub fn n0_height(&self) -> f64 {
        self.kappa_upper() * (self.dim() + self.a)
    }

    /// Abscissa of the wall line `X = Ñ−2`.
    pub fn wall(&self) -> f64 {
        self.n_tilde() - 2.0
    }

    pub fn alpha(&self, p: f64) -> f64 {
        (2.0 + self.a) / (p - 1.0)
    }

    pub fn p_serrin(&self) -> f64 {
        let nt = self.n_tilde();
        (nt + self.a) / (nt - 2.0)
    }

    pub fn p_pseudo(&self) -> f64 {
        let nt = self.n_tilde();
        (nt + 2.0 + 2.0 * self.a) / (nt - 2.0)
    }

    pub fn p_sobolev(&self) -> f64 {
        (self.dim() + 2.0 + 2.0 * self.a) / (self.dim() - 2.0)
    }

    pub fn exponents(&self, p: f64) -> Result<ExponentSet, ParamError> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(ParamError::PBelowOne(p));
        }
        Ok(ExponentSet {
            operator: self.operator,
            n_tilde_plus: self.n_tilde_plus(),
            n_tilde_minus: self.n_tilde_minus(),
            n_tilde: self.n_tilde(),
            alpha: self.alpha(p),
            p_serrin: self.p_serrin(),
            p_pseudo: self.p_pseudo(),
            p_sobolev: self.p_sobolev(),
        })
    }
}

/// Exponents derived from the parameters at a fixed `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentSet {
    pub operator: Operator,
    pub n_tilde_plus: f64,
    pub n_tilde_minus: f64,
    /// The dimension-like number that applies to `operator`.
    pub n_tilde: f64,
    pub alpha: f64,
    pub p_serrin: f64,
    pub p_pseudo: f64,
    pub p_sobolev: f64,
}

impl ExponentSet {
    /// `max{p_serrin, p_sobolev} ≤ p_pseudo` for M⁺, `p_serrin ≤ p_pseudo ≤ p_sobolev` for M⁻.
    pub fn ordering_holds(&self) -> bool {
        let slack = 1e-12 * (1.0 + self.p_pseudo.abs());
        match self.operator {
            Operator::MPlus => self.p_serrin.max(self.p_sobolev) <= self.p_pseudo + slack,
            Operator::MMinus => {
                self.p_serrin <= self.p_pseudo + slack && self.p_pseudo <= self.p_sobolev + slack
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn rejects_degenerate_dimension_like_number() {
        let err = ProblemParams::new(1.0, 2.0, Operator::MPlus, 3, 0.0).unwrap_err();
        assert!(matches!(err, ParamError::DegenerateDimensionLike(n) if close(n, 2.0)));
        assert!(ProblemParams::new(1.0, 2.0, Operator::MMinus, 3, 0.0).is_ok());
    }

    #[test]
    fn rejects_invalid_inputs() {
        use ParamError::*;
        let op = Operator::MPlus;
        assert!(matches!(ProblemParams::new(0.0, 1.0, op, 3, 0.0), Err(NonPositiveEllipticity { .. })));
        assert!(matches!(ProblemParams::new(2.0, 1.0, op, 3, 0.0), Err(LambdaOrder { .. })));
        assert!(matches!(ProblemParams::new(1.0, 1.0, op, 2, 0.0), Err(DimensionTooSmall(2))));
        assert!(matches!(ProblemParams::new(1.0, 1.0, op, 3, -1.0), Err(WeightTooNegative(_))));
        let pr = ProblemParams::laplacian(3, 0.0).unwrap();
        assert!(matches!(pr.exponents(1.0), Err(PBelowOne(_))));
    }

    #[test]
    fn equal_constants_collapse_dimension_like_numbers() {
        let pr = ProblemParams::laplacian(3, 0.0).unwrap();
        assert!(close(pr.n_tilde_plus(), 3.0));
        assert!(close(pr.n_tilde_minus(), 3.0));
        let e = pr.exponents(3.0).unwrap();
        assert!(close(e.alpha, 1.0));
        assert!(close(e.p_serrin, 3.0));
        assert!(close(e.p_pseudo, 5.0));
        assert!(close(e.p_sobolev, 5.0));
    }

    #[test]
    fn plus_and_minus_reference_values() {
        let plus = ProblemParams::new(1.0, 2.0, Operator::MPlus, 4, 0.0).unwrap();
        let e = plus.exponents(2.0).unwrap();
        assert!(close(e.n_tilde, 2.5));
        assert!(close(e.p_serrin, 5.0));
        assert!(close(e.p_pseudo, 9.0));
        assert!(close(e.p_sobolev, 3.0));

        let minus = ProblemParams::new(1.0, 2.0, Operator::MMinus, 3, 0.0).unwrap();
        let e = minus.exponents(2.0).unwrap();
        assert!(close(e.n_tilde, 5.0));
        assert!(close(e.p_serrin, 5.0 / 3.0));
        assert!(close(e.p_pseudo, 7.0 / 3.0));
        assert!(close(e.p_sobolev, 5.0));
    }

    fn arb_params() -> impl Strategy<Value = ProblemParams> {
        (0.1f64..5.0, 1.0f64..4.0, any::<bool>(), 3u32..12, -0.9f64..4.0).prop_filter_map(
            "valid parameters",
            |(lambda, ratio, plus, n, a)| {
                let op = if plus { Operator::MPlus } else { Operator::MMinus };
                ProblemParams::new(lambda, lambda * ratio, op, n, a).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn dimension_like_numbers_bracket_n(pr in arb_params()) {
            let n = pr.dim();
            prop_assert!(pr.n_tilde_plus() <= n + 1e-12);
            prop_assert!(n <= pr.n_tilde_minus() + 1e-12);
            let equal = pr.lambda() == pr.big_lambda();
            prop_assert_eq!(equal, (pr.n_tilde_minus() - pr.n_tilde_plus()).abs() < 1e-12);
        }

        #[test]
        fn exponent_ordering(pr in arb_params(), p in 1.01f64..20.0) {
            prop_assert!(pr.exponents(p).unwrap().ordering_holds());
        }

        #[test]
        fn alpha_is_decreasing_and_hits_half_gap_at_pseudo(pr in arb_params(), p in 1.01f64..20.0, dp in 1e-3f64..5.0) {
            prop_assert!(pr.alpha(p + dp) < pr.alpha(p));
            let half_gap = (pr.n_tilde() - 2.0) / 2.0;
            prop_assert!(close(pr.alpha(pr.p_pseudo()), half_gap));
        }
    }
}
