//! Problem parameters and every derived constant used downstream.
//!
//! The Pucci extremal operators with ellipticity constants `0 < λ ≤ Λ` act on
//! radial functions through the Hessian eigenvalues `u''` (simple) and `u'/r`
//! (multiplicity `N - 1`). The associated dimension-like numbers are
//!
//! ```text
//! Ñ₊ = (λ/Λ)(N-1) + 1        Ñ₋ = (Λ/λ)(N-1) + 1
//! ```
//!
//! and for `N = 2`, `λ < Λ`, the operator `M⁻` has `Ñ₋ > 2`, which is what
//! makes a critical exponent possible in the plane.

use crate::error::Error;
use crate::Result;

use alloc::format;

/// Which extremal operator drives the equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Operator {
    /// `M⁺`: Λ on positive Hessian eigenvalues, λ on negative ones.
    Plus,
    /// `M⁻`: λ on positive Hessian eigenvalues, Λ on negative ones.
    Minus,
}

/// The single source of truth for a problem instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    /// Lower ellipticity constant λ.
    pub lambda: f64,
    /// Upper ellipticity constant Λ.
    pub big_lambda: f64,
    /// Exponent `p > 1` of the nonlinearity `u^p`.
    pub p: f64,
    /// Operator sign.
    pub operator: Operator,
    /// Ambient dimension. All phase-plane analysis requires `N = 2`.
    pub dimension: u32,
}

impl ProblemParams {
    /// Validates and builds a parameter set in dimension 2.
    pub fn new(lambda: f64, big_lambda: f64, p: f64, operator: Operator) -> Result<Self> {
        Self::with_dimension(lambda, big_lambda, p, operator, 2)
    }

    /// Validates and builds a parameter set in dimension `n >= 2`.
    pub fn with_dimension(
        lambda: f64,
        big_lambda: f64,
        p: f64,
        operator: Operator,
        dimension: u32,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        if !(big_lambda.is_finite() && big_lambda >= lambda) {
            return Err(Error::invalid(format!(
                "Lambda must satisfy Lambda >= lambda, got Lambda = {big_lambda}, lambda = {lambda}"
            )));
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::invalid(format!("p must be > 1, got {p}")));
        }
        if dimension < 2 {
            return Err(Error::invalid(format!("dimension must be >= 2, got {dimension}")));
        }
        Ok(Self { lambda, big_lambda, p, operator, dimension })
    }

    /// Same parameters at a different exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::with_dimension(self.lambda, self.big_lambda, p, self.operator, self.dimension)
    }

    /// Derived constants for this parameter set.
    pub fn derive(&self) -> DerivedConstants {
        let n = f64::from(self.dimension);
        let n_tilde_plus = self.lambda / self.big_lambda * (n - 1.0) + 1.0;
        let n_tilde_minus = self.big_lambda / self.lambda * (n - 1.0) + 1.0;
        let alpha = 2.0 / (self.p - 1.0);
        // beta = (3 - p)/(p - 1) = alpha - 1; computed this way so that
        // beta + 1 == alpha holds to the last bit.
        let beta = alpha - 1.0;
        let (serrin_minus, p_c) = if n_tilde_minus > 2.0 {
            (
                Some(n_tilde_minus / (n_tilde_minus - 2.0)),
                Some((n_tilde_minus + 2.0) / (n_tilde_minus - 2.0)),
            )
        } else {
            (None, None)
        };
        DerivedConstants { n_tilde_plus, n_tilde_minus, alpha, beta, serrin_minus, p_c }
    }

    /// Enforces the planar `M⁻` setting needed by the phase-plane modules.
    pub fn require_planar_minus(&self) -> Result<()> {
        if self.operator != Operator::Minus {
            return Err(Error::invalid("operation is defined for the M- operator only"));
        }
        if self.dimension != 2 {
            return Err(Error::invalid(format!(
                "phase-plane analysis requires dimension 2, got {}",
                self.dimension
            )));
        }
        if self.big_lambda <= self.lambda {
            return Err(Error::DegenerateMinus);
        }
        Ok(())
    }
}

/// Quantities derived from a [`ProblemParams`], computed once and passed around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// `Ñ₊ = (λ/Λ)(N-1) + 1`.
    pub n_tilde_plus: f64,
    /// `Ñ₋ = (Λ/λ)(N-1) + 1`.
    pub n_tilde_minus: f64,
    /// `α = 2/(p-1)`: slow-decay rate and the Dulac X-exponent.
    pub alpha: f64,
    /// `β = (3-p)/(p-1) = α - 1`: the Dulac Z-exponent.
    pub beta: f64,
    /// Serrin-type exponent `Ñ₋/(Ñ₋-2)`; absent when `Ñ₋ <= 2`.
    pub serrin_minus: Option<f64>,
    /// `p_c = (Ñ₋+2)/(Ñ₋-2)`: where `M₀` switches type; absent when `Ñ₋ <= 2`.
    pub p_c: Option<f64>,
}

/// The exponent bounds of the critical-exponent theorem for `M⁻`, `N = 2`.
///
/// The upper bound for the periodic-orbit threshold is reported in both sign
/// variants that appear in the source material: the theorem statement carries
/// `Ñ₋-2 + (λ/Λ)(Ñ₋-2)²` in the denominator while the proof concludes with
/// `Ñ₋-2 - (λ/Λ)(Ñ₋-2)²`. They are not reconciled there, so both are kept and
/// the empirical threshold estimate adjudicates between them numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundsReport {
    /// `(Ñ₋+2)/(Ñ₋-2)`, strict lower bound for the critical exponent.
    pub lower: f64,
    /// Upper bound with `+` in the denominator (theorem-statement form).
    pub upper_plus_form: f64,
    /// Upper bound with `-` in the denominator (proof-text form).
    pub upper_minus_form: f64,
    /// `max{3, p_c}`, the floor for the no-periodic-orbit exponent `p₀`.
    pub p0_floor: f64,
}

/// Lower and both upper bounds for `p₋*` and the periodic-orbit threshold.
///
/// Requires the planar `M⁻` setting with `λ < Λ`; the bounds divide by
/// `Ñ₋ - 2` and degenerate at `λ = Λ`.
pub fn exponent_bounds(params: &ProblemParams) -> Result<BoundsReport> {
    params.require_planar_minus()?;
    let d = params.derive();
    let a = d.n_tilde_minus - 2.0;
    let ratio = params.lambda / params.big_lambda;
    let lower = (d.n_tilde_minus + 2.0) / a;
    let upper_plus_form = lower + 4.0 / (a + ratio * a * a);
    let upper_minus_form = lower + 4.0 / (a - ratio * a * a);
    let p0_floor = if lower > 3.0 { lower } else { 3.0 };
    Ok(BoundsReport { lower, upper_plus_form, upper_minus_form, p0_floor })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn minus(lambda: f64, big_lambda: f64, p: f64) -> ProblemParams {
        ProblemParams::new(lambda, big_lambda, p, Operator::Minus).unwrap()
    }

    #[test]
    fn laplacian_case_collapses_dimension_numbers() {
        let d = minus(1.0, 1.0, 3.0).derive();
        assert_eq!(d.n_tilde_plus, 2.0);
        assert_eq!(d.n_tilde_minus, 2.0);
        assert!(d.p_c.is_none());
        assert!(d.serrin_minus.is_none());
    }

    #[test]
    fn reference_ellipticity_pair() {
        let d = minus(1.0, 2.0, 3.0).derive();
        assert_eq!(d.n_tilde_minus, 3.0);
        assert_eq!(d.serrin_minus, Some(3.0));
        assert_eq!(d.p_c, Some(5.0));
    }

    #[test]
    fn dulac_exponents_at_p_five() {
        let d = minus(1.0, 2.0, 5.0).derive();
        assert_eq!(d.alpha, 0.5);
        assert_eq!(d.beta, -0.5);
    }

    #[test]
    fn bounds_for_ratio_two() {
        let b = exponent_bounds(&minus(1.0, 2.0, 6.0)).unwrap();
        assert_eq!(b.lower, 5.0);
        assert_relative_eq!(b.upper_plus_form, 5.0 + 4.0 / 1.5, max_relative = 1e-15);
        assert_eq!(b.upper_minus_form, 13.0);
        assert_eq!(b.p0_floor, 5.0);
    }

    #[test]
    fn bounds_for_ratio_three() {
        let p = minus(1.0, 3.0, 4.0);
        let d = p.derive();
        assert_eq!(d.n_tilde_minus, 4.0);
        let b = exponent_bounds(&p).unwrap();
        assert_eq!(b.lower, 3.0);
        assert_eq!(b.p0_floor, 3.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ProblemParams::new(0.0, 1.0, 2.0, Operator::Minus).is_err());
        assert!(ProblemParams::new(-1.0, 1.0, 2.0, Operator::Minus).is_err());
        assert!(ProblemParams::new(2.0, 1.0, 2.0, Operator::Minus).is_err());
        assert!(ProblemParams::new(1.0, 2.0, 1.0, Operator::Minus).is_err());
        assert!(ProblemParams::new(1.0, 2.0, f64::NAN, Operator::Minus).is_err());
    }

    #[test]
    fn degenerate_minus_rejected_by_bounds() {
        assert_eq!(
            exponent_bounds(&minus(1.0, 1.0, 3.0)),
            Err(Error::DegenerateMinus)
        );
    }

    #[test]
    fn plus_operator_rejected_by_bounds() {
        let p = ProblemParams::new(1.0, 2.0, 3.0, Operator::Plus).unwrap();
        assert!(exponent_bounds(&p).is_err());
    }

    proptest! {
        #[test]
        fn derive_identities(lambda in 0.05f64..10.0, ratio in 1.0f64..20.0, p in 1.0001f64..60.0) {
            let params = minus(lambda, lambda * ratio, p);
            let d = params.derive();
            prop_assert!((d.alpha * (p - 1.0) - 2.0).abs() <= 1e-13);
            // beta is stored as alpha - 1, so the identity holds to one ulp of 1.
            prop_assert!((d.beta + 1.0 - d.alpha).abs() <= f64::EPSILON);
            let n = 2.0;
            prop_assert!(d.n_tilde_plus <= n + 1e-12 && n <= d.n_tilde_minus + 1e-12);
        }

        #[test]
        fn bound_ordering(lambda in 0.05f64..10.0, ratio in 1.001f64..20.0, p in 1.5f64..40.0) {
            let params = minus(lambda, lambda * ratio, p);
            let b = exponent_bounds(&params).unwrap();
            let d = params.derive();
            prop_assert!(b.lower < b.upper_plus_form);
            prop_assert!(b.upper_plus_form <= b.upper_minus_form);
            prop_assert!(b.upper_minus_form.is_finite());
            prop_assert!(d.p_c.unwrap() > d.serrin_minus.unwrap());
        }
    }
}
