//! Problem specification, determinant conventions, case classification and
//! validation.
//!
//! The transmission conditions at the interior point `c` are
//!
//!   tau3(y) = b11m y'(c-) + b10m y(c-) + b11p y'(c+) + b10p y(c+) = 0,
//!   tau4(y) = b21m y'(c-) + b20m y(c-) + b21p y'(c+) + b20p y(c+) = 0,
//!
//! stored as the 2x4 matrix `beta` with row i = (bi0m, bi1m, bi0p, bi1p),
//! i.e. column order (minus-side value, minus-side derivative, plus-side
//! value, plus-side derivative). `Delta_kj` always means the determinant of
//! columns k and j of that stored matrix; `Delta12` is the determinant of the
//! minus block, `Delta34` of the plus block. All determinant shortcut
//! formulas elsewhere in the crate are written for this column order and are
//! verified in debug builds against direct linear solves of tau3 = tau4 = 0.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Evaluation side for quantities with one-sided limits at `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Piecewise polynomial potential: one coefficient list per side of `c`,
/// constant term first. The potential is defined everywhere on [a, b] except
/// exactly at `c`, where only the one-sided limits exist.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub c: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl Potential {
    pub fn new(c: f64, left: Vec<f64>, right: Vec<f64>) -> Self {
        Self { c, left, right }
    }

    pub fn zero(c: f64) -> Self {
        Self::new(c, vec![], vec![])
    }

    pub fn constant(c: f64, left: f64, right: f64) -> Self {
        Self::new(c, vec![left], vec![right])
    }

    fn horner(coeffs: &[f64], x: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)
    }

    /// One-sided evaluation; infallible because the side is explicit.
    pub fn eval_on(&self, x: f64, side: Side) -> f64 {
        match side {
            Side::Left => Self::horner(&self.left, x),
            Side::Right => Self::horner(&self.right, x),
        }
    }

    /// One-sided evaluation of q'.
    pub fn eval_deriv_on(&self, x: f64, side: Side) -> f64 {
        let coeffs = match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        };
        coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &ck)| acc * x + k as f64 * ck)
    }

    /// Evaluation with automatic side selection (`side = None`). At exactly
    /// `x = c` the caller must pick a side.
    pub fn eval(&self, x: f64, side: Option<Side>) -> Result<f64, ModelError> {
        match side {
            Some(s) => Ok(self.eval_on(x, s)),
            None => {
                if x < self.c {
                    Ok(self.eval_on(x, Side::Left))
                } else if x > self.c {
                    Ok(self.eval_on(x, Side::Right))
                } else {
                    Err(ModelError::AtTransmissionPointWithoutSide { x })
                }
            }
        }
    }

    /// Upper bound for |q| on [a, b], estimated by dense sampling of both
    /// pieces (the coefficients are low-degree polynomials, so 513 samples
    /// per piece is far denser than any sign structure they can have).
    pub fn sup_abs(&self, a: f64, b: f64) -> f64 {
        let mut m: f64 = 0.0;
        let n = 512;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let xl = a + (self.c - a) * t;
            let xr = self.c + (b - self.c) * t;
            m = m.max(self.eval_on(xl, Side::Left).abs());
            m = m.max(self.eval_on(xr, Side::Right).abs());
        }
        m
    }
}

/// The seven determinants used throughout: `d0` from the right-boundary
/// coefficient matrix [[alpha21, alpha20], [alpha21', alpha20']], and the six
/// 2x2 column determinants `d_kj` of the stored transmission matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterminantSet {
    pub d0: f64,
    pub d12: f64,
    pub d13: f64,
    pub d14: f64,
    pub d23: f64,
    pub d24: f64,
    pub d34: f64,
}

impl DeterminantSet {
    /// Residual of the Pluecker identity
    /// d12 d34 - d13 d24 + d14 d23 = 0, which any 2x4 matrix satisfies;
    /// used as an arithmetic self-check.
    pub fn plucker_residual(&self) -> f64 {
        self.d12 * self.d34 - self.d13 * self.d24 + self.d14 * self.d23
    }

    /// Largest magnitude among the three Pluecker terms, for relative
    /// comparisons of the residual.
    pub fn plucker_scale(&self) -> f64 {
        (self.d12 * self.d34)
            .abs()
            .max((self.d13 * self.d24).abs())
            .max((self.d14 * self.d23).abs())
    }

    /// Floating-point error scale of `plucker_residual` for the matrix the
    /// determinants came from: each d_kj carries cancellation error up to a
    /// few eps times its largest summand, which the products then amplify.
    /// The residual of exact arithmetic is zero, so anything below
    /// 8 eps times this scale is consistent with the identity.
    pub fn plucker_error_scale(beta: &[[f64; 4]; 2]) -> f64 {
        let m = |k: usize, j: usize| (beta[0][k] * beta[1][j]).abs().max((beta[0][j] * beta[1][k]).abs());
        let d = |k: usize, j: usize| (beta[0][k] * beta[1][j] - beta[0][j] * beta[1][k]).abs();
        let term = |k1: usize, j1: usize, k2: usize, j2: usize| {
            d(k1, j1) * m(k2, j2) + d(k2, j2) * m(k1, j1)
        };
        term(0, 1, 2, 3).max(term(0, 2, 1, 3)).max(term(0, 3, 1, 2)).max(1.0)
    }
}

/// Asymptotic case, determined by which of alpha21' and alpha11 vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// alpha21' != 0 and alpha11 != 0
    I,
    /// alpha21' != 0 and alpha11 == 0
    II,
    /// alpha21' == 0 and alpha11 != 0
    III,
    /// alpha21' == 0 and alpha11 == 0
    IV,
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseTag::I => "I",
            CaseTag::II => "II",
            CaseTag::III => "III",
            CaseTag::IV => "IV",
        };
        f.write_str(s)
    }
}

/// Full problem specification. `beta` rows follow the stored column order
/// documented at module level.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub a: f64,
    pub c: f64,
    pub b: f64,
    pub alpha10: f64,
    pub alpha11: f64,
    pub alpha20: f64,
    pub alpha21: f64,
    pub alpha20p: f64,
    pub alpha21p: f64,
    pub beta: [[f64; 4]; 2],
    pub q: Potential,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    OrderingViolation,
    /// Left boundary row (alpha10, alpha11) or the whole right boundary block
    /// is identically zero.
    DegenerateBoundaryRow(&'static str),
    PositivityViolation { det: &'static str, value: f64 },
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationIssue::OrderingViolation => write!(f, "ordering violation: need a < c < b"),
            ValidationIssue::DegenerateBoundaryRow(which) => {
                write!(f, "degenerate boundary row: {which}")
            }
            ValidationIssue::PositivityViolation { det, value } => {
                write!(f, "positivity violation: {det} = {value} (must be > 0)")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("q is two-valued at the transmission point x = {x}; pick a side")]
    AtTransmissionPointWithoutSide { x: f64 },
    #[error("invalid problem: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<ValidationIssue>),
    #[error("malformed problem file: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ProblemSpec {
    pub fn lengths(&self) -> (f64, f64) {
        (self.c - self.a, self.b - self.c)
    }

    /// All seven determinants of the stored coefficient matrices.
    pub fn determinants(&self) -> DeterminantSet {
        let b = &self.beta;
        let d = |k: usize, j: usize| b[0][k] * b[1][j] - b[0][j] * b[1][k];
        DeterminantSet {
            d0: self.alpha21 * self.alpha20p - self.alpha20 * self.alpha21p,
            d12: d(0, 1),
            d13: d(0, 2),
            d14: d(0, 3),
            d23: d(1, 2),
            d24: d(1, 3),
            d34: d(2, 3),
        }
    }

    /// Case classification. "Zero" means magnitude below `zero_tol` relative
    /// to the largest coefficient of the same boundary row group, so scaling
    /// either boundary condition by a positive constant cannot change the tag.
    pub fn classify_case(&self, zero_tol: f64) -> CaseTag {
        let left_scale = self.alpha10.abs().max(self.alpha11.abs());
        let right_scale = self
            .alpha20
            .abs()
            .max(self.alpha21.abs())
            .max(self.alpha20p.abs())
            .max(self.alpha21p.abs());
        let a11_zero = self.alpha11.abs() <= zero_tol * left_scale;
        let a21p_zero = self.alpha21p.abs() <= zero_tol * right_scale;
        match (a21p_zero, a11_zero) {
            (false, false) => CaseTag::I,
            (false, true) => CaseTag::II,
            (true, false) => CaseTag::III,
            (true, true) => CaseTag::IV,
        }
    }

    /// Classification with the default threshold 1e-12.
    pub fn case(&self) -> CaseTag {
        self.classify_case(1e-12)
    }

    /// Checks ordering, non-degeneracy of the boundary rows, and (in strict
    /// mode) the positivity assumptions d0 > 0, d12 > 0, d34 > 0. In
    /// permissive mode positivity violations are returned as warnings, which
    /// lets classical instances (lambda-independent right condition, d0 = 0)
    /// run through the same pipeline.
    pub fn validate(&self, strict: bool) -> Result<Vec<ValidationIssue>, ModelError> {
        let mut errors = Vec::new();
        let mut warnings = Vec::new();

        if !(self.a < self.c && self.c < self.b) {
            errors.push(ValidationIssue::OrderingViolation);
        }
        if self.alpha10 == 0.0 && self.alpha11 == 0.0 {
            errors.push(ValidationIssue::DegenerateBoundaryRow("(alpha10, alpha11)"));
        }
        if self.alpha20 == 0.0
            && self.alpha21 == 0.0
            && self.alpha20p == 0.0
            && self.alpha21p == 0.0
        {
            errors.push(ValidationIssue::DegenerateBoundaryRow(
                "(alpha20, alpha21) and (alpha20', alpha21')",
            ));
        }

        let dets = self.determinants();
        for (name, value) in [("Delta0", dets.d0), ("Delta12", dets.d12), ("Delta34", dets.d34)] {
            if value <= 0.0 {
                let issue = ValidationIssue::PositivityViolation { det: name, value };
                if strict {
                    errors.push(issue);
                } else {
                    warnings.push(issue);
                }
            }
        }

        if errors.is_empty() {
            Ok(warnings)
        } else {
            Err(ModelError::Validation(errors))
        }
    }

    /// tau1 applied to a state at `a`.
    pub fn tau1<S: Scalar>(&self, y_a: S, yp_a: S) -> S {
        y_a.scale(self.alpha10) + yp_a.scale(self.alpha11)
    }

    /// tau2 applied to a state at `b` (depends on lambda).
    pub fn tau2<S: Scalar>(&self, lambda: S, y_b: S, yp_b: S) -> S {
        y_b.scale(self.alpha20) - yp_b.scale(self.alpha21)
            + lambda * (y_b.scale(self.alpha20p) - yp_b.scale(self.alpha21p))
    }

    /// tau3 and tau4 applied to a pair of one-sided states at `c`.
    pub fn tau34<S: Scalar>(&self, minus: (S, S), plus: (S, S)) -> (S, S) {
        let row = |i: usize| {
            minus.1.scale(self.beta[i][1])
                + minus.0.scale(self.beta[i][0])
                + plus.1.scale(self.beta[i][3])
                + plus.0.scale(self.beta[i][2])
        };
        (row(0), row(1))
    }

    /// Terminal data for the psi construction at `b`:
    /// (alpha21 + lambda alpha21', alpha20 + lambda alpha20'). With these
    /// values tau2(psi) = 0 holds identically in lambda.
    pub fn psi_terminal<S: Scalar>(&self, lambda: S) -> (S, S) {
        (
            S::from_re(self.alpha21) + lambda.scale(self.alpha21p),
            S::from_re(self.alpha20) + lambda.scale(self.alpha20p),
        )
    }

    /// Initial data for the phi construction at `a`: (alpha11, -alpha10).
    /// With these values tau1(phi) = 0 holds identically.
    pub fn phi_initial<S: Scalar>(&self) -> (S, S) {
        (S::from_re(self.alpha11), S::from_re(-self.alpha10))
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let raw: ProblemFile = serde_json::from_str(text)?;
        Ok(raw.into())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ProblemFile::from(self)).expect("spec serializes")
    }
}

/// On-disk JSON schema.
#[derive(Debug, Serialize, Deserialize)]
struct ProblemFile {
    a: f64,
    c: f64,
    b: f64,
    alpha: AlphaFile,
    beta: [[f64; 4]; 2],
    q: PotentialFile,
}

#[derive(Debug, Serialize, Deserialize)]
struct AlphaFile {
    a10: f64,
    a11: f64,
    a20: f64,
    a21: f64,
    a20p: f64,
    a21p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PotentialFile {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl From<ProblemFile> for ProblemSpec {
    fn from(f: ProblemFile) -> Self {
        ProblemSpec {
            a: f.a,
            c: f.c,
            b: f.b,
            alpha10: f.alpha.a10,
            alpha11: f.alpha.a11,
            alpha20: f.alpha.a20,
            alpha21: f.alpha.a21,
            alpha20p: f.alpha.a20p,
            alpha21p: f.alpha.a21p,
            beta: f.beta,
            q: Potential::new(f.c, f.q.left, f.q.right),
        }
    }
}

impl From<&ProblemSpec> for ProblemFile {
    fn from(s: &ProblemSpec) -> Self {
        ProblemFile {
            a: s.a,
            c: s.c,
            b: s.b,
            alpha: AlphaFile {
                a10: s.alpha10,
                a11: s.alpha11,
                a20: s.alpha20,
                a21: s.alpha21,
                a20p: s.alpha20p,
                a21p: s.alpha21p,
            },
            beta: s.beta,
            q: PotentialFile {
                left: s.q.left.clone(),
                right: s.q.right.clone(),
            },
        }
    }
}

/// Conjugate of a complex-lambda state, used by symmetry checks.
pub fn conj_state(v: (Complex64, Complex64)) -> (Complex64, Complex64) {
    (v.0.conj(), v.1.conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    fn identity_beta() -> [[f64; 4]; 2] {
        [[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]]
    }

    fn simple_spec(beta: [[f64; 4]; 2]) -> ProblemSpec {
        ProblemSpec {
            a: 0.0,
            c: 1.0,
            b: 2.0,
            alpha10: 1.0,
            alpha11: 0.0,
            alpha20: 0.0,
            alpha21: 1.0,
            alpha20p: 1.0,
            alpha21p: 0.0,
            beta,
            q: Potential::zero(1.0),
        }
    }

    #[test]
    fn determinants_identity_transmission() {
        let spec = simple_spec(identity_beta());
        let d = spec.determinants();
        assert_eq!(d.d12, 1.0);
        assert_eq!(d.d34, 1.0);
        assert_eq!(d.d24, 0.0);
        assert_eq!(d.d23, 1.0);
        assert_eq!(d.d13, 0.0);
        assert_eq!(d.d14, -1.0);
        // A0 = [[1, 0], [0, 1]] corresponds to alpha21 = 1, alpha20' = 1
        assert_eq!(d.d0, 1.0);
    }

    #[test]
    fn determinants_zero_row() {
        let mut beta = identity_beta();
        beta[1] = [0.0; 4];
        let spec = simple_spec(beta);
        let d = spec.determinants();
        for v in [d.d12, d.d13, d.d14, d.d23, d.d24, d.d34] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn classify_cases() {
        let mut spec = simple_spec(identity_beta());
        spec.alpha21p = 1.0;
        spec.alpha11 = 1.0;
        assert_eq!(spec.classify_case(1e-12), CaseTag::I);

        spec.alpha21p = 0.0;
        spec.alpha11 = 0.0;
        assert_eq!(spec.classify_case(1e-12), CaseTag::IV);

        // below-threshold coefficient counts as zero
        spec.alpha21p = 1e-18;
        spec.alpha11 = 1.0;
        assert_eq!(spec.classify_case(1e-12), CaseTag::III);
    }

    #[test]
    fn validate_ok_strict() {
        let mut spec = simple_spec(identity_beta());
        // make Delta0 = 1 while keeping a lambda-free condition would fail;
        // use the eigenparameter-dependent form with d0 = 1
        spec.alpha20 = 0.0;
        spec.alpha21 = 1.0;
        spec.alpha20p = 1.0;
        spec.alpha21p = 0.0;
        let warnings = spec.validate(true).unwrap();
        assert!(warnings.is_empty());
    }

    #[test]
    fn validate_ordering_violation() {
        let mut spec = simple_spec(identity_beta());
        spec.c = 2.0;
        spec.b = 1.0;
        let err = spec.validate(true).unwrap_err();
        match err {
            ModelError::Validation(issues) => {
                assert!(issues.contains(&ValidationIssue::OrderingViolation))
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn validate_classical_dirichlet_is_permissive_only() {
        // Dirichlet at both ends: alpha20 = 1, everything else on the right
        // zero, hence d0 = 0.
        let mut spec = simple_spec(identity_beta());
        spec.alpha20 = 1.0;
        spec.alpha21 = 0.0;
        spec.alpha20p = 0.0;
        spec.alpha21p = 0.0;

        let err = spec.validate(true).unwrap_err();
        match err {
            ModelError::Validation(issues) => assert!(issues
                .iter()
                .any(|i| matches!(i, ValidationIssue::PositivityViolation { det: "Delta0", .. }))),
            other => panic!("unexpected error {other:?}"),
        }

        let warnings = spec.validate(false).unwrap();
        assert!(warnings
            .iter()
            .any(|i| matches!(i, ValidationIssue::PositivityViolation { det: "Delta0", .. })));
    }

    #[test]
    fn eval_q_sides() {
        let q = Potential::zero(1.0);
        assert_eq!(q.eval(0.5, None).unwrap(), 0.0);

        let q = Potential::new(1.0, vec![2.0], vec![5.0]);
        assert_eq!(q.eval(1.0, Some(Side::Left)).unwrap(), 2.0);
        assert_eq!(q.eval(1.0 + 1e-12, None).unwrap(), 5.0);
        assert!(matches!(
            q.eval(1.0, None),
            Err(ModelError::AtTransmissionPointWithoutSide { .. })
        ));

        // q = x on the left
        let q = Potential::new(1.0, vec![0.0, 1.0], vec![5.0]);
        assert_eq!(q.eval(0.25, None).unwrap(), 0.25);
    }

    #[test]
    fn json_round_trip() {
        let spec = presets::p2();
        let text = spec.to_json_string();
        let back = ProblemSpec::from_json_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn json_rejects_garbage() {
        assert!(matches!(
            ProblemSpec::from_json_str("{\"a\": 0}"),
            Err(ModelError::Parse(_))
        ));
    }

    proptest! {
        #[test]
        fn plucker_identity_holds(entries in proptest::array::uniform8(-100.0f64..100.0)) {
            let beta = [
                [entries[0], entries[1], entries[2], entries[3]],
                [entries[4], entries[5], entries[6], entries[7]],
            ];
            let spec = simple_spec(beta);
            let d = spec.determinants();
            let tol = 8.0 * f64::EPSILON * DeterminantSet::plucker_error_scale(&beta);
            prop_assert!(d.plucker_residual().abs() <= tol);
        }

        #[test]
        fn classify_invariant_under_positive_right_scaling(k in 1e-6f64..1e6) {
            let mut spec = simple_spec(identity_beta());
            spec.alpha11 = 1.0;
            spec.alpha21p = 1.0;
            let before = spec.classify_case(1e-12);
            spec.alpha20 *= k;
            spec.alpha21 *= k;
            spec.alpha20p *= k;
            spec.alpha21p *= k;
            prop_assert_eq!(before, spec.classify_case(1e-12));
        }
    }
}
