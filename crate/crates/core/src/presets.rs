//! Ready-made problem instances used by the CLI examples, the browser demo
//! and the test suites.

use std::f64::consts::FRAC_PI_6;

use crate::model::{CaseTag, Potential, ProblemSpec};

/// Transmission rows encoding a phase-space rotation
/// (y(c+), y'(c+)) = R(theta) (y(c-), y'(c-)). Both block determinants are 1
/// and Delta24 = sin(theta), so any theta not a multiple of pi gives a
/// genuinely coupling transmission.
pub fn rotation_beta(theta: f64) -> [[f64; 4]; 2] {
    let (s, c) = theta.sin_cos();
    [[-c, s, 1.0, 0.0], [-s, -c, 0.0, 1.0]]
}

/// Identity transmission (plain continuity across `c`). Delta24 = 0.
pub fn identity_beta() -> [[f64; 4]; 2] {
    [[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]]
}

/// Classical Dirichlet problem on [0, 2] in disguise: q = 0, identity
/// transmission at c = 1, y(0) = y(2) = 0. The right condition carries no
/// lambda term, so Delta0 = 0 and the instance only passes permissive
/// validation. Exact eigenvalues: lambda_n = (n pi / 2)^2.
pub fn classical_dirichlet() -> ProblemSpec {
    ProblemSpec {
        a: 0.0,
        c: 1.0,
        b: 2.0,
        alpha10: 1.0,
        alpha11: 0.0,
        alpha20: 1.0,
        alpha21: 0.0,
        alpha20p: 0.0,
        alpha21p: 0.0,
        beta: identity_beta(),
        q: Potential::zero(1.0),
    }
}

/// Coupling-transmission instance "P2": q = 0 on [0, 1) U (1, 2], rotation
/// transmission by pi/6 (Delta24 = 1/2), y(0) = 0 on the left and
/// y'(2) = lambda y(2) on the right (alpha21 = 1, alpha20' = 1). Case IV,
/// Delta0 = 1, all positivity assumptions hold.
pub fn p2() -> ProblemSpec {
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
        beta: rotation_beta(FRAC_PI_6),
        q: Potential::zero(1.0),
    }
}

/// One instance per asymptotic case, with piece lengths c - a = 1 and
/// b - c = sqrt(2) (an irrational ratio keeps the two branch lattices from
/// colliding) and a small nonzero polynomial potential so the remainder
/// terms of the asymptotic formulas are genuinely nonzero.
pub fn case_instance(tag: CaseTag) -> ProblemSpec {
    let mut spec = case_instance_zero_q(tag);
    spec.q = Potential::new(1.0, vec![0.6, -0.4], vec![0.3, 0.2, 0.1]);
    spec
}

/// Same boundary/transmission structure as `case_instance` but with q = 0.
pub fn case_instance_zero_q(tag: CaseTag) -> ProblemSpec {
    let (alpha10, alpha11) = match tag {
        CaseTag::I | CaseTag::III => (0.0, 1.0),
        CaseTag::II | CaseTag::IV => (1.0, 0.0),
    };
    // alpha21' != 0 rows for cases I/II, alpha21' = 0 rows for III/IV;
    // both choices have Delta0 = 1.
    let (alpha20, alpha21, alpha20p, alpha21p) = match tag {
        CaseTag::I | CaseTag::II => (-1.0, 0.0, 0.0, 1.0),
        CaseTag::III | CaseTag::IV => (0.0, 1.0, 1.0, 0.0),
    };
    ProblemSpec {
        a: 0.0,
        c: 1.0,
        b: 1.0 + std::f64::consts::SQRT_2,
        alpha10,
        alpha11,
        alpha20,
        alpha21,
        alpha20p,
        alpha21p,
        beta: rotation_beta(FRAC_PI_6),
        q: Potential::zero(1.0),
    }
}

/// Identity transmission with a strongly lambda-dependent right condition
/// tau2(y) = y(b) (1 + 5 lambda) + lambda y'(b); its lowest eigenvalue is
/// negative (about -0.1781), exercising the scan below lambda = 0.
pub fn negative_eigenvalue_instance() -> ProblemSpec {
    ProblemSpec {
        a: 0.0,
        c: 1.0,
        b: 2.0,
        alpha10: 1.0,
        alpha11: 0.0,
        alpha20: 1.0,
        alpha21: 0.0,
        alpha20p: 5.0,
        alpha21p: -1.0,
        beta: identity_beta(),
        q: Potential::zero(1.0),
    }
}

/// Diagonal jump y(c+) = 2 y(c-), y'(c+) = y'(c-) / 2 (Delta24 = 0, so no
/// asymptotic seeding) with a nonzero potential on both pieces.
pub fn diagonal_jump() -> ProblemSpec {
    ProblemSpec {
        a: 0.0,
        c: 1.0,
        b: 2.0,
        alpha10: 0.3,
        alpha11: 1.0,
        alpha20: 0.0,
        alpha21: 1.0,
        alpha20p: 1.0,
        alpha21p: 0.0,
        beta: [[2.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -2.0]],
        q: Potential::new(1.0, vec![0.5, 0.3], vec![1.0, 0.0, 0.2]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for spec in [
            p2(),
            case_instance(CaseTag::I),
            case_instance(CaseTag::II),
            case_instance(CaseTag::III),
            case_instance(CaseTag::IV),
            negative_eigenvalue_instance(),
            diagonal_jump(),
        ] {
            assert!(spec.validate(true).is_ok(), "{spec:?}");
        }
        // the classical instance is permissive-only
        assert!(classical_dirichlet().validate(true).is_err());
        assert!(classical_dirichlet().validate(false).is_ok());
    }

    #[test]
    fn case_instances_classify_as_named() {
        for tag in [CaseTag::I, CaseTag::II, CaseTag::III, CaseTag::IV] {
            assert_eq!(case_instance(tag).case(), tag);
        }
        assert_eq!(p2().case(), CaseTag::IV);
    }

    #[test]
    fn rotation_beta_determinants() {
        let spec = p2();
        let d = spec.determinants();
        assert!((d.d12 - 1.0).abs() < 1e-15);
        assert!((d.d34 - 1.0).abs() < 1e-15);
        assert!((d.d24 - 0.5).abs() < 1e-15);
        assert!((d.d0 - 1.0).abs() < 1e-15);
    }
}
