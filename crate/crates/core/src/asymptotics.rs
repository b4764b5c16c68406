//! Leading-order asymptotic formulas for the fundamental solutions, the
//! characteristic function, eigenvalues and eigenfunctions, plus the decay
//! measurement that compares predicted against computed sqrt-eigenvalues.
//!
//! All formulas are evaluated for real s = sqrt(lambda) > 0 and are written
//! in the stored determinant convention (see `model` and `solutions`): the
//! transmitted amplitude of phi on the right piece carries d24/d34, that of
//! psi on the left piece carries d24/d12, and the characteristic-function
//! leading term is
//!
//!   omega(s^2) ~ d24 s^2 F_left(s) F_right(s),
//!   F_left  = alpha11 s sin(s (c-a))   or  alpha10 cos(s (c-a)),
//!   F_right = alpha21' s sin(s (b-c))  or  alpha20' cos(s (b-c)),
//!
//! choosing the first form when the respective coefficient is nonzero. The
//! remainder of each formula is one power of s below its leading term.

use thiserror::Error;

use crate::model::{CaseTag, ProblemSpec, Side};
use crate::spectrum::{
    asymptotic_seeds, label_branches, refine, seed_window_brackets, AsymptoticSeed, Branch,
    Eigenpair, SolveOptions, SpectrumError,
};

/// One row of the eigenvalue decay table: how far a computed
/// sqrt-eigenvalue sits from its seed, scaled by n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub n: i64,
    pub branch: Branch,
    pub s_computed: f64,
    pub s_pred: f64,
    pub err: f64,
    pub n_times_err: f64,
}

impl DecayRow {
    pub fn new(n: i64, branch: Branch, s_computed: f64, s_pred: f64) -> Self {
        let err = (s_computed - s_pred).abs();
        DecayRow {
            n,
            branch,
            s_computed,
            s_pred,
            err,
            n_times_err: n as f64 * err,
        }
    }
}

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

/// Which fundamental solution a leading-term query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Phi,
    Psi,
}

fn split_lambda(lambda: f64) -> f64 {
    assert!(lambda > 0.0, "asymptotic formulas need lambda > 0");
    lambda.sqrt()
}

/// Leading term of phi (k-th derivative) at x; the piece is chosen by the
/// sign of x - c and must not be exactly c.
pub fn phi_leading(spec: &ProblemSpec, lambda: f64, x: f64, k: u8) -> f64 {
    assert!(k <= 1);
    let s = split_lambda(lambda);
    let d = spec.determinants();
    let a11_nonzero = !matches!(spec.case(), CaseTag::II | CaseTag::IV);
    debug_assert!(x != spec.c, "leading terms are one-sided; x must avoid c");
    if x < spec.c {
        let t = x - spec.a;
        if a11_nonzero {
            match k {
                0 => spec.alpha11 * (s * t).cos(),
                _ => -spec.alpha11 * s * (s * t).sin(),
            }
        } else {
            match k {
                0 => -spec.alpha10 / s * (s * t).sin(),
                _ => -spec.alpha10 * (s * t).cos(),
            }
        }
    } else {
        let amp = if a11_nonzero {
            d.d24 / d.d34 * spec.alpha11 * s * (s * (spec.c - spec.a)).sin()
        } else {
            d.d24 / d.d34 * spec.alpha10 * (s * (spec.c - spec.a)).cos()
        };
        let t = x - spec.c;
        match k {
            0 => amp * (s * t).cos(),
            _ => -amp * s * (s * t).sin(),
        }
    }
}

/// Leading term of psi (k-th derivative) at x, mirroring `phi_leading` with
/// the alpha21'-dichotomy.
pub fn psi_leading(spec: &ProblemSpec, lambda: f64, x: f64, k: u8) -> f64 {
    assert!(k <= 1);
    let s = split_lambda(lambda);
    let d = spec.determinants();
    let a21p_nonzero = !matches!(spec.case(), CaseTag::III | CaseTag::IV);
    debug_assert!(x != spec.c, "leading terms are one-sided; x must avoid c");
    if x > spec.c {
        let t = spec.b - x;
        if a21p_nonzero {
            match k {
                0 => spec.alpha21p * s * s * (s * t).cos(),
                _ => spec.alpha21p * s * s * s * (s * t).sin(),
            }
        } else {
            match k {
                0 => -spec.alpha20p * s * (s * t).sin(),
                _ => spec.alpha20p * s * s * (s * t).cos(),
            }
        }
    } else {
        let amp = if a21p_nonzero {
            d.d24 / d.d12 * spec.alpha21p * s.powi(3) * (s * (spec.b - spec.c)).sin()
        } else {
            d.d24 / d.d12 * spec.alpha20p * s * s * (s * (spec.b - spec.c)).cos()
        };
        let t = x - spec.c;
        match k {
            0 => amp * (s * t).cos(),
            _ => -amp * s * (s * t).sin(),
        }
    }
}

/// s-exponent of the remainder of the corresponding leading-term formula.
pub fn remainder_order(spec: &ProblemSpec, family: Family, side: Side, k: u8) -> i32 {
    let k = k as i32;
    match family {
        Family::Phi => {
            let a11_nonzero = !matches!(spec.case(), CaseTag::II | CaseTag::IV);
            match (a11_nonzero, side) {
                (true, Side::Left) => k - 1,
                (true, Side::Right) => k,
                (false, Side::Left) => k - 2,
                (false, Side::Right) => k - 1,
            }
        }
        Family::Psi => {
            let a21p_nonzero = !matches!(spec.case(), CaseTag::III | CaseTag::IV);
            match (a21p_nonzero, side) {
                (true, Side::Right) => k + 1,
                (true, Side::Left) => k + 2,
                (false, Side::Right) => k,
                (false, Side::Left) => k + 1,
            }
        }
    }
}

/// Leading term of the characteristic function at lambda = s^2 (real s),
/// including the d24 prefactor and all coefficient factors.
pub fn charfun_leading(spec: &ProblemSpec, lambda: f64) -> f64 {
    let s = split_lambda(lambda);
    let d = spec.determinants();
    let (len_left, len_right) = spec.lengths();
    let case = spec.case();
    let f_left = match case {
        CaseTag::I | CaseTag::III => spec.alpha11 * s * (s * len_left).sin(),
        CaseTag::II | CaseTag::IV => spec.alpha10 * (s * len_left).cos(),
    };
    let f_right = match case {
        CaseTag::I | CaseTag::II => spec.alpha21p * s * (s * len_right).sin(),
        CaseTag::III | CaseTag::IV => spec.alpha20p * (s * len_right).cos(),
    };
    d.d24 * s * s * f_left * f_right
}

/// (leading s-power, remainder s-power) of `charfun_leading` per case.
pub fn charfun_orders(case: CaseTag) -> (i32, i32) {
    match case {
        CaseTag::I => (4, 3),
        CaseTag::II | CaseTag::III => (3, 2),
        CaseTag::IV => (2, 1),
    }
}

/// The explicit asymptotic eigenfunction expression for a seed: the
/// solution leading term evaluated at the predicted eigenvalue
/// lambda = s_pred^2. Intended as a diagnostic overlay, not a solver path.
pub fn eigenfunction_leading(spec: &ProblemSpec, seed: &AsymptoticSeed, x: f64) -> f64 {
    phi_leading(spec, seed.s_pred * seed.s_pred, x, 0)
}

/// Normalized inner-product overlap between a computed eigenfunction and the
/// solution leading term evaluated at the computed eigenvalue, sampled on a
/// uniform grid over both pieces. Approaches 1 as the eigenvalue index
/// grows.
pub fn eigenfunction_overlap(spec: &ProblemSpec, pair: &Eigenpair) -> f64 {
    assert!(!pair.s_is_imaginary, "overlap needs lambda > 0");
    let n = 400;
    let mut dot = 0.0;
    let mut norm_f = 0.0;
    let mut norm_g = 0.0;
    let mut accumulate = |x0: f64, x1: f64, side: Side| {
        let h = (x1 - x0) / n as f64;
        for i in 0..=n {
            let x = x0 + i as f64 * h;
            // trapezoid weights; clamp the sample just inside the open end
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let xq = x.clamp(x0 + 1e-12, x1 - 1e-12);
            let f = pair.eigenfunction.state_at(xq, side).y;
            let g = phi_leading(spec, pair.lambda, xq, 0);
            dot += w * f * g * h;
            norm_f += w * f * f * h;
            norm_g += w * g * g * h;
        }
    };
    accumulate(spec.a, spec.c, Side::Left);
    accumulate(spec.c, spec.b, Side::Right);
    dot.abs() / (norm_f * norm_g).sqrt().max(f64::MIN_POSITIVE)
}

/// Locates the eigenvalues nearest the seeds with index n_min..=n_max on
/// both branches, labels them greedily, and tabulates n |s_n - s_pred|.
pub fn decay_report(
    spec: &ProblemSpec,
    n_min: i64,
    n_max: i64,
    opts: &SolveOptions,
) -> Result<Vec<DecayRow>, AsymptoticsError> {
    assert!(n_min >= 1 && n_max >= n_min);
    // one index of margin on each side keeps edge roots from stealing the
    // labels of in-range seeds
    let seeds = asymptotic_seeds(spec, (n_min - 1).max(1), n_max + 1)?;
    let brackets = seed_window_brackets(spec, &seeds, 8, &opts.integrator)?;
    let mut pairs: Vec<Eigenpair> = Vec::new();
    for bracket in brackets {
        let pair = refine(spec, bracket, opts.refine_tol, &opts.integrator)?;
        if pairs
            .iter()
            .all(|p| (p.lambda - pair.lambda).abs() > 8.0 * opts.refine_tol * pair.lambda.abs().max(1.0))
        {
            pairs.push(pair);
        }
    }
    pairs.sort_by(|p, q| p.lambda.partial_cmp(&q.lambda).unwrap());

    let min_gap = seeds
        .windows(2)
        .map(|w| w[1].s_pred - w[0].s_pred)
        .fold(f64::INFINITY, f64::min)
        .max(1e-6);
    label_branches(&mut pairs, &seeds, 0.5 * min_gap.max(0.5));

    let mut rows: Vec<DecayRow> = pairs
        .iter()
        .filter_map(|p| {
            let (n, branch) = (p.n_index?, p.branch?);
            if n < n_min || n > n_max {
                return None;
            }
            let seed = seeds
                .iter()
                .find(|s| s.n == n && s.branch == branch)
                .expect("label refers to an existing seed");
            Some(DecayRow::new(n, branch, p.s, seed.s_pred))
        })
        .collect();
    rows.sort_by(|a, b| (a.branch, a.n).cmp(&(b.branch, b.n)));
    Ok(rows)
}

/// Boundedness test for the decay products, applied per branch (the two
/// eigenvalue sequences have independent constants): over rows with
/// n >= n_lo on each branch, the max of n |s_n - s_pred| must not exceed
/// twice their median, with an absolute floor guarding the all-but-exact
/// case.
pub fn decay_products_bounded(rows: &[DecayRow], n_lo: i64, floor: f64) -> bool {
    for branch in [Branch::One, Branch::Two] {
        let mut products: Vec<f64> = rows
            .iter()
            .filter(|r| r.branch == branch && r.n >= n_lo)
            .map(|r| r.n_times_err)
            .collect();
        if products.is_empty() {
            return false;
        }
        products.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = products[products.len() / 2];
        let max = *products.last().unwrap();
        if max > (2.0 * median).max(floor) {
            return false;
        }
    }
    true
}
