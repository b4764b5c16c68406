//! The characteristic function omega(lambda), Wronskian utilities,
//! cross-consistent evaluation paths, and an argument-principle zero counter.
//!
//! With the stored determinant convention (see `model`) the two piecewise
//! Wronskians w1 = W[phi1, psi1] and w2 = W[phi2, psi2] satisfy
//! d12 w1 = d34 w2, and the canonical characteristic function is
//!
//!   omega(lambda) := d12 w1(lambda) = d34 w2(lambda),
//!
//! an entire function of lambda whose zeros are exactly the eigenvalues.
//! The production evaluation uses w1 at x = a, where phi's state is the
//! exact initial data, so only psi has to be propagated:
//! omega = d12 (alpha11 psi1'(a) + alpha10 psi1(a)).

use num_complex::Complex64;
use thiserror::Error;

use crate::integrate::{propagate, IntegratorOptions, State};
use crate::model::{ProblemSpec, Side};
use crate::scalar::Scalar;
use crate::solutions::{
    transmission_backward, transmission_forward, PiecewiseSolution, SolutionError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharPath {
    /// d34 [ phi2(b) (alpha20 + lambda alpha20') - phi2'(b) (alpha21 + lambda alpha21') ]
    ViaPhiAtB,
    /// d12 [ alpha11 psi1'(a) + alpha10 psi1(a) ]
    ViaPsiAtA,
    /// d12 W[phi1, psi1] interpolated at an interior point
    ViaWronskianMidpoint,
}

/// One cached evaluation of the characteristic function.
#[derive(Debug, Clone, Copy)]
pub struct CharSample<S: Scalar> {
    pub lambda: S,
    pub w: S,
    pub path: CharPath,
}

#[derive(Debug, Error)]
pub enum CharfunError {
    #[error("x = {x} does not lie in the requested piece")]
    PieceMismatch { x: f64 },
    #[error("characteristic function vanishes on the contour (min |omega| = {min_abs:.3e})")]
    ZeroOnContour { min_abs: f64 },
    #[error("winding-number quadrature inconclusive: estimate error {estimate:.3} >= 0.25")]
    QuadratureInconclusive { estimate: f64 },
    #[error(transparent)]
    Solution(#[from] SolutionError),
}

/// W[f, g](x) = f(x) g'(x) - f'(x) g(x) on the requested piece, via dense
/// output interpolation.
pub fn wronskian<S: Scalar>(
    sol_a: &PiecewiseSolution<S>,
    sol_b: &PiecewiseSolution<S>,
    x: f64,
    side: Side,
) -> Result<S, CharfunError> {
    debug_assert!(sol_a.lambda == sol_b.lambda, "solutions must share lambda");
    let range = match side {
        Side::Left => (sol_a.left.first_x(), sol_a.left.last_x()),
        Side::Right => (sol_a.right.first_x(), sol_a.right.last_x()),
    };
    let tol = 1e-12 * (1.0 + range.0.abs().max(range.1.abs()));
    if x < range.0.min(range.1) - tol || x > range.0.max(range.1) + tol {
        return Err(CharfunError::PieceMismatch { x });
    }
    let u = sol_a.state_at(x, side);
    let v = sol_b.state_at(x, side);
    Ok(u.y * v.yp - u.yp * v.y)
}

/// omega(lambda) = d12 (alpha11 psi1'(a) + alpha10 psi1(a)). Only psi is
/// propagated. In debug builds the d34 W[phi2, psi2] route is evaluated too
/// and relative agreement is asserted.
pub fn charfun<S: Scalar>(
    spec: &ProblemSpec,
    lambda: S,
    opts: &IntegratorOptions,
) -> Result<S, CharfunError> {
    let w = charfun_inner(spec, lambda, opts)?;
    #[cfg(debug_assertions)]
    {
        let (path_a, _) = charfun_paths(spec, lambda, opts)?;
        let scale = w.abs().max(path_a.abs());
        // absolute floor: near a root both paths pass through zero and only
        // integration noise remains
        let tol = 1e-6 * scale + 1e-9 * (1.0 + lambda.abs());
        debug_assert!(
            (w - path_a).abs() <= tol,
            "characteristic-function paths disagree: {w:?} vs {path_a:?}"
        );
    }
    Ok(w)
}

/// Production path without the debug cross-check; used inside scan loops
/// where the identity is already covered by the verification suite.
pub(crate) fn charfun_inner<S: Scalar>(
    spec: &ProblemSpec,
    lambda: S,
    opts: &IntegratorOptions,
) -> Result<S, CharfunError> {
    let dets = spec.determinants();
    let (y_b, yp_b) = spec.psi_terminal(lambda);
    let at_c = propagate(&spec.q, lambda, spec.b, spec.c, State::new(y_b, yp_b), opts)
        .map_err(SolutionError::from)?;
    let minus = transmission_backward(&dets, &spec.beta, at_c)?;
    let at_a = propagate(&spec.q, lambda, spec.c, spec.a, minus, opts)
        .map_err(SolutionError::from)?;
    Ok((at_a.yp.scale(spec.alpha11) + at_a.y.scale(spec.alpha10)).scale(dets.d12))
}

/// The two single-shot boundary evaluations:
/// path A needs only phi, path B needs only psi. Returns (A, B); both equal
/// omega up to integration error.
pub fn charfun_paths<S: Scalar>(
    spec: &ProblemSpec,
    lambda: S,
    opts: &IntegratorOptions,
) -> Result<(S, S), CharfunError> {
    let dets = spec.determinants();
    // path A: w2 evaluated at b against the terminal data of psi
    let (y_a0, yp_a0) = spec.phi_initial::<S>();
    let at_c = propagate(&spec.q, lambda, spec.a, spec.c, State::new(y_a0, yp_a0), opts)
        .map_err(SolutionError::from)?;
    let plus = transmission_forward(&dets, &spec.beta, at_c)?;
    let at_b = propagate(&spec.q, lambda, spec.c, spec.b, plus, opts)
        .map_err(SolutionError::from)?;
    let (psi_b, psip_b) = spec.psi_terminal(lambda);
    let path_a = (at_b.y * psip_b - at_b.yp * psi_b).scale(dets.d34);
    let path_b = charfun_inner(spec, lambda, opts)?;
    Ok((path_a, path_b))
}

/// Path A of `charfun_paths` (phi-only evaluation).
pub fn charfun_via_boundary<S: Scalar>(
    spec: &ProblemSpec,
    lambda: S,
    opts: &IntegratorOptions,
) -> Result<S, CharfunError> {
    Ok(charfun_paths(spec, lambda, opts)?.0)
}

/// Outcome of the argument-principle count over a rectangle.
#[derive(Debug, Clone, Copy)]
pub struct ZeroCount {
    pub count: usize,
    /// |integral/(2 pi i) - count|; must be < 0.25 for a conclusive answer.
    pub estimate_error: f64,
    pub min_abs_on_contour: f64,
}

/// Number of zeros of omega inside the rectangle
/// re_range x [-im_half_width, +im_half_width], computed as the winding
/// number (1/2 pi i) closed-integral omega'/omega d lambda by trapezoid
/// quadrature, with omega' from central differences. The rectangle edges are
/// nudged outward (a few parts in 1e6 of the width) if omega nearly vanishes
/// on the contour.
pub fn count_zeros(
    spec: &ProblemSpec,
    re_range: (f64, f64),
    im_half_width: f64,
    n_contour_points: usize,
    opts: &IntegratorOptions,
) -> Result<ZeroCount, CharfunError> {
    assert!(re_range.1 > re_range.0 && im_half_width > 0.0 && n_contour_points >= 8);
    let mut lo = re_range.0;
    let mut hi = re_range.1;
    let mut h_im = im_half_width;
    let nudge = 1e-6 * (re_range.1 - re_range.0).max(1.0);

    for attempt in 0..3 {
        match winding(spec, (lo, hi), h_im, n_contour_points, opts)? {
            WindingOutcome::Conclusive(z) => return Ok(z),
            WindingOutcome::NearZeroOnContour { min_abs } => {
                if attempt == 2 {
                    return Err(CharfunError::ZeroOnContour { min_abs });
                }
                lo -= nudge;
                hi += nudge;
                h_im *= 1.07;
            }
            WindingOutcome::Inconclusive { estimate } => {
                // one refinement with doubled resolution
                return match winding(spec, (lo, hi), h_im, n_contour_points * 2, opts)? {
                    WindingOutcome::Conclusive(z) => Ok(z),
                    WindingOutcome::NearZeroOnContour { min_abs } => {
                        Err(CharfunError::ZeroOnContour { min_abs })
                    }
                    WindingOutcome::Inconclusive { .. } => {
                        Err(CharfunError::QuadratureInconclusive { estimate })
                    }
                };
            }
        }
    }
    unreachable!()
}

enum WindingOutcome {
    Conclusive(ZeroCount),
    NearZeroOnContour { min_abs: f64 },
    Inconclusive { estimate: f64 },
}

fn winding(
    spec: &ProblemSpec,
    re_range: (f64, f64),
    im_half_width: f64,
    n_points: usize,
    opts: &IntegratorOptions,
) -> Result<WindingOutcome, CharfunError> {
    let (lo, hi) = re_range;
    let corners = [
        Complex64::new(lo, -im_half_width),
        Complex64::new(hi, -im_half_width),
        Complex64::new(hi, im_half_width),
        Complex64::new(lo, im_half_width),
    ];
    let perimeter = 2.0 * (hi - lo) + 4.0 * im_half_width;

    // nodes distributed over the four sides proportionally to length
    let mut nodes: Vec<Complex64> = Vec::new();
    for side in 0..4 {
        let from = corners[side];
        let to = corners[(side + 1) % 4];
        let len = (to - from).norm();
        let n_side = ((n_points as f64 * len / perimeter).ceil() as usize).max(2);
        for i in 0..n_side {
            nodes.push(from + (to - from).scale(i as f64 / n_side as f64));
        }
    }
    let n = nodes.len();

    let eval = |lambda: Complex64| -> Result<(Complex64, Complex64), CharfunError> {
        let h = 1e-6f64.max(1e-8 * lambda.norm());
        let w = charfun_inner(spec, lambda, opts)?;
        let wp = charfun_inner(spec, lambda + Complex64::new(h, 0.0), opts)?;
        let wm = charfun_inner(spec, lambda - Complex64::new(h, 0.0), opts)?;
        Ok((w, (wp - wm).scale(0.5 / h)))
    };

    let results = par_try_map(&nodes, |&lambda| eval(lambda))?;

    let min_abs = results.iter().map(|(w, _)| w.norm()).fold(f64::INFINITY, f64::min);
    let scale = results.iter().map(|(w, _)| w.norm()).fold(0.0, f64::max);
    if min_abs <= 1e-9 * scale {
        return Ok(WindingOutcome::NearZeroOnContour { min_abs });
    }

    let mut integral = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let j = (i + 1) % n;
        let fi = results[i].1 / results[i].0;
        let fj = results[j].1 / results[j].0;
        integral += (fi + fj).scale(0.5) * (nodes[j] - nodes[i]);
    }
    let winding = integral / Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    let count = winding.re.round();
    let estimate_error = (winding - Complex64::new(count, 0.0)).norm();
    if estimate_error >= 0.25 || count < -0.5 {
        return Ok(WindingOutcome::Inconclusive {
            estimate: estimate_error,
        });
    }
    Ok(WindingOutcome::Conclusive(ZeroCount {
        count: count as usize,
        estimate_error,
        min_abs_on_contour: min_abs,
    }))
}

#[cfg(feature = "parallel")]
fn par_try_map<T: Sync, U: Send, E: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<U, E> + Sync + Send,
) -> Result<Vec<U>, E> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_try_map<T, U, E>(items: &[T], f: impl Fn(&T) -> Result<U, E>) -> Result<Vec<U>, E> {
    items.iter().map(f).collect()
}
