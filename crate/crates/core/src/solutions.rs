//! Fundamental solutions phi and psi, the transmission jump maps, a
//! Picard-series constructor for the right piece of phi, and residual
//! evaluators for the Volterra integral identities the solutions satisfy.
//!
//! Transmission maps are defined by directly solving the 2x2 linear system
//! tau3 = tau4 = 0; that is unambiguous ground truth. Determinant shortcut
//! formulas exist too, but their index pattern depends on which block of the
//! coefficient matrix comes first. With the stored column order
//! (minus block first, see `model`) the resolved forms are
//!
//!   forward  (c- to c+):  y+  = -(d14 y- + d24 y'-) / d34,
//!                         y'+ =  (d13 y- + d23 y'-) / d34,
//!   backward (c+ to c-):  y-  =  (d23 y+ + d24 y'+) / d12,
//!                         y'- = -(d13 y+ + d14 y'+) / d12,
//!
//! i.e. the familiar formulas with the two column blocks swapped; the swap
//! also exchanges the roles of d12 and d34. Debug builds assert the shortcut
//! against the direct solve on every call.

use thiserror::Error;

use num_complex::Complex64;

use crate::integrate::{integrate_ivp, IntegrateError, IntegratorOptions, State, Trace};
use crate::model::{DeterminantSet, ProblemSpec, Side};
use crate::quad;
use crate::scalar::{principal_sqrt, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    Phi,
    Psi,
}

/// A solution of the differential equation on both pieces. Traces are stored
/// with increasing abscissae regardless of integration direction; the last
/// left node and the first right node both sit at `c` and hold the one-sided
/// limit states.
#[derive(Debug, Clone)]
pub struct PiecewiseSolution<S: Scalar> {
    pub left: Trace<S>,
    pub right: Trace<S>,
    pub lambda: S,
    pub kind: SolutionKind,
}

impl<S: Scalar> PiecewiseSolution<S> {
    pub fn state_at(&self, x: f64, side: Side) -> State<S> {
        match side {
            Side::Left => self.left.sample(x),
            Side::Right => self.right.sample(x),
        }
    }

    /// One-sided limit states at the transmission point.
    pub fn at_c(&self) -> (State<S>, State<S>) {
        (self.left.last_state(), self.right.first_state())
    }

    pub fn at_a(&self) -> State<S> {
        self.left.first_state()
    }

    pub fn at_b(&self) -> State<S> {
        self.right.last_state()
    }

    /// Max |y| over the recorded nodes of both pieces.
    pub fn max_abs_y(&self) -> f64 {
        self.left.max_abs_y().max(self.right.max_abs_y())
    }

    /// Sup-style norm max(|y|, |y'|) over both pieces, used to scale
    /// residual tolerances.
    pub fn state_norm(&self) -> f64 {
        let piece = |t: &Trace<S>| {
            t.states()
                .iter()
                .map(|s| s.y.abs().max(s.yp.abs()))
                .fold(0.0, f64::max)
        };
        piece(&self.left).max(piece(&self.right))
    }

    pub fn scale(&mut self, k: f64) {
        self.left.scale(k);
        self.right.scale(k);
    }
}

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("plus block of the transmission matrix is singular (|d34| = {det_abs:.3e})")]
    SingularPlusBlock { det_abs: f64 },
    #[error("minus block of the transmission matrix is singular (|d12| = {det_abs:.3e})")]
    SingularMinusBlock { det_abs: f64 },
    #[error("Picard quadrature under-resolved: doubling the grid moved phi2(b) by {change:.3e}")]
    QuadratureUnderResolved { change: f64 },
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

fn singular_tol(block: [[f64; 2]; 2]) -> f64 {
    let m = block
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    64.0 * f64::EPSILON * m * m
}

/// Maps the one-sided limit state at c- to the state at c+ by solving
/// tau3 = tau4 = 0 for (y(c+), y'(c+)).
pub fn transmission_forward<S: Scalar>(
    dets: &DeterminantSet,
    beta: &[[f64; 4]; 2],
    minus: State<S>,
) -> Result<State<S>, SolutionError> {
    let plus_block = [[beta[0][2], beta[0][3]], [beta[1][2], beta[1][3]]];
    if dets.d34.abs() <= singular_tol(plus_block) {
        return Err(SolutionError::SingularPlusBlock {
            det_abs: dets.d34.abs(),
        });
    }
    // r = -(minus block) * u, then Cramer on the plus block
    let r0 = -(minus.y.scale(beta[0][0]) + minus.yp.scale(beta[0][1]));
    let r1 = -(minus.y.scale(beta[1][0]) + minus.yp.scale(beta[1][1]));
    let inv = 1.0 / dets.d34;
    let out = State::new(
        (r0.scale(plus_block[1][1]) - r1.scale(plus_block[0][1])).scale(inv),
        (r1.scale(plus_block[0][0]) - r0.scale(plus_block[1][0])).scale(inv),
    );
    debug_assert!(
        {
            let y = (minus.y.scale(dets.d14) + minus.yp.scale(dets.d24)).scale(-inv);
            let yp = (minus.y.scale(dets.d13) + minus.yp.scale(dets.d23)).scale(inv);
            let scale = out.y.abs().max(out.yp.abs()).max(1.0);
            (y - out.y).abs() <= 1e-9 * scale && (yp - out.yp).abs() <= 1e-9 * scale
        },
        "determinant shortcut deviates from the direct solve"
    );
    Ok(out)
}

/// Inverse of `transmission_forward`: maps the state at c+ back to c-.
pub fn transmission_backward<S: Scalar>(
    dets: &DeterminantSet,
    beta: &[[f64; 4]; 2],
    plus: State<S>,
) -> Result<State<S>, SolutionError> {
    let minus_block = [[beta[0][0], beta[0][1]], [beta[1][0], beta[1][1]]];
    if dets.d12.abs() <= singular_tol(minus_block) {
        return Err(SolutionError::SingularMinusBlock {
            det_abs: dets.d12.abs(),
        });
    }
    let r0 = -(plus.y.scale(beta[0][2]) + plus.yp.scale(beta[0][3]));
    let r1 = -(plus.y.scale(beta[1][2]) + plus.yp.scale(beta[1][3]));
    let inv = 1.0 / dets.d12;
    let out = State::new(
        (r0.scale(minus_block[1][1]) - r1.scale(minus_block[0][1])).scale(inv),
        (r1.scale(minus_block[0][0]) - r0.scale(minus_block[1][0])).scale(inv),
    );
    debug_assert!(
        {
            let y = (plus.y.scale(dets.d23) + plus.yp.scale(dets.d24)).scale(inv);
            let yp = (plus.y.scale(dets.d13) + plus.yp.scale(dets.d14)).scale(-inv);
            let scale = out.y.abs().max(out.yp.abs()).max(1.0);
            (y - out.y).abs() <= 1e-9 * scale && (yp - out.yp).abs() <= 1e-9 * scale
        },
        "determinant shortcut deviates from the direct solve"
    );
    Ok(out)
}

/// Constructs phi: left piece solves the IVP y(a) = alpha11, y'(a) = -alpha10
/// (so tau1(phi) = 0 exactly), the right piece continues from the
/// transmitted state at c.
pub fn phi<S: Scalar>(
    spec: &ProblemSpec,
    lambda: S,
    opts: &IntegratorOptions,
) -> Result<PiecewiseSolution<S>, SolutionError> {
    let dets = spec.determinants();
    let (y_a, yp_a) = spec.phi_initial::<S>();
    let left = integrate_ivp(&spec.q, lambda, spec.a, spec.c, State::new(y_a, yp_a), opts)?;
    let plus = transmission_forward(&dets, &spec.beta, left.last_state())?;
    let right = integrate_ivp(&spec.q, lambda, spec.c, spec.b, plus, opts)?;
    Ok(PiecewiseSolution {
        left,
        right,
        lambda,
        kind: SolutionKind::Phi,
    })
}

/// Constructs psi: right piece integrates backward from b with terminal state
/// (alpha21 + lambda alpha21', alpha20 + lambda alpha20'), which makes
/// tau2(psi) = 0 an identity in lambda; the left piece continues backward
/// from the inverse-transmitted state at c.
pub fn psi<S: Scalar>(
    spec: &ProblemSpec,
    lambda: S,
    opts: &IntegratorOptions,
) -> Result<PiecewiseSolution<S>, SolutionError> {
    let dets = spec.determinants();
    let (y_b, yp_b) = spec.psi_terminal(lambda);
    let mut right = integrate_ivp(&spec.q, lambda, spec.b, spec.c, State::new(y_b, yp_b), opts)?;
    let minus = transmission_backward(&dets, &spec.beta, right.last_state())?;
    let mut left = integrate_ivp(&spec.q, lambda, spec.c, spec.a, minus, opts)?;
    left.reverse();
    right.reverse();
    Ok(PiecewiseSolution {
        left,
        right,
        lambda,
        kind: SolutionKind::Psi,
    })
}

/// Result of the Picard construction of phi2 on (c, b].
#[derive(Debug, Clone)]
pub struct PicardSolution {
    /// Final iterate (value, derivative) at the panel boundary nodes.
    pub trace: Trace<f64>,
    /// max_x |y_n(x) - y_{n-1}(x)| over the quadrature nodes, for n = 1..
    pub increments: Vec<f64>,
    /// max_x |y_0(x)| over (c, b], the Y(lambda) of the truncation bound.
    pub y0_max: f64,
}

/// Picard / successive-approximation construction of the right piece of phi:
/// y_0 is the tangent line through the transmitted state at c and
/// y_n(x) = y_0(x) + int_c^x (x - z)(q(z) - lambda) y_{n-1}(z) dz.
///
/// The iteration lives on a fixed composite Gauss-Legendre grid
/// (`panels` panels of `nodes_per_panel` nodes on (c, b]); partial-panel
/// integrals use the panel's own nodal polynomial interpolant. A single
/// refinement doubling guards against under-resolution.
pub fn picard_phi2(
    spec: &ProblemSpec,
    lambda: f64,
    n_terms: usize,
    panels: usize,
    nodes_per_panel: usize,
) -> Result<PicardSolution, SolutionError> {
    assert!(n_terms >= 1 && panels >= 1 && nodes_per_panel >= 2);
    let dets = spec.determinants();
    let left = integrate_ivp(
        &spec.q,
        lambda,
        spec.a,
        spec.c,
        State::new(spec.alpha11, -spec.alpha10),
        &IntegratorOptions::default(),
    )?;
    let plus = transmission_forward(&dets, &spec.beta, left.last_state())?;

    let coarse = picard_iterate(spec, lambda, plus, n_terms, panels, nodes_per_panel);
    let fine = picard_iterate(spec, lambda, plus, n_terms, panels * 2, nodes_per_panel);
    let yb_coarse = coarse.trace.last_state().y;
    let yb_fine = fine.trace.last_state().y;
    let change = (yb_coarse - yb_fine).abs();
    if change > 1e-8 * yb_fine.abs().max(1.0) {
        return Err(SolutionError::QuadratureUnderResolved { change });
    }
    Ok(coarse)
}

fn picard_iterate(
    spec: &ProblemSpec,
    lambda: f64,
    plus: State<f64>,
    n_terms: usize,
    panels: usize,
    m: usize,
) -> PicardSolution {
    let (c, b) = (spec.c, spec.b);
    let h = (b - c) / panels as f64;
    let (gl_nodes, gl_weights) = quad::gauss_legendre(m);

    // global node list: panel boundaries and interior Gauss nodes
    let mut xs = Vec::with_capacity(panels * (m + 1) + 1);
    let mut node_kind = Vec::new(); // panel index for Gauss nodes, usize::MAX for boundaries
    xs.push(c);
    node_kind.push(usize::MAX);
    for p in 0..panels {
        let lo = c + p as f64 * h;
        for t in &gl_nodes {
            xs.push(lo + 0.5 * h * (1.0 + t));
            node_kind.push(p);
        }
        xs.push(lo + h);
        node_kind.push(usize::MAX);
    }
    let qv: Vec<f64> = xs.iter().map(|&x| spec.q.eval_on(x, Side::Right)).collect();

    let y0: Vec<f64> = xs.iter().map(|&x| plus.y + plus.yp * (x - c)).collect();
    let y0_max = y0.iter().fold(0.0f64, |a, &v| a.max(v.abs()));

    // barycentric weights for the Gauss nodes of a reference panel
    let bary = barycentric_weights(&gl_nodes);

    let mut y = y0.clone();
    let mut increments = Vec::with_capacity(n_terms);
    for _ in 1..=n_terms {
        // f = (q - lambda) y at all nodes
        let f: Vec<f64> = y.iter().zip(&qv).map(|(yv, q)| (q - lambda) * yv).collect();

        // prefix moments over full panels: int f dz and int z f dz
        let mut pref0 = vec![0.0; panels + 1];
        let mut pref1 = vec![0.0; panels + 1];
        for p in 0..panels {
            let lo = c + p as f64 * h;
            let base = 1 + p * (m + 1);
            let mut m0 = 0.0;
            let mut m1 = 0.0;
            for j in 0..m {
                let z = lo + 0.5 * h * (1.0 + gl_nodes[j]);
                let w = gl_weights[j] * 0.5 * h;
                m0 += w * f[base + j];
                m1 += w * z * f[base + j];
            }
            pref0[p + 1] = pref0[p] + m0;
            pref1[p + 1] = pref1[p] + m1;
        }

        let mut y_next = vec![0.0; xs.len()];
        let mut max_diff = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            // int_c^x (x - z) f(z) dz = x * int f - int z f
            let (full, rest) = match node_kind[i] {
                usize::MAX => {
                    let p = ((x - c) / h).round() as usize;
                    (p, 0.0)
                }
                p => {
                    // partial panel [lo_p, x]: integrate the degree-(m-1)
                    // interpolant of f on this panel's Gauss nodes
                    let lo = c + p as f64 * h;
                    let base = 1 + p * (m + 1);
                    let fvals = &f[base..base + m];
                    let mut part0 = 0.0;
                    let mut part1 = 0.0;
                    let half = 0.5 * (x - lo);
                    let mid = lo + half;
                    for j in 0..m {
                        let z = mid + half * gl_nodes[j];
                        let t = 2.0 * (z - lo) / h - 1.0; // panel reference coordinate
                        let fv = barycentric_eval(&gl_nodes, &bary, fvals, t);
                        let w = gl_weights[j] * half;
                        part0 += w * fv;
                        part1 += w * z * fv;
                    }
                    y_next[i] = y0[i] + x * (pref0[p] + part0) - (pref1[p] + part1);
                    let d = (y_next[i] - y[i]).abs();
                    if d > max_diff {
                        max_diff = d;
                    }
                    continue;
                }
            };
            y_next[i] = y0[i] + x * pref0[full] - pref1[full] + rest;
            let d = (y_next[i] - y[i]).abs();
            if d > max_diff {
                max_diff = d;
            }
        }
        increments.push(max_diff);
        y = y_next;
    }

    // derivative at panel boundaries: y'(x) = y0' + int_c^x (q - lambda) y dz
    let f: Vec<f64> = y.iter().zip(&qv).map(|(yv, q)| (q - lambda) * yv).collect();
    let mut xs_out = Vec::with_capacity(panels + 1);
    let mut states = Vec::with_capacity(panels + 1);
    let mut curvs = Vec::with_capacity(panels + 1);
    let mut acc = 0.0;
    let mut push = |x: f64, yv: f64, ypv: f64| {
        states.push(State::new(yv, ypv));
        let qv = spec.q.eval_on(x, Side::Right);
        let qd = spec.q.eval_deriv_on(x, Side::Right);
        curvs.push(State::new((qv - lambda) * yv, (qv - lambda) * ypv + qd * yv));
        xs_out.push(x);
    };
    push(c, y[0], plus.yp);
    for p in 0..panels {
        let base = 1 + p * (m + 1);
        for j in 0..m {
            acc += gl_weights[j] * 0.5 * h * f[base + j];
        }
        push(c + (p as f64 + 1.0) * h, y[base + m], plus.yp + acc);
    }

    PicardSolution {
        trace: Trace::from_nodes(xs_out, states, curvs),
        increments,
        y0_max,
    }
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w[i] /= nodes[i] - nodes[j];
            }
        }
    }
    w
}

fn barycentric_eval(nodes: &[f64], weights: &[f64], values: &[f64], t: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..nodes.len() {
        let d = t - nodes[i];
        if d.abs() < 1e-14 {
            return values[i];
        }
        let w = weights[i] / d;
        num += w * values[i];
        den += w;
    }
    num / den
}

/// The truncation bound Y (q1 + |lambda|^n) (x - c)^(2n) / (2n)! for the
/// Picard increments, evaluated in log space so large n or |lambda| cannot
/// overflow intermediate terms.
pub fn picard_truncation_bound(y_max: f64, q1: f64, lambda_abs: f64, x: f64, c: f64, n: u32) -> f64 {
    assert!(n >= 1);
    let t = (x - c).abs();
    if t == 0.0 || y_max == 0.0 {
        return 0.0;
    }
    // log(q1 + |lambda|^n) via log-sum-exp
    let log_pow = if lambda_abs > 0.0 {
        n as f64 * lambda_abs.ln()
    } else {
        f64::NEG_INFINITY
    };
    let log_q1 = if q1 > 0.0 { q1.ln() } else { f64::NEG_INFINITY };
    let log_sum = if log_pow == f64::NEG_INFINITY && log_q1 == f64::NEG_INFINITY {
        return 0.0;
    } else {
        let hi = log_pow.max(log_q1);
        hi + ((log_pow - hi).exp() + (log_q1 - hi).exp()).ln()
    };
    let log_fact: f64 = (1..=2 * n).map(|k| (k as f64).ln()).sum();
    (y_max.ln() + log_sum + 2.0 * n as f64 * t.ln() - log_fact).exp()
}

/// Which piecewise component an integral identity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WhichIdentity {
    Phi1,
    Phi2,
    Psi1,
    Psi2,
}

/// Max over `sample_xs` of |LHS - RHS| for the Volterra integral identity of
/// the selected solution component; `k = 0` checks the value identity,
/// `k = 1` the differentiated one. Each identity expands the component from
/// its anchor point (a for phi1, c+ for phi2, b for psi2, c- for psi1)
/// against the sin/cos kernel plus the Volterra term, with the integral
/// taken *from the anchor* (signed, so the psi-side identities carry the
/// opposite sign to a naive reading of the range).
pub fn integral_residual<S: Scalar>(
    spec: &ProblemSpec,
    sol: &PiecewiseSolution<S>,
    which: WhichIdentity,
    k: u8,
    sample_xs: &[f64],
) -> f64 {
    assert!(k <= 1);
    let lambda = sol.lambda.to_complex();
    let s = principal_sqrt(lambda);

    let (side, anchor, anchor_state): (Side, f64, State<Complex64>) = match which {
        WhichIdentity::Phi1 => (
            Side::Left,
            spec.a,
            State::new(
                Complex64::new(spec.alpha11, 0.0),
                Complex64::new(-spec.alpha10, 0.0),
            ),
        ),
        WhichIdentity::Phi2 => {
            let st = sol.right.first_state();
            (
                Side::Right,
                spec.c,
                State::new(st.y.to_complex(), st.yp.to_complex()),
            )
        }
        WhichIdentity::Psi2 => {
            let (y_b, yp_b) = spec.psi_terminal(lambda);
            (Side::Right, spec.b, State::new(y_b, yp_b))
        }
        WhichIdentity::Psi1 => {
            let st = sol.left.last_state();
            (
                Side::Left,
                spec.c,
                State::new(st.y.to_complex(), st.yp.to_complex()),
            )
        }
    };

    // cos(s t) and sin(s t)/s, with the s -> 0 limit handled
    let tiny_s = s.norm() < 1e-12;
    let cos_s = |t: f64| -> Complex64 {
        if tiny_s {
            Complex64::new(1.0, 0.0)
        } else {
            (s * t).cos()
        }
    };
    let sinc_s = |t: f64| -> Complex64 {
        if tiny_s {
            Complex64::new(t, 0.0)
        } else {
            (s * t).sin() / s
        }
    };

    let mut worst = 0.0f64;
    for &x in sample_xs {
        let t = x - anchor;
        // homogeneous part from the anchor state
        let hom = match k {
            0 => anchor_state.y * cos_s(t) + anchor_state.yp * sinc_s(t),
            _ => -anchor_state.y * lambda * sinc_s(t) + anchor_state.yp * cos_s(t),
        };
        // Volterra term, oriented from the anchor to x
        let oscillation = s.norm() * t.abs();
        let panels = (oscillation / 2.0).ceil() as usize + 4;
        let integrand_re = |z: f64, re: bool| -> f64 {
            let st = sol.state_at(z, side);
            let qv = spec.q.eval_on(z, side);
            let kernel = match k {
                0 => sinc_s(x - z),
                _ => cos_s(x - z),
            };
            let v = kernel * st.y.to_complex() * qv;
            if re {
                v.re
            } else {
                v.im
            }
        };
        let int_re = quad::integrate(|z| integrand_re(z, true), anchor, x, panels, 12);
        let int_im = quad::integrate(|z| integrand_re(z, false), anchor, x, panels, 12);
        let rhs = hom + Complex64::new(int_re, int_im);
        let lhs_state = sol.state_at(x, side);
        let lhs = match k {
            0 => lhs_state.y.to_complex(),
            _ => lhs_state.yp.to_complex(),
        };
        worst = worst.max((lhs - rhs).norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Potential;
    use crate::presets;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::FRAC_PI_6;

    fn opts() -> IntegratorOptions {
        IntegratorOptions::default()
    }

    #[test]
    fn forward_identity_transmission_is_continuity() {
        let spec = presets::classical_dirichlet();
        let d = spec.determinants();
        let out = transmission_forward(&d, &spec.beta, State::new(0.3, -1.2)).unwrap();
        assert!((out.y - 0.3).abs() < 1e-15 && (out.yp + 1.2).abs() < 1e-15);
    }

    #[test]
    fn forward_diagonal_jump() {
        // y doubles, y' halves
        let beta = [[2.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -2.0]];
        let mut spec = presets::classical_dirichlet();
        spec.beta = beta;
        let d = spec.determinants();
        let out = transmission_forward(&d, &spec.beta, State::new(1.0, 1.0)).unwrap();
        assert!((out.y - 2.0).abs() < 1e-15 && (out.yp - 0.5).abs() < 1e-15);
        let back = transmission_backward(&d, &spec.beta, out).unwrap();
        assert!((back.y - 1.0).abs() < 1e-15 && (back.yp - 1.0).abs() < 1e-15);
    }

    #[test]
    fn forward_output_satisfies_tau34_and_round_trips() {
        let mut rng = StdRng::seed_from_u64(2024);
        let mut tested = 0;
        while tested < 100 {
            let beta: [[f64; 4]; 2] = [
                std::array::from_fn(|_| rng.random_range(-2.0..2.0)),
                std::array::from_fn(|_| rng.random_range(-2.0..2.0)),
            ];
            let mut spec = presets::classical_dirichlet();
            spec.beta = beta;
            let d = spec.determinants();
            if d.d12.abs() < 0.05 || d.d34.abs() < 0.05 {
                continue;
            }
            tested += 1;
            let u = State::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let v = transmission_forward(&d, &beta, u).unwrap();
            let (t3, t4) = spec.tau34((u.y, u.yp), (v.y, v.yp));
            let scale = u.y.abs().max(u.yp.abs()).max(v.y.abs()).max(v.yp.abs()) * 4.0;
            assert!(t3.abs() < 1e-12 * scale, "tau3 = {t3}");
            assert!(t4.abs() < 1e-12 * scale, "tau4 = {t4}");
            let u2 = transmission_backward(&d, &beta, v).unwrap();
            assert!((u2.y - u.y).abs() < 1e-12 * scale);
            assert!((u2.yp - u.yp).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn singular_plus_block_is_reported() {
        let beta = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
        let mut spec = presets::classical_dirichlet();
        spec.beta = beta;
        let d = spec.determinants();
        assert!(matches!(
            transmission_forward(&d, &beta, State::new(1.0, 0.0)),
            Err(SolutionError::SingularPlusBlock { .. })
        ));
    }

    #[test]
    fn phi_cosine_when_alpha11_one() {
        // q = 0, alpha11 = 1, alpha10 = 0: phi1(x) = cos(s (x - a))
        let mut spec = presets::classical_dirichlet();
        spec.alpha10 = 0.0;
        spec.alpha11 = 1.0;
        let s = 2.7;
        let sol = phi(&spec, s * s, &opts()).unwrap();
        for x in [0.0, 0.31, 0.62, 0.99] {
            let got = sol.state_at(x, Side::Left).y;
            assert!(((s * x).cos() - got).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn phi_sine_when_alpha11_zero() {
        // alpha11 = 0, alpha10 = 1, lambda = 4: phi1(x) = -sin(2x)/2
        let spec = presets::classical_dirichlet();
        let sol = phi(&spec, 4.0, &opts()).unwrap();
        for x in [0.2, 0.5, 0.85] {
            let got = sol.state_at(x, Side::Left).y;
            assert!((got + (2.0 * x).sin() / 2.0).abs() < 1e-11, "x={x}");
        }
    }

    #[test]
    fn phi_right_piece_matches_hand_propagation_p2() {
        // q = 0 closed forms composed with the rotation jump by hand
        let spec = presets::p2();
        let lam = 7.3f64;
        let s = lam.sqrt();
        let sol = phi(&spec, lam, &opts()).unwrap();
        // left: y(0) = 0, y'(0) = -1 -> phi1 = -sin(s x)/s
        let phi1_c = -(s * 1.0).sin() / s;
        let phi1p_c = -(s * 1.0).cos();
        let (ct, st) = (FRAC_PI_6.cos(), FRAC_PI_6.sin());
        let y_plus = ct * phi1_c - st * phi1p_c;
        let yp_plus = st * phi1_c + ct * phi1p_c;
        for x in [1.0, 1.4, 2.0] {
            let exact = y_plus * (s * (x - 1.0)).cos() + yp_plus * (s * (x - 1.0)).sin() / s;
            let got = sol.state_at(x, Side::Right).y;
            assert!((got - exact).abs() < 1e-10, "x={x}: {got} vs {exact}");
        }
    }

    #[test]
    fn psi_cosine_terminal_case() {
        // alpha21 = 1, everything else zero on the right: psi2 = cos(s(x-b))
        let mut spec = presets::classical_dirichlet();
        spec.alpha20 = 0.0;
        spec.alpha21 = 1.0;
        let s = 1.9;
        let sol = psi(&spec, s * s, &opts()).unwrap();
        for x in [1.05, 1.5, 2.0] {
            let got = sol.state_at(x, Side::Right).y;
            assert!((got - (s * (x - 2.0)).cos()).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn psi_satisfies_tau2_by_construction() {
        let spec = presets::p2();
        for lam in [0.7, 13.0, 91.3] {
            let sol = psi(&spec, lam, &opts()).unwrap();
            let at_b = sol.at_b();
            let t2 = spec.tau2(lam, at_b.y, at_b.yp);
            // terminal values are exact data, so only roundoff appears
            assert!(t2.abs() < 1e-9 * sol.state_norm(), "lam={lam}: tau2={t2}");
        }
    }

    #[test]
    fn psi_continuous_for_identity_transmission() {
        let spec = presets::negative_eigenvalue_instance();
        let sol = psi(&spec, 11.0, &opts()).unwrap();
        let (minus, plus) = sol.at_c();
        assert!((minus.y - plus.y).abs() < 1e-10);
        assert!((minus.yp - plus.yp).abs() < 1e-10);
    }

    #[test]
    fn phi_and_psi_transmission_residuals_vanish() {
        let spec = presets::case_instance(crate::model::CaseTag::I);
        for lam in [3.0, 42.0] {
            for sol in [phi(&spec, lam, &opts()).unwrap(), psi(&spec, lam, &opts()).unwrap()] {
                let (minus, plus) = sol.at_c();
                let (t3, t4) = spec.tau34((minus.y, minus.yp), (plus.y, plus.yp));
                let scale = sol.state_norm();
                assert!(t3.abs() < 1e-10 * scale && t4.abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn conjugate_lambda_gives_conjugate_solutions() {
        use num_complex::Complex64;
        let spec = presets::diagonal_jump();
        let lam = Complex64::new(5.0, 3.0);
        let up = phi(&spec, lam, &opts()).unwrap();
        let dn = phi(&spec, lam.conj(), &opts()).unwrap();
        for x in [0.4, 1.6] {
            let side = if x < 1.0 { Side::Left } else { Side::Right };
            let a = up.state_at(x, side);
            let b = dn.state_at(x, side);
            assert!((a.y.conj() - b.y).norm() < 1e-9 * a.y.norm().max(1.0));
        }
    }

    #[test]
    fn picard_matches_closed_form_for_zero_q() {
        let spec = presets::p2();
        let lam = 1.0f64;
        let pic = picard_phi2(&spec, lam, 25, 20, 8).unwrap();
        let sol = phi(&spec, lam, &opts()).unwrap();
        let got = pic.trace.last_state().y;
        let want = sol.at_b().y;
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn picard_y0_satisfies_transmitted_initial_data() {
        let spec = presets::p2();
        let lam = 9.0f64;
        let pic = picard_phi2(&spec, lam, 1, 20, 8).unwrap();
        let sol = phi(&spec, lam, &opts()).unwrap();
        let plus = sol.right.first_state();
        let first = pic.trace.first_state();
        assert!((first.y - plus.y).abs() < 1e-10);
        assert!((first.yp - plus.yp).abs() < 1e-10);
    }

    #[test]
    fn picard_increments_respect_bound() {
        // random q with 0 <= q <= 1 on the right piece, positive lambda
        let mut spec = presets::p2();
        spec.q = Potential::new(1.0, vec![0.0], vec![0.3, 0.1, 0.05]);
        let lam = 20.0f64;
        let q1 = spec.q.sup_abs(spec.a, spec.b);
        let pic = picard_phi2(&spec, lam, 10, 20, 8).unwrap();
        for (i, inc) in pic.increments.iter().enumerate() {
            let n = (i + 1) as u32;
            let bound = picard_truncation_bound(pic.y0_max, q1, lam, spec.b, spec.c, n);
            assert!(
                *inc <= bound * (1.0 + 1e-9) + 1e-300,
                "n={n}: increment {inc} exceeds bound {bound}"
            );
        }
    }

    #[test]
    fn truncation_bound_values() {
        // (x - c) = 0 gives 0
        assert_eq!(picard_truncation_bound(1.0, 0.5, 3.0, 1.0, 1.0, 3), 0.0);
        // Y = 1, q1 = 0, |lambda| = 1, x - c = 1, n = 2:
        // Y (q1 + |lambda|^n) (x-c)^(2n) / (2n)! = 1 / 4! = 1/24
        let b = picard_truncation_bound(1.0, 0.0, 1.0, 2.0, 1.0, 2);
        assert!((b - 1.0 / 24.0).abs() < 1e-15, "{b}");
        // log-space evaluation survives inputs whose naive factors overflow:
        // |lambda|^n = 1e1600 and (x-c)^(2n) = 1e-2000 would give inf * 0
        let big = picard_truncation_bound(1.0, 0.0, 1e8, 1.0 + 1e-5, 1.0, 200);
        assert!(big.is_finite() && !big.is_nan(), "{big}");
    }

    #[test]
    fn integral_residuals_vanish_for_zero_q() {
        let spec = presets::p2();
        let lam = 10.0;
        let sol_phi = phi(&spec, lam, &opts()).unwrap();
        let sol_psi = psi(&spec, lam, &opts()).unwrap();
        let left_xs = [0.1, 0.45, 0.8];
        let right_xs = [1.2, 1.55, 1.9];
        assert!(integral_residual(&spec, &sol_phi, WhichIdentity::Phi1, 0, &left_xs) < 1e-9);
        assert!(integral_residual(&spec, &sol_phi, WhichIdentity::Phi2, 0, &right_xs) < 1e-9);
        assert!(integral_residual(&spec, &sol_psi, WhichIdentity::Psi1, 0, &left_xs) < 1e-9);
        assert!(integral_residual(&spec, &sol_psi, WhichIdentity::Psi2, 0, &right_xs) < 1e-9);
    }

    #[test]
    fn integral_residuals_with_polynomial_q() {
        let spec = presets::case_instance(crate::model::CaseTag::I);
        let lam = 10.0;
        let sol_phi = phi(&spec, lam, &opts()).unwrap();
        let sol_psi = psi(&spec, lam, &opts()).unwrap();
        let left_xs: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64 * 0.95).collect();
        let right_xs: Vec<f64> = (0..10).map(|i| 1.05 + i as f64 * 0.13).collect();
        for k in [0u8, 1] {
            let r1 = integral_residual(&spec, &sol_phi, WhichIdentity::Phi1, k, &left_xs);
            let r2 = integral_residual(&spec, &sol_phi, WhichIdentity::Phi2, k, &right_xs);
            let r3 = integral_residual(&spec, &sol_psi, WhichIdentity::Psi1, k, &left_xs);
            let r4 = integral_residual(&spec, &sol_psi, WhichIdentity::Psi2, k, &right_xs);
            for (name, r) in [("phi1", r1), ("phi2", r2), ("psi1", r3), ("psi2", r4)] {
                assert!(r < 1e-7, "k={k} {name}: residual {r}");
            }
        }
    }
}
