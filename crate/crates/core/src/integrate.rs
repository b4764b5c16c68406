//! Initial-value integration of -y'' + q(x) y = lambda y on a single
//! subinterval, as the first-order system (y, y')' = (y', (q - lambda) y),
//! with a Dormand-Prince 5(4) embedded pair. Works in either direction and
//! for real or complex lambda; an integration range may touch the
//! transmission point `c` at an endpoint but must never straddle it, so the
//! potential side is fixed for the whole run.

use thiserror::Error;

use crate::model::{Potential, Side};
use crate::scalar::Scalar;

/// Solution state (value, derivative) at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State<S: Scalar> {
    pub y: S,
    pub yp: S,
}

impl<S: Scalar> State<S> {
    pub fn new(y: S, yp: S) -> Self {
        Self { y, yp }
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.yp.is_finite()
    }

    fn axpy(self, h: f64, d: Deriv<S>) -> Self {
        State::new(self.y + d.dy.scale(h), self.yp + d.dyp.scale(h))
    }

    pub fn scale(self, k: f64) -> Self {
        State::new(self.y.scale(k), self.yp.scale(k))
    }
}

/// Right-hand side value (y', y'').
#[derive(Debug, Clone, Copy)]
struct Deriv<S: Scalar> {
    dy: S,
    dyp: S,
}

impl<S: Scalar> Deriv<S> {
    fn zero() -> Self {
        Deriv {
            dy: S::zero(),
            dyp: S::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Abscissae the integrator must land on exactly (they become trace
    /// nodes). Values outside the integration range are ignored.
    pub dense_output_points: Option<Vec<f64>>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_steps: 2_000_000,
            dense_output_points: None,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tols(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("step limit exceeded near x = {at_x}")]
    StepLimitExceeded { at_x: f64 },
    #[error("integration range [{x0}, {x1}] straddles the transmission point c = {c}")]
    StraddlesTransmissionPoint { x0: f64, x1: f64, c: f64 },
    #[error("state became non-finite near x = {at_x}")]
    NonFiniteState { at_x: f64 },
    #[error("invalid integrator options: {0}")]
    InvalidOptions(&'static str),
}

/// Continuous solution record on one subinterval: strictly monotone nodes
/// with the state at each node, plus (y'', y''') for quintic Hermite dense
/// output between nodes. The second and third derivatives come for free
/// from the differential equation, and the quintic keeps the interpolation
/// error at the same order as the integrator's own.
#[derive(Debug, Clone)]
pub struct Trace<S: Scalar> {
    xs: Vec<f64>,
    states: Vec<State<S>>,
    curvs: Vec<State<S>>,
}

impl<S: Scalar> Trace<S> {
    /// Assembles a trace from precomputed nodes; `curvs[i]` must hold
    /// (y''(x_i), y'''(x_i)).
    pub(crate) fn from_nodes(xs: Vec<f64>, states: Vec<State<S>>, curvs: Vec<State<S>>) -> Self {
        debug_assert!(xs.len() >= 2 && xs.len() == states.len() && xs.len() == curvs.len());
        Trace { xs, states, curvs }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn states(&self) -> &[State<S>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn first_x(&self) -> f64 {
        self.xs[0]
    }

    pub fn last_x(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn first_state(&self) -> State<S> {
        self.states[0]
    }

    pub fn last_state(&self) -> State<S> {
        *self.states.last().unwrap()
    }

    pub fn is_increasing(&self) -> bool {
        self.xs[0] < *self.xs.last().unwrap()
    }

    /// Reverses the node order in place, making a backward-integrated trace
    /// increasing.
    pub fn reverse(&mut self) {
        self.xs.reverse();
        self.states.reverse();
        self.curvs.reverse();
    }

    pub fn scale(&mut self, k: f64) {
        for s in &mut self.states {
            *s = s.scale(k);
        }
        for d in &mut self.curvs {
            *d = d.scale(k);
        }
    }

    /// Max |y| over the trace nodes.
    pub fn max_abs_y(&self) -> f64 {
        self.states.iter().map(|s| s.y.abs()).fold(0.0, f64::max)
    }

    /// Dense output by two-point quintic Hermite interpolation (values plus
    /// first and second derivatives at the bracketing nodes) on the step
    /// containing `x` (clamped to the trace range).
    pub fn sample(&self, x: f64) -> State<S> {
        let n = self.xs.len();
        debug_assert!(n >= 2);
        let inc = self.is_increasing();
        // index of the left node of the bracketing interval
        let i = if inc {
            match self.xs.partition_point(|&v| v <= x) {
                0 => 0,
                k => (k - 1).min(n - 2),
            }
        } else {
            match self.xs.partition_point(|&v| v >= x) {
                0 => 0,
                k => (k - 1).min(n - 2),
            }
        };
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        if h == 0.0 {
            return self.states[i];
        }
        let t = ((x - x0) / h).clamp(0.0, 1.0);
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
        let (s0, s1) = (self.states[i], self.states[i + 1]);
        let (c0, c1) = (self.curvs[i], self.curvs[i + 1]);
        let quintic = |v0: S, m0: S, a0: S, v1: S, m1: S, a1: S| {
            v0.scale(h0)
                + m0.scale(h * h1)
                + a0.scale(h * h * h2)
                + v1.scale(h3)
                + m1.scale(h * h4)
                + a1.scale(h * h * h5)
        };
        State::new(
            quintic(s0.y, s0.yp, c0.y, s1.y, s1.yp, c1.y),
            quintic(s0.yp, c0.y, c0.yp, s1.yp, c1.y, c1.yp),
        )
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// y5 - y4 coefficients for the embedded error estimate
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn piece_side(x0: f64, x1: f64, c: f64) -> Result<Side, IntegrateError> {
    let lo = x0.min(x1);
    let hi = x0.max(x1);
    let tol = 1e-10 * (1.0 + c.abs());
    if hi <= c + tol {
        Ok(Side::Left)
    } else if lo >= c - tol {
        Ok(Side::Right)
    } else {
        Err(IntegrateError::StraddlesTransmissionPoint { x0, x1, c })
    }
}

/// Integrates the IVP from `x0` to `x1` (either direction) and records the
/// accepted steps as a `Trace`.
pub fn integrate_ivp<S: Scalar>(
    q: &Potential,
    lambda: S,
    x0: f64,
    x1: f64,
    y0: State<S>,
    opts: &IntegratorOptions,
) -> Result<Trace<S>, IntegrateError> {
    let mut trace = Trace {
        xs: Vec::new(),
        states: Vec::new(),
        curvs: Vec::new(),
    };
    drive(q, lambda, x0, x1, y0, opts, Some(&mut trace))?;
    Ok(trace)
}

/// Like `integrate_ivp` but returns only the final state; used in hot loops
/// (characteristic-function scans) where the trace is not needed.
pub fn propagate<S: Scalar>(
    q: &Potential,
    lambda: S,
    x0: f64,
    x1: f64,
    y0: State<S>,
    opts: &IntegratorOptions,
) -> Result<State<S>, IntegrateError> {
    drive(q, lambda, x0, x1, y0, opts, None)
}

fn drive<S: Scalar>(
    q: &Potential,
    lambda: S,
    x0: f64,
    x1: f64,
    y0: State<S>,
    opts: &IntegratorOptions,
    mut trace: Option<&mut Trace<S>>,
) -> Result<State<S>, IntegrateError> {
    if !(opts.rel_tol > 0.0 && opts.rel_tol < 1.0 && opts.abs_tol > 0.0 && opts.abs_tol < 1.0) {
        return Err(IntegrateError::InvalidOptions("tolerances must lie in (0, 1)"));
    }
    if opts.max_steps == 0 {
        return Err(IntegrateError::InvalidOptions("max_steps must be >= 1"));
    }
    let side = piece_side(x0, x1, q.c)?;
    let span = x1 - x0;
    let dir = if span >= 0.0 { 1.0 } else { -1.0 };

    // mandatory interior stops, sorted along the direction of travel
    let mut stops: Vec<f64> = opts
        .dense_output_points
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .copied()
        .filter(|&p| (p - x0) * dir > 0.0 && (x1 - p) * dir > 0.0)
        .collect();
    stops.sort_by(|p, r| (dir * p).partial_cmp(&(dir * r)).unwrap());
    let mut next_stop = 0usize;

    let f = |x: f64, s: State<S>| -> Deriv<S> {
        let qv = q.eval_on(x, side);
        Deriv {
            dy: s.yp,
            dyp: s.y.scale(qv) - lambda * s.y,
        }
    };
    // (y'', y''') from the equation itself: y'' = (q - lambda) y and
    // y''' = (q - lambda) y' + q' y
    let curv = |x: f64, s: State<S>| -> State<S> {
        let qv = q.eval_on(x, side);
        let qd = q.eval_deriv_on(x, side);
        State::new(
            s.y.scale(qv) - lambda * s.y,
            s.yp.scale(qv) - lambda * s.yp + s.y.scale(qd),
        )
    };

    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, y);
    if let Some(t) = trace.as_deref_mut() {
        t.xs.push(x);
        t.states.push(y);
        t.curvs.push(curv(x, y));
    }
    if span == 0.0 {
        return Ok(y);
    }

    let mut h = span / 100.0;
    let h_min = span.abs() * 1e-14;
    let mut steps = 0usize;

    loop {
        if (x1 - x) * dir <= f64::EPSILON * span.abs() {
            break;
        }
        if steps >= opts.max_steps {
            return Err(IntegrateError::StepLimitExceeded { at_x: x });
        }
        steps += 1;

        // clamp to the next mandatory stop, then to the terminal point
        let mut target_is_stop = false;
        let mut limit = x1;
        if next_stop < stops.len() && (stops[next_stop] - x) * dir > 0.0 {
            limit = stops[next_stop];
            target_is_stop = true;
        }
        if (x + h - limit) * dir >= 0.0 {
            h = limit - x;
        } else {
            target_is_stop = false;
        }

        // DP5(4) step
        let mut k = [Deriv::<S>::zero(); 7];
        k[0] = k1;
        for i in 1..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(i) {
                let aij = A[i][j];
                if aij != 0.0 {
                    yi = yi.axpy(h * aij, *kj);
                }
            }
            k[i] = f(x + C[i] * h, yi);
        }
        // k[6] was evaluated at y5 (the A[6] row equals the 5th-order weights)
        let mut y5 = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            if A[6][j] != 0.0 {
                y5 = y5.axpy(h * A[6][j], *kj);
            }
        }
        let mut err_y = S::zero();
        let mut err_yp = S::zero();
        for (j, kj) in k.iter().enumerate() {
            if E[j] != 0.0 {
                err_y = err_y + kj.dy.scale(h * E[j]);
                err_yp = err_yp + kj.dyp.scale(h * E[j]);
            }
        }
        let sc_y = opts.abs_tol + opts.rel_tol * y.y.abs().max(y5.y.abs());
        let sc_yp = opts.abs_tol + opts.rel_tol * y.yp.abs().max(y5.yp.abs());
        let err_ratio =
            (0.5 * ((err_y.abs() / sc_y).powi(2) + (err_yp.abs() / sc_yp).powi(2))).sqrt();

        if !err_ratio.is_finite() || !y5.is_finite() {
            h *= 0.25;
            if h.abs() < h_min {
                return Err(IntegrateError::NonFiniteState { at_x: x });
            }
            k1 = f(x, y);
            continue;
        }

        let factor = if err_ratio == 0.0 {
            5.0
        } else {
            (0.9 * err_ratio.powf(-0.2)).clamp(0.2, 5.0)
        };

        if err_ratio <= 1.0 {
            x += h;
            y = y5;
            k1 = f(x, y5); // FSAL re-evaluation at the accepted point
            if let Some(t) = trace.as_deref_mut() {
                t.xs.push(x);
                t.states.push(y);
                t.curvs.push(curv(x, y));
            }
            if target_is_stop {
                next_stop += 1;
            }
            h *= factor;
        } else {
            h *= factor;
            if h.abs() < h_min {
                return Err(IntegrateError::StepLimitExceeded { at_x: x });
            }
        }
    }

    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn opts() -> IntegratorOptions {
        IntegratorOptions::default()
    }

    /// Closed-form solution of y'' = mu y with constant mu = q0 - lambda:
    /// trig for mu < 0, hyperbolic for mu > 0, linear for mu = 0.
    fn constant_q_oracle(q0: f64, lambda: f64, x0: f64, x1: f64, y0: (f64, f64)) -> (f64, f64) {
        let mu = q0 - lambda;
        let t = x1 - x0;
        let (y, yp) = y0;
        if mu < 0.0 {
            let nu = (-mu).sqrt();
            (
                y * (nu * t).cos() + yp * (nu * t).sin() / nu,
                -y * nu * (nu * t).sin() + yp * (nu * t).cos(),
            )
        } else if mu > 0.0 {
            let nu = mu.sqrt();
            (
                y * (nu * t).cosh() + yp * (nu * t).sinh() / nu,
                y * nu * (nu * t).sinh() + yp * (nu * t).cosh(),
            )
        } else {
            (y + yp * t, yp)
        }
    }

    #[test]
    fn harmonic_oscillator_quarter_period() {
        let q = Potential::zero(10.0);
        let tr = integrate_ivp(&q, 1.0, 0.0, PI / 2.0, State::new(1.0, 0.0), &opts()).unwrap();
        let end = tr.last_state();
        assert!(end.y.abs() < 1e-10, "y(pi/2) = {}", end.y);
        assert!((end.yp + 1.0).abs() < 1e-10, "y'(pi/2) = {}", end.yp);
    }

    #[test]
    fn linear_solution_at_lambda_zero() {
        let q = Potential::zero(10.0);
        let tr = integrate_ivp(&q, 0.0, 0.0, 1.0, State::new(0.0, 1.0), &opts()).unwrap();
        let end = tr.last_state();
        assert!((end.y - 1.0).abs() < 1e-12 && (end.yp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_q_matches_oracle() {
        // q = 2, lambda = 5: mu = -3, y(1) = cos(sqrt 3), y'(1) = -sqrt3 sin(sqrt3)
        let q = Potential::constant(10.0, 2.0, 0.0);
        let tr = integrate_ivp(&q, 5.0, 0.0, 1.0, State::new(1.0, 0.0), &opts()).unwrap();
        let end = tr.last_state();
        let (y_exact, yp_exact) = constant_q_oracle(2.0, 5.0, 0.0, 1.0, (1.0, 0.0));
        assert!((y_exact - 3.0f64.sqrt().cos()).abs() < 1e-15);
        assert!((yp_exact + 3.0f64.sqrt() * 3.0f64.sqrt().sin()).abs() < 1e-15);
        assert!((end.y - y_exact).abs() < 1e-11);
        assert!((end.yp - yp_exact).abs() < 1e-11);
    }

    #[test]
    fn constant_q_family_forward_and_backward() {
        let cases = [
            (0.0, 1.0, 0.0, 1.5, (1.0, 0.25)),
            (2.0, 5.0, 0.0, 1.0, (1.0, 0.0)),
            (-1.5, -8.0, 0.3, 1.9, (0.7, -1.1)),
            (4.0, 0.5, 2.0, 0.1, (-0.4, 0.9)), // backward, hyperbolic
            (1.0, 120.0, 0.0, 1.8, (0.2, 1.0)),
        ];
        for (q0, lam, x0, x1, y0) in cases {
            let q = Potential::constant(5.0, q0, 0.0);
            let tr = integrate_ivp(&q, lam, x0, x1, State::new(y0.0, y0.1), &opts()).unwrap();
            let end = tr.last_state();
            let (ye, ype) = constant_q_oracle(q0, lam, x0, x1, y0);
            let scale = ye.abs().max(ype.abs()).max(1.0);
            assert!(
                (end.y - ye).abs() < 1e-11 * scale && (end.yp - ype).abs() < 1e-11 * scale,
                "q0={q0} lam={lam}: got ({}, {}), want ({ye}, {ype})",
                end.y,
                end.yp
            );
        }
    }

    #[test]
    fn wronskian_constant_along_trace() {
        // Abel's identity: no first-derivative term, so W is constant.
        let q = Potential::new(5.0, vec![0.3, -0.2, 0.05], vec![]);
        let lam = 17.0;
        let xs = [0.21, 0.77, 1.3, 1.94];
        let o = IntegratorOptions {
            dense_output_points: Some(xs.to_vec()),
            ..opts()
        };
        let t1 = integrate_ivp(&q, lam, 0.0, 2.0, State::new(1.0, 0.0), &o).unwrap();
        let t2 = integrate_ivp(&q, lam, 0.0, 2.0, State::new(0.0, 1.0), &o).unwrap();
        // the shared abscissae are exact nodes of both traces, so the states
        // carry integration error only
        let w_at = |x: f64| {
            let a = t1.sample(x);
            let b = t2.sample(x);
            a.y * b.yp - a.yp * b.y
        };
        let w0 = w_at(0.0);
        for x in xs {
            assert!(
                (w_at(x) - w0).abs() < 100.0 * 1e-12 * w0.abs().max(1.0),
                "W drift at x={x}: {} vs {w0}",
                w_at(x)
            );
        }
    }

    #[test]
    fn halving_tolerance_reduces_error() {
        let q = Potential::constant(5.0, 1.0, 0.0);
        let exact = constant_q_oracle(1.0, 60.0, 0.0, 2.0, (1.0, 0.0));
        let mut prev_err = f64::INFINITY;
        for rel in [1e-6, 1e-8, 1e-10] {
            let o = IntegratorOptions::with_tols(rel, rel * 1e-2);
            let end = propagate(&q, 60.0, 0.0, 2.0, State::new(1.0, 0.0), &o).unwrap();
            let err = (end.y - exact.0).abs() + (end.yp - exact.1).abs();
            assert!(err < prev_err, "rel={rel}: err {err} !< {prev_err}");
            prev_err = err;
        }
    }

    #[test]
    fn complex_lambda_conjugate_symmetry() {
        let q = Potential::new(5.0, vec![0.4, 0.1], vec![]);
        let lam = Complex64::new(3.0, 2.0);
        let y0 = State::new(Complex64::new(1.0, 0.0), Complex64::new(-0.5, 0.0));
        let o = opts();
        let up = propagate(&q, lam, 0.0, 1.7, y0, &o).unwrap();
        let dn = propagate(&q, lam.conj(), 0.0, 1.7, y0, &o).unwrap();
        assert!((up.y.conj() - dn.y).norm() < 1e-10 * up.y.norm().max(1.0));
        assert!((up.yp.conj() - dn.yp).norm() < 1e-10 * up.yp.norm().max(1.0));
    }

    #[test]
    fn straddling_transmission_point_is_rejected() {
        let q = Potential::zero(0.5);
        let err = integrate_ivp(&q, 1.0, 0.0, 1.0, State::new(1.0, 0.0), &opts()).unwrap_err();
        assert!(matches!(err, IntegrateError::StraddlesTransmissionPoint { .. }));
        // touching c at an endpoint is fine
        assert!(integrate_ivp(&q, 1.0, 0.0, 0.5, State::new(1.0, 0.0), &opts()).is_ok());
        assert!(integrate_ivp(&q, 1.0, 0.5, 1.0, State::new(1.0, 0.0), &opts()).is_ok());
    }

    #[test]
    fn step_limit_is_enforced() {
        let q = Potential::zero(10.0);
        let o = IntegratorOptions {
            max_steps: 3,
            ..opts()
        };
        let err = integrate_ivp(&q, 1e6, 0.0, 5.0, State::new(1.0, 0.0), &o).unwrap_err();
        assert!(matches!(err, IntegrateError::StepLimitExceeded { .. }));
    }

    #[test]
    fn dense_output_points_become_nodes() {
        let q = Potential::zero(10.0);
        let o = IntegratorOptions {
            dense_output_points: Some(vec![0.3333, 1.77]),
            ..opts()
        };
        let tr = integrate_ivp(&q, 4.0, 0.0, 2.0, State::new(1.0, 0.0), &o).unwrap();
        assert!(tr.xs().iter().any(|&x| (x - 0.3333).abs() < 1e-14));
        assert!(tr.xs().iter().any(|&x| (x - 1.77).abs() < 1e-14));
    }

    #[test]
    fn dense_sample_accuracy_between_nodes() {
        let q = Potential::zero(10.0);
        let tr = integrate_ivp(&q, 25.0, 0.0, 2.0, State::new(1.0, 0.0), &opts()).unwrap();
        for i in 0..40 {
            let x = 0.025 + i as f64 * 0.05;
            let s = tr.sample(x);
            let exact = constant_q_oracle(0.0, 25.0, 0.0, x, (1.0, 0.0));
            assert!(
                (s.y - exact.0).abs() < 1e-9,
                "dense sample at {x}: {} vs {}",
                s.y,
                exact.0
            );
        }
    }
}
