//! Eigenvalue localization (asymptotic seeding plus bracketed scanning),
//! Brent refinement, branch labeling, and eigenfunction extraction.
//!
//! The scan is the primary root source: the asymptotic seed positions are
//! O(1/n) accurate and say nothing about low indices or negative
//! eigenvalues, so seeds only accelerate and label. Every returned
//! eigenvalue is certified by the proportionality of phi and psi, and the
//! set is cross-checked against the argument-principle count over the
//! covered range.

use thiserror::Error;

use crate::charfun::{charfun_inner, count_zeros, wronskian, CharPath, CharSample, CharfunError};
use crate::integrate::IntegratorOptions;
use crate::model::{CaseTag, ProblemSpec, Side};
use crate::solutions::{phi, psi, PiecewiseSolution, SolutionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Branch {
    One,
    Two,
}

impl Branch {
    pub fn index(self) -> u8 {
        match self {
            Branch::One => 1,
            Branch::Two => 2,
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Predicted sqrt-eigenvalue position from the leading-term zero lattices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticSeed {
    pub s_pred: f64,
    pub branch: Branch,
    pub n: i64,
    pub case: CaseTag,
}

/// A located, refined and certified eigenvalue.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    /// sqrt(lambda) for lambda >= 0, sqrt(-lambda) with the flag set
    /// otherwise.
    pub s: f64,
    pub s_is_imaginary: bool,
    pub n_index: Option<i64>,
    pub branch: Option<Branch>,
    /// |omega(lambda)| after refinement.
    pub residual: f64,
    pub bracket: (f64, f64),
    /// phi at lambda, normalized to unit max-norm.
    pub eigenfunction: PiecewiseSolution<f64>,
}

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("Delta24 = 0: every asymptotic leading term vanishes, fall back to scan-only mode")]
    DegenerateLeadingCoefficient,
    #[error("lost bracket [{lo}, {hi}]: no sign change even with tightened tolerances")]
    LostBracket { lo: f64, hi: f64 },
    #[error("completeness mismatch: winding number {expected}, scanner found {found}")]
    CompletenessMismatch {
        expected: usize,
        found: usize,
        pairs: Vec<Eigenpair>,
    },
    #[error("lambda = {lambda} failed the eigenfunction certificate (|W[phi,psi]| ratio {ratio:.3e})")]
    NotAnEigenvalue { lambda: f64, ratio: f64 },
    #[error(transparent)]
    Charfun(#[from] CharfunError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
}

/// Seeds from the case-dependent zero lattices of the characteristic
/// function's leading term: branch 1 lives on the pi/(b - c) lattice,
/// branch 2 on the pi/(c - a) lattice, with integer offsets where the
/// corresponding factor is a sine and half-integer offsets where it is a
/// cosine. Denominators are realized as positive lengths.
pub fn asymptotic_seeds(
    spec: &ProblemSpec,
    n_min: i64,
    n_max: i64,
) -> Result<Vec<AsymptoticSeed>, SpectrumError> {
    let dets = spec.determinants();
    let beta_scale = spec
        .beta
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if dets.d24.abs() <= 1e-12 * beta_scale * beta_scale {
        return Err(SpectrumError::DegenerateLeadingCoefficient);
    }
    let case = spec.case();
    let (len_left, len_right) = spec.lengths();
    // (branch-1 offset, branch-2 offset) applied to n
    let (off1, off2) = match case {
        CaseTag::I => (-2.0, 0.0),
        CaseTag::II => (-1.0, 0.5),
        CaseTag::III => (0.5, -1.0),
        CaseTag::IV => (-0.5, 0.5),
    };
    let mut seeds = Vec::new();
    for n in n_min..=n_max {
        let s1 = (n as f64 + off1) * std::f64::consts::PI / len_right;
        if s1 > 0.0 {
            seeds.push(AsymptoticSeed {
                s_pred: s1,
                branch: Branch::One,
                n,
                case,
            });
        }
        let s2 = (n as f64 + off2) * std::f64::consts::PI / len_left;
        if s2 > 0.0 {
            seeds.push(AsymptoticSeed {
                s_pred: s2,
                branch: Branch::Two,
                n,
                case,
            });
        }
    }
    seeds.sort_by(|a, b| a.s_pred.partial_cmp(&b.s_pred).unwrap());
    Ok(seeds)
}

/// Result of a uniform grid scan: the cached samples and the sign-change
/// brackets.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub samples: Vec<CharSample<f64>>,
    pub brackets: Vec<(f64, f64)>,
}

/// Uniform scan of omega over [lambda_min, lambda_max]; consecutive grid
/// points with a sign change become brackets. A grid point that is exactly
/// zero becomes a degenerate bracket.
pub fn scan_brackets(
    spec: &ProblemSpec,
    lambda_min: f64,
    lambda_max: f64,
    step: f64,
    opts: &IntegratorOptions,
) -> Result<ScanResult, SpectrumError> {
    assert!(step > 0.0 && lambda_max >= lambda_min);
    let n = ((lambda_max - lambda_min) / step).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| lambda_min + i as f64 * step).collect();
    let values = par_try_map(&grid, |&lam| charfun_inner(spec, lam, opts))?;
    let samples: Vec<CharSample<f64>> = grid
        .iter()
        .zip(&values)
        .map(|(&lambda, &w)| CharSample {
            lambda,
            w,
            path: CharPath::ViaPsiAtA,
        })
        .collect();
    Ok(ScanResult {
        brackets: brackets_from_samples(&grid, &values),
        samples,
    })
}

fn brackets_from_samples(grid: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let mut brackets = Vec::new();
    for i in 0..grid.len() {
        if values[i] == 0.0 {
            brackets.push((grid[i], grid[i]));
        } else if i + 1 < grid.len() && values[i] * values[i + 1] < 0.0 {
            brackets.push((grid[i], grid[i + 1]));
        }
    }
    brackets
}

/// Brent-style bracketed refinement of a sign-change bracket of omega.
/// Terminates when the bracket width drops below
/// refine_tol * max(1, |lambda|). If the bracket endpoints do not actually
/// change sign (integration noise), one retry with 100x tighter integrator
/// tolerances is attempted before giving up.
pub fn refine(
    spec: &ProblemSpec,
    bracket: (f64, f64),
    refine_tol: f64,
    opts: &IntegratorOptions,
) -> Result<Eigenpair, SpectrumError> {
    let (lo, hi) = bracket;
    if lo == hi {
        let w: f64 = charfun_inner(spec, lo, opts)?;
        return finish_eigenpair(spec, lo, w.abs(), bracket, opts);
    }

    let f_lo: f64 = charfun_inner(spec, lo, opts)?;
    let f_hi: f64 = charfun_inner(spec, hi, opts)?;
    if f_lo == 0.0 {
        return finish_eigenpair(spec, lo, 0.0, bracket, opts);
    }
    if f_hi == 0.0 {
        return finish_eigenpair(spec, hi, 0.0, bracket, opts);
    }
    if f_lo.signum() == f_hi.signum() {
        // retry once with tighter tolerances, then fail
        let tight = IntegratorOptions {
            rel_tol: (opts.rel_tol * 1e-2).max(1e-14),
            abs_tol: (opts.abs_tol * 1e-2).max(1e-16),
            ..opts.clone()
        };
        let g_lo: f64 = charfun_inner(spec, lo, &tight)?;
        let g_hi: f64 = charfun_inner(spec, hi, &tight)?;
        if g_lo.signum() == g_hi.signum() {
            return Err(SpectrumError::LostBracket { lo, hi });
        }
        return brent(spec, lo, hi, g_lo, g_hi, refine_tol, &tight, bracket);
    }
    brent(spec, lo, hi, f_lo, f_hi, refine_tol, opts, bracket)
}

#[allow(clippy::too_many_arguments)]
fn brent(
    spec: &ProblemSpec,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    refine_tol: f64,
    opts: &IntegratorOptions,
    original: (f64, f64),
) -> Result<Eigenpair, SpectrumError> {
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..200 {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * refine_tol * b.abs().max(1.0);
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return finish_eigenpair(spec, b, fb.abs(), original, opts);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // inverse quadratic / secant step
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q0 * (q0 - r) - (b - a) * (r - 1.0)),
                    (q0 - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1 * xm.signum()
        };
        fb = charfun_inner(spec, b, opts)?;
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    finish_eigenpair(spec, b, fb.abs(), original, opts)
}

fn finish_eigenpair(
    spec: &ProblemSpec,
    lambda: f64,
    residual: f64,
    bracket: (f64, f64),
    opts: &IntegratorOptions,
) -> Result<Eigenpair, SpectrumError> {
    let eigenfunction = eigenfunction(spec, lambda, opts)?;
    Ok(Eigenpair {
        lambda,
        s: lambda.abs().sqrt(),
        s_is_imaginary: lambda < 0.0,
        n_index: None,
        branch: None,
        residual,
        bracket,
        eigenfunction,
    })
}

/// phi at an (already refined) eigenvalue, normalized to unit max-norm.
/// Certifies that lambda is genuinely an eigenvalue by checking that phi and
/// psi are proportional: |W[phi, psi]| must be below 1e-6 times the product
/// of the solution norms on both pieces.
pub fn eigenfunction(
    spec: &ProblemSpec,
    lambda: f64,
    opts: &IntegratorOptions,
) -> Result<PiecewiseSolution<f64>, SpectrumError> {
    let mut f = phi(spec, lambda, opts)?;
    let g = psi(spec, lambda, opts)?;
    let norm_product = f.state_norm() * g.state_norm();
    let mut worst: f64 = 0.0;
    let (a, c, b) = (spec.a, spec.c, spec.b);
    for (x, side) in [
        (a, Side::Left),
        (0.5 * (a + c), Side::Left),
        (c, Side::Left),
        (c, Side::Right),
        (0.5 * (c + b), Side::Right),
        (b, Side::Right),
    ] {
        let w = wronskian(&f, &g, x, side)?;
        worst = worst.max(w.abs());
    }
    let ratio = worst / norm_product.max(f64::MIN_POSITIVE);
    if ratio > 1e-6 {
        return Err(SpectrumError::NotAnEigenvalue { lambda, ratio });
    }
    let peak = f.max_abs_y();
    if peak > 0.0 {
        f.scale(1.0 / peak);
    }
    Ok(f)
}

/// Options for the eigenvalue pipeline.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub integrator: IntegratorOptions,
    /// Relative bracket-width target of the refinement.
    pub refine_tol: f64,
    /// Step of the lambda grid used below lambda = 0 (and by scan-only
    /// fallback); `None` picks a default from the interval length.
    pub scan_step: Option<f64>,
    /// Scan floor; `None` uses -(sup |q| + 10).
    pub lambda_min: Option<f64>,
    /// Use asymptotic seeds to add local brackets (requires Delta24 != 0).
    pub use_seeds: bool,
    /// Cross-check the result against the argument-principle count.
    pub check_completeness: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions::default(),
            refine_tol: 1e-10,
            scan_step: None,
            lambda_min: None,
            use_seeds: true,
            check_completeness: true,
        }
    }
}

/// Everything `eigenvalues` produces besides the pairs themselves.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub pairs: Vec<Eigenpair>,
    /// (winding count, real roots found) over the covered range, when the
    /// completeness check ran.
    pub completeness: Option<(usize, usize)>,
}

/// Finds the lowest `count` eigenvalues: a sign-change scan from the lambda
/// floor upward (uniform in lambda below zero, uniform in s above), merged
/// with seed-guided local brackets when Delta24 != 0, refined, certified,
/// deduplicated and cross-checked against the winding number.
pub fn eigenvalues(
    spec: &ProblemSpec,
    count: usize,
    opts: &SolveOptions,
) -> Result<SpectrumResult, SpectrumError> {
    assert!(count >= 1);
    let (len_left, len_right) = spec.lengths();
    let total_len = len_left + len_right;
    let lambda_floor = opts
        .lambda_min
        .unwrap_or_else(|| -(spec.q.sup_abs(spec.a, spec.b) + 10.0));
    let s_hi = std::f64::consts::PI * (count as f64 + 3.0) / total_len + 1.0;

    let seeds = if opts.use_seeds {
        asymptotic_seeds(spec, 1, count as i64 + 6).ok()
    } else {
        None
    };

    let mut resolution = 1.0;
    for attempt in 0..2 {
        let all = hunt(
            spec,
            lambda_floor,
            s_hi,
            resolution,
            seeds.as_deref(),
            opts,
        )?;
        let mut kept: Vec<Eigenpair> = all.clone();
        kept.truncate(count);

        if !opts.check_completeness || kept.is_empty() {
            return Ok(SpectrumResult {
                pairs: kept,
                completeness: None,
            });
        }

        // top of the checked range: halfway to the next found root if one
        // was seen, otherwise half a typical gap above the last kept root
        let last = kept.last().unwrap().lambda;
        let lambda_top = if all.len() > kept.len() {
            0.5 * (last + all[kept.len()].lambda)
        } else {
            last + last.abs().sqrt().max(1.0) * std::f64::consts::PI / total_len
        };
        let z = count_zeros(
            spec,
            (lambda_floor, lambda_top),
            5.0,
            (64 + 24 * (count + 2)).min(1024),
            &opts.integrator,
        )?;
        let in_range = kept.len();
        if z.count == in_range {
            return Ok(SpectrumResult {
                pairs: kept,
                completeness: Some((z.count, in_range)),
            });
        }
        if attempt == 1 {
            return Err(SpectrumError::CompletenessMismatch {
                expected: z.count,
                found: in_range,
                pairs: kept,
            });
        }
        resolution = 4.0;
    }
    unreachable!()
}

fn hunt(
    spec: &ProblemSpec,
    lambda_floor: f64,
    s_hi: f64,
    resolution: f64,
    seeds: Option<&[AsymptoticSeed]>,
    opts: &SolveOptions,
) -> Result<Vec<Eigenpair>, SpectrumError> {
    let (len_left, len_right) = spec.lengths();
    let total_len = len_left + len_right;

    // composite grid: uniform in lambda below zero, uniform in s above
    let neg_step = opts.scan_step.unwrap_or(0.25) / resolution;
    let ds = std::f64::consts::PI / total_len / (8.0 * resolution);
    let mut grid = Vec::new();
    if lambda_floor < 0.0 {
        let n = (-lambda_floor / neg_step).ceil() as usize;
        for i in 0..=n {
            grid.push((lambda_floor + i as f64 * neg_step).min(0.0));
        }
    } else {
        grid.push(lambda_floor.max(0.0));
    }
    let mut s = ds;
    while s <= s_hi {
        grid.push(s * s);
        s += ds;
    }
    grid.dedup_by(|a, b| a == b);

    let values = par_try_map(&grid, |&lam| charfun_inner(spec, lam, &opts.integrator))?;
    let mut brackets = brackets_from_samples(&grid, &values);

    // seed-guided local brackets
    if let Some(seeds) = seeds {
        brackets.extend(seed_window_brackets(
            spec,
            seeds,
            (8.0 * resolution) as usize,
            &opts.integrator,
        )?);
    }

    let refined = par_try_map(&brackets, |&bk| {
        refine(spec, bk, opts.refine_tol, &opts.integrator)
    })?;

    let mut pairs = refined;
    pairs.sort_by(|p, q| p.lambda.partial_cmp(&q.lambda).unwrap());
    pairs.dedup_by(|p, q| {
        (p.lambda - q.lambda).abs() <= 8.0 * opts.refine_tol * p.lambda.abs().max(1.0)
    });
    Ok(pairs)
}

/// Sign-change brackets inside +-(half local gap) windows around each seed,
/// each window subdivided into `subdivisions` pieces.
pub(crate) fn seed_window_brackets(
    spec: &ProblemSpec,
    seeds: &[AsymptoticSeed],
    subdivisions: usize,
    opts: &IntegratorOptions,
) -> Result<Vec<(f64, f64)>, SpectrumError> {
    let mut out = Vec::new();
    for (i, seed) in seeds.iter().enumerate() {
        let gap_prev = if i > 0 {
            seed.s_pred - seeds[i - 1].s_pred
        } else {
            seed.s_pred
        };
        let gap_next = if i + 1 < seeds.len() {
            seeds[i + 1].s_pred - seed.s_pred
        } else {
            gap_prev
        };
        let default_gap = std::f64::consts::PI / (spec.b - spec.a);
        let half = 0.5
            * gap_prev
                .min(gap_next)
                .max(1e-3)
                .max(0.25 * default_gap)
                .min(2.0 * default_gap);
        let s_lo = (seed.s_pred - half).max(1e-6);
        let s_hi = seed.s_pred + half;
        let n = subdivisions.max(4);
        let sub: Vec<f64> = (0..=n)
            .map(|k| {
                let s = s_lo + (s_hi - s_lo) * k as f64 / n as f64;
                s * s
            })
            .collect();
        let vals = par_try_map(&sub, |&lam| charfun_inner(spec, lam, opts))?;
        out.extend(brackets_from_samples(&sub, &vals));
    }
    Ok(out)
}

/// Greedy nearest-seed labeling in s-space: pairs sorted by distance claim
/// seeds one at a time; a seed claims at most one eigenvalue and ties go to
/// the lower branch. Eigenvalues with no seed within `window` stay
/// unlabeled.
pub fn label_branches(pairs: &mut [Eigenpair], seeds: &[AsymptoticSeed], window: f64) {
    let mut claims: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, pair) in pairs.iter().enumerate() {
        if pair.s_is_imaginary {
            continue;
        }
        for (si, seed) in seeds.iter().enumerate() {
            let dist = (pair.s - seed.s_pred).abs();
            if dist <= window {
                claims.push((dist, pi, si));
            }
        }
    }
    claims.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(seeds[a.2].branch.cmp(&seeds[b.2].branch))
            .then(seeds[a.2].n.cmp(&seeds[b.2].n))
    });
    let mut pair_taken = vec![false; pairs.len()];
    let mut seed_taken = vec![false; seeds.len()];
    for (_, pi, si) in claims {
        if pair_taken[pi] || seed_taken[si] {
            continue;
        }
        pair_taken[pi] = true;
        seed_taken[si] = true;
        pairs[pi].branch = Some(seeds[si].branch);
        pairs[pi].n_index = Some(seeds[si].n);
    }
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
