//! The invariant suite behind `fdis verify`.
//!
//! Every check walks a parameter grid, records the worst residual it saw and
//! compares it with a fixed tolerance. Grid points whose construction fails
//! (non-normalizable parameters, truncation beyond the validity range of f)
//! are counted as skipped.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::fock::{self, FockState};
use crate::nonclassicality::{self, full_report};
use crate::nonlinearity::NonlinearityFunction;
use crate::states::{self, build_with_dim, Case, IntelligentStateRequest, Method, TruncationPolicy};

pub const ORACLE_TOLERANCE: f64 = 1e-9;
pub const ORACLE_FLOOR: f64 = 1e-20;
pub const INTELLIGENCE_TOLERANCE: f64 = 1e-7;
pub const RATIO_TOLERANCE: f64 = 1e-6;
pub const EIGEN_TOLERANCE: f64 = 1e-8;
pub const HARMONIOUS_S_TOLERANCE: f64 = 1e-12;
pub const REDUCTION_TOLERANCE: f64 = 1e-8;
pub const SERIES_TOLERANCE: f64 = 1e-9;

/// Size of the perturbation applied by the fault hook.
pub const FAULT_SIZE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub quick: bool,
    /// Perturb one amplitude of every state before the intelligence check.
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
    pub checked: usize,
    pub skipped: usize,
    pub passed: bool,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} worst={:.3e} tol={:.0e} checked={} skipped={}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.checked,
            self.skipped
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// One grid point.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub f: NonlinearityFunction,
    pub lambda: f64,
    pub z: Complex64,
}

/// The construction grid: four catalog functions, six `λ`, three `z`.
pub fn construction_grid(quick: bool) -> Vec<GridPoint> {
    let fs = [
        NonlinearityFunction::identity(),
        NonlinearityFunction::harmonious(),
        NonlinearityFunction::hydrogen(),
        NonlinearityFunction::trapped_ion(0.1).expect("eta = 0.1 is valid"),
    ];
    let lambdas: &[f64] = if quick { &[0.5, 1.0, 3.0] } else { &[0.0, 0.5, 0.9, 1.0, 1.5, 3.0] };
    let diag = Complex64::new(0.5, 0.5) / 2f64.sqrt();
    let zs: Vec<Complex64> = if quick {
        vec![Complex64::new(0.0, 0.0), Complex64::new(0.3, 0.0)]
    } else {
        vec![Complex64::new(0.0, 0.0), Complex64::new(0.3, 0.0), diag]
    };
    let mut grid = Vec::new();
    for f in &fs {
        for &lambda in lambdas {
            for &z in &zs {
                grid.push(GridPoint { f: f.clone(), lambda, z });
            }
        }
    }
    grid
}

/// Build a grid point with the default truncation policy.
pub fn build_point(p: &GridPoint) -> Result<FockState> {
    let request = IntelligentStateRequest::new(p.f.clone(), p.lambda, p.z, TruncationPolicy::default())?;
    states::build(&request)
}

struct Tally {
    worst: f64,
    checked: usize,
    skipped: usize,
}

impl Tally {
    fn from_results(results: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut t = Tally { worst: 0.0, checked: 0, skipped: 0 };
        for r in results {
            match r {
                Some(v) => {
                    t.checked += 1;
                    // NaN counts as a failure
                    t.worst = if v.is_nan() || t.worst.is_nan() { f64::NAN } else { t.worst.max(v) };
                }
                None => t.skipped += 1,
            }
        }
        t
    }

    fn finish(self, name: &'static str, tolerance: f64) -> CheckResult {
        CheckResult {
            name,
            worst: self.worst,
            tolerance,
            checked: self.checked,
            skipped: self.skipped,
            passed: self.checked > 0 && self.worst <= tolerance,
        }
    }
}

/// Worst relative disagreement between closed form and recursion over the
/// amplitudes larger than [`ORACLE_FLOOR`], in a basis of `dim` levels.
pub fn oracle_discrepancy(p: &GridPoint, dim: usize) -> Result<f64> {
    let dim = p.f.max_valid_n().map_or(dim, |m| dim.min(m));
    let method = Method::from(Case::resolve(p.lambda, p.z));
    let closed = build_with_dim(method, &p.f, p.lambda, p.z, dim)?;
    let oracle = build_with_dim(Method::Recursion, &p.f, p.lambda, p.z, dim)?;
    Ok(amplitude_discrepancy(closed.amplitudes(), oracle.amplitudes()))
}

/// `max |a_n − b_n| / |b_n|` over `|b_n| > ORACLE_FLOOR`.
pub fn amplitude_discrepancy(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(_, y)| y.norm() > ORACLE_FLOOR)
        .map(|(x, y)| (x - y).norm() / y.norm())
        .fold(0.0, f64::max)
}

fn perturbed(state: &FockState) -> Result<FockState> {
    let mut amps = state.amplitudes().to_vec();
    let k = 1.min(amps.len() - 1);
    amps[k] += FAULT_SIZE;
    FockState::from_unnormalized(amps, state.tail_mass())
}

fn check_oracle(grid: &[GridPoint], quick: bool) -> CheckResult {
    let dims: &[usize] = if quick { &[64] } else { &[16, 32, 64] };
    let results: Vec<Option<f64>> = grid
        .par_iter()
        .flat_map_iter(|p| dims.iter().map(move |&d| oracle_discrepancy(p, d).ok()))
        .collect();
    Tally::from_results(results).finish("oracle-equivalence", ORACLE_TOLERANCE)
}

fn check_built<F>(grid: &[GridPoint], name: &'static str, tolerance: f64, metric: F) -> CheckResult
where
    F: Fn(&GridPoint, &FockState) -> Option<f64> + Sync,
{
    let results: Vec<Option<f64>> = grid
        .par_iter()
        .map(|p| build_point(p).ok().and_then(|s| metric(p, &s)))
        .collect();
    Tally::from_results(results).finish(name, tolerance)
}

/// `|ΔX ΔP − ½|⟨[X, P]⟩|| / (ΔX ΔP + ½|⟨[X, P]⟩|)`.
pub fn relative_intelligence_residual(s: &FockState, f: &NonlinearityFunction) -> Result<f64> {
    let q = fock::deformed_quadrature_stats(s, f)?;
    let scale = q.dx * q.dp + 0.5 * q.comm.abs();
    Ok((q.dx * q.dp - 0.5 * q.comm.abs()).abs() / scale)
}

fn check_intelligence(grid: &[GridPoint], fault: bool) -> CheckResult {
    check_built(grid, "intelligence-equality", INTELLIGENCE_TOLERANCE, |p, s| {
        let s = if fault { perturbed(s).ok()? } else { s.clone() };
        relative_intelligence_residual(&s, &p.f).ok()
    })
}

fn check_ratio(grid: &[GridPoint]) -> CheckResult {
    let positive: Vec<GridPoint> = grid.iter().filter(|p| p.lambda > 0.0).cloned().collect();
    check_built(&positive, "lambda-ratio", RATIO_TOLERANCE, |p, s| {
        let q = fock::deformed_quadrature_stats(s, &p.f).ok()?;
        if q.dp > 0.0 {
            Some((q.dx / q.dp - p.lambda.abs()).abs() / p.lambda.abs())
        } else {
            None
        }
    })
}

fn check_parity(grid: &[GridPoint]) -> CheckResult {
    let zero_z: Vec<GridPoint> = grid.iter().filter(|p| p.z == Complex64::new(0.0, 0.0)).cloned().collect();
    // any nonzero odd amplitude is an infinite residual
    check_built(&zero_z, "even-parity", 0.0, |_, s| {
        let odd_nonzero = s.amplitudes().iter().skip(1).step_by(2).any(|c| c.re != 0.0 || c.im != 0.0);
        Some(if odd_nonzero { f64::INFINITY } else { 0.0 })
    })
}

fn check_eigenresidual(grid: &[GridPoint]) -> CheckResult {
    check_built(grid, "eigenresidual", EIGEN_TOLERANCE, |p, s| {
        states::residual_check(s, &p.f, p.lambda, p.z).ok()
    })
}

/// `S(n, h)` by walking every admissible chain `m_1 < m_2 − 1 < …`.
pub fn s_brute_force(weights: &[f64], n: usize, h: usize) -> f64 {
    fn walk(weights: &[f64], from: usize, last: usize, left: usize) -> f64 {
        if left == 0 {
            return 1.0;
        }
        let mut acc = 0.0;
        // room must remain for the other left − 1 indices spaced by two
        let mut m = from;
        while m + 2 * (left - 1) <= last {
            acc += weights[m] * walk(weights, m + 2, last, left - 1);
            m += 1;
        }
        acc
    }
    if n == 0 {
        return if h == 0 { 1.0 } else { 0.0 };
    }
    walk(weights, 1, n - 1, h)
}

fn s_weights(f: &NonlinearityFunction, upto: usize) -> Vec<f64> {
    let t = f.table(upto).expect("catalog function is valid for small n");
    (0..=upto).map(|m| t.nf2(m)).collect()
}

fn check_s_function() -> CheckResult {
    const MAX_N: usize = 14;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut exact = true;
    for (f, relative) in [(NonlinearityFunction::identity(), false), (NonlinearityFunction::harmonious(), true)] {
        let table = states::s_table(&f, MAX_N).expect("small n");
        let weights = s_weights(&f, MAX_N);
        for n in 0..=MAX_N {
            for h in 0..=n / 2 {
                let brute = s_brute_force(&weights, n, h);
                let dp = table[n][h];
                checked += 1;
                if relative {
                    worst = worst.max((dp - brute).abs() / brute.abs());
                } else {
                    exact &= dp == brute;
                }
            }
        }
    }
    CheckResult {
        name: "s-function",
        worst,
        tolerance: HARMONIOUS_S_TOLERANCE,
        checked,
        skipped: 0,
        passed: exact && worst <= HARMONIOUS_S_TOLERANCE,
    }
}

fn real(z: f64) -> Complex64 {
    Complex64::new(z, 0.0)
}

fn build(f: &NonlinearityFunction, lambda: f64, z: Complex64) -> Result<FockState> {
    states::build(&IntelligentStateRequest::new(f.clone(), lambda, z, TruncationPolicy::default())?)
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Known closed forms: the coherent baseline, the squeezed vacuum, the
/// geometric harmonious distribution, and agreement of the general
/// closed form with the coherent one at `λ = 1`.
pub fn reduction_residuals(quick: bool) -> Result<Vec<f64>> {
    let id = NonlinearityFunction::identity();
    let harm = NonlinearityFunction::harmonious();
    let mut out = Vec::new();
    let coherent_z: &[f64] = if quick { &[0.7] } else { &[0.2, 0.7, 1.5, 3.0] };
    for &z in coherent_z {
        let s = build(&id, 1.0, real(z))?;
        let r = full_report(&s, &id, 1.0, real(z))?;
        out.extend([r.mandel_q.abs(), r.q1.abs(), r.q2.abs()]);
    }

    let sv = build(&id, 3.0, real(0.0))?;
    let quad = nonclassicality::quadrature_report(&sv)?;
    out.push(rel(quad.var_p, 1.0 / 6.0));
    out.push(rel(quad.var_x, 1.5));

    for z in [0.1, 0.3, 0.6] {
        let s = build(&harm, 1.0, real(z))?;
        out.push(rel(nonclassicality::mandel_q(&s)?, z * z / (1.0 - z * z)));
        let norm = states::coherent_normalization(&harm, z, s.dim())?;
        out.push(rel(norm, 1.0 / (1.0 - z * z)));
    }

    let hydrogen = NonlinearityFunction::hydrogen();
    for z in [0.2, 0.5] {
        let dim = 40;
        let general = build_with_dim(Method::General, &hydrogen, 1.0, real(z), dim)?;
        let coherent = build_with_dim(Method::NonlinearCoherent, &hydrogen, 1.0, real(z), dim)?;
        out.push(amplitude_discrepancy(general.amplitudes(), coherent.amplitudes()));
    }
    Ok(out)
}

fn check_reductions(quick: bool) -> CheckResult {
    let tally = match reduction_residuals(quick) {
        Ok(v) => Tally::from_results(v.into_iter().map(Some)),
        Err(_) => Tally { worst: f64::INFINITY, checked: 1, skipped: 0 },
    };
    tally.finish("closed-form-reductions", REDUCTION_TOLERANCE)
}

/// `|c_0|` of each built state against its normalization series.
pub fn normalization_residuals(grid: &[GridPoint]) -> Vec<Option<f64>> {
    grid.par_iter()
        .map(|p| {
            let s = build_point(p).ok()?;
            let c0 = s.amplitudes()[0].norm();
            let terms = s.dim();
            let series = match Case::resolve(p.lambda, p.z) {
                Case::I => states::coherent_normalization(&p.f, p.z.norm(), terms).ok()?.sqrt().recip(),
                Case::III => states::zero_z_c0(&p.f, p.lambda, terms / 2).ok()?,
                // the general series is only written for real z
                Case::IV if p.z.im == 0.0 => states::general_c0(&p.f, p.lambda, p.z.re, terms).ok()?,
                Case::IV => return None,
            };
            Some(rel(c0, series))
        })
        .collect()
}

fn check_normalization(grid: &[GridPoint]) -> CheckResult {
    Tally::from_results(normalization_residuals(grid)).finish("normalization-series", SERIES_TOLERANCE)
}

pub fn run(options: VerifyOptions) -> VerifyReport {
    let grid = construction_grid(options.quick);
    let checks = vec![
        check_oracle(&grid, options.quick),
        check_intelligence(&grid, options.inject_fault),
        check_ratio(&grid),
        check_parity(&grid),
        check_eigenresidual(&grid),
        check_s_function(),
        check_reductions(options.quick),
        check_normalization(&grid),
    ];
    VerifyReport { checks }
}
