//! f-deformed intelligent states: normalizable solutions of
//! `[(1 − λ)A† + (1 + λ)A] |z, λ⟩ = 2z |z, λ⟩`.
//!
//! Three families exist. `λ = 1, z ≠ 0` gives the nonlinear coherent
//! states; `z = 0` gives even-parity states built from a single ratio;
//! everything else uses the closed form with the nested sums `S(n, h)`.
//! `λ = −1` has no solution.
//!
//! All magnitudes are accumulated as logarithms and shifted by their maximum
//! before exponentiation, so factorial-sized intermediates never appear.
//! The three-term recursion in [`recursion_oracle`] is an independent
//! construction kept for verification.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::nonlinearity::{FTable, NonlinearityFunction};
use crate::numeric::{CompensatedSum, ComplexDD};

/// `|1 + λ|` below this is rejected as numerically singular.
pub const SINGULAR_LAMBDA_GAP: f64 = 1e-6;

/// Initial truncation dimension of the geometric growth schedule.
pub const INITIAL_DIM: usize = 32;

/// Block size used to extrapolate the probability beyond the truncation.
pub const TAIL_BLOCK: usize = 4;

/// Largest tolerated rounding error of any amplitude, relative to the peak.
pub const PRECISION_LIMIT: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Largest probability mass allowed beyond the truncation.
    pub epsilon_tail: f64,
    /// Hard cap on the truncation dimension.
    pub n_max: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { epsilon_tail: 1e-12, n_max: 512 }
    }
}

impl TruncationPolicy {
    pub fn new(epsilon_tail: f64, n_max: usize) -> Result<Self> {
        let p = Self { epsilon_tail, n_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_tail > 0.0 && self.epsilon_tail < 1.0) {
            return Err(Error::InvalidParam(format!(
                "epsilon_tail must lie in (0, 1), got {}",
                self.epsilon_tail
            )));
        }
        if self.n_max < 4 {
            return Err(Error::InvalidParam(format!("n_max must be >= 4, got {}", self.n_max)));
        }
        Ok(())
    }
}

/// Which family a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    /// `λ = 1, z ≠ 0`: nonlinear coherent states.
    I,
    /// `z = 0`: even-parity states.
    III,
    /// `λ ≠ ±1, z ≠ 0` (or any `λ ≠ −1` when forced): the general closed form.
    IV,
}

impl Case {
    pub fn resolve(lambda: f64, z: Complex64) -> Case {
        if z == ZERO {
            Case::III
        } else if lambda == 1.0 {
            Case::I
        } else {
            Case::IV
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Case::I => "i",
            Case::III => "iii",
            Case::IV => "iv",
        }
    }
}

/// A fully validated construction request.
#[derive(Debug, Clone)]
pub struct IntelligentStateRequest {
    pub f: NonlinearityFunction,
    pub lambda: f64,
    pub z: Complex64,
    pub truncation: TruncationPolicy,
    pub case_tag: Case,
}

impl IntelligentStateRequest {
    /// Validate the parameters and resolve the case automatically.
    pub fn new(f: NonlinearityFunction, lambda: f64, z: Complex64, truncation: TruncationPolicy) -> Result<Self> {
        Self::with_case(f, lambda, z, truncation, None)
    }

    /// As [`IntelligentStateRequest::new`], optionally forcing a construction path.
    pub fn with_case(
        f: NonlinearityFunction,
        lambda: f64,
        z: Complex64,
        truncation: TruncationPolicy,
        forced: Option<Case>,
    ) -> Result<Self> {
        truncation.validate()?;
        check_lambda(lambda, z)?;
        let case_tag = match forced {
            None => Case::resolve(lambda, z),
            Some(Case::I) if lambda != 1.0 || z == ZERO => {
                return Err(Error::CaseMismatch(format!("case i needs lambda = 1 and z != 0 (lambda = {lambda})")))
            }
            Some(Case::III) if z != ZERO => return Err(Error::CaseMismatch("case iii needs z = 0".into())),
            Some(Case::IV) if z == ZERO => return Err(Error::CaseMismatch("case iv needs z != 0".into())),
            Some(case) => case,
        };
        if case_tag == Case::I {
            check_disc(&f, z)?;
        }
        Ok(Self { f, lambda, z, truncation, case_tag })
    }
}

fn check_lambda(lambda: f64, z: Complex64) -> Result<()> {
    if !lambda.is_finite() || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidParam(format!("non-finite lambda = {lambda} or z = {z}")));
    }
    if lambda == -1.0 {
        return Err(Error::CaseTwoNoSolution);
    }
    let gap = (1.0 + lambda).abs();
    if gap < SINGULAR_LAMBDA_GAP {
        return Err(Error::NumericallySingular(gap));
    }
    Ok(())
}

fn check_disc(f: &NonlinearityFunction, z: Complex64) -> Result<()> {
    if let Some(radius) = f.convergence_radius() {
        let z_abs = z.norm();
        if z_abs >= radius {
            return Err(Error::OutsideConvergenceDisc { z_abs, radius });
        }
    }
    Ok(())
}

/// Construction route for the amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    NonlinearCoherent,
    ZeroZ,
    General,
    Recursion,
}

impl From<Case> for Method {
    fn from(case: Case) -> Self {
        match case {
            Case::I => Method::NonlinearCoherent,
            Case::III => Method::ZeroZ,
            Case::IV => Method::General,
        }
    }
}

/// Build the state a request describes.
pub fn build(request: &IntelligentStateRequest) -> Result<FockState> {
    grow(request.case_tag.into(), &request.f, request.lambda, request.z, &request.truncation)
}

/// Nonlinear coherent state, `c_n ∝ z^n / √([n f²(n)]!)`.
pub fn nonlinear_coherent(f: &NonlinearityFunction, z: Complex64, truncation: &TruncationPolicy) -> Result<FockState> {
    let request = IntelligentStateRequest::with_case(f.clone(), 1.0, z, *truncation, None)?;
    grow(Method::NonlinearCoherent, f, 1.0, request.z, truncation)
}

/// The `z = 0` family: odd amplitudes vanish and
/// `c_{2n}/c_{2n−2} = ((λ−1)/(λ+1)) √((2n−1)/(2n)) f(2n−1)/f(2n)`.
pub fn intelligent_zero_z(f: &NonlinearityFunction, lambda: f64, truncation: &TruncationPolicy) -> Result<FockState> {
    IntelligentStateRequest::with_case(f.clone(), lambda, ZERO, *truncation, Some(Case::III))?;
    grow(Method::ZeroZ, f, lambda, ZERO, truncation)
}

/// The general family from the closed form with `S(n, h)`.
pub fn intelligent_general(
    f: &NonlinearityFunction,
    lambda: f64,
    z: Complex64,
    truncation: &TruncationPolicy,
) -> Result<FockState> {
    IntelligentStateRequest::with_case(f.clone(), lambda, z, *truncation, Some(Case::IV))?;
    grow(Method::General, f, lambda, z, truncation)
}

/// Independent construction by running the eigenvalue equation as a
/// three-term recursion from `c_0 = 1, c_{−1} = 0`.
pub fn recursion_oracle(
    f: &NonlinearityFunction,
    lambda: f64,
    z: Complex64,
    truncation: &TruncationPolicy,
) -> Result<FockState> {
    truncation.validate()?;
    check_lambda(lambda, z)?;
    grow(Method::Recursion, f, lambda, z, truncation)
}

/// Amplitudes from `method` in a fixed basis of `dim` levels, normalized
/// over that basis. The tail certificate is the trailing-block estimate.
pub fn build_with_dim(
    method: Method,
    f: &NonlinearityFunction,
    lambda: f64,
    z: Complex64,
    dim: usize,
) -> Result<FockState> {
    check_lambda(lambda, z)?;
    if dim == 0 {
        return Err(Error::InvalidParam("dimension must be positive".into()));
    }
    let table = f.table(dim)?;
    let (amps, bound) = amplitudes(method, &table, lambda, z, dim);
    check_precision(bound)?;
    let tail = tail_estimate(&amps);
    FockState::from_unnormalized(amps, tail)
}

fn grow(method: Method, f: &NonlinearityFunction, lambda: f64, z: Complex64, policy: &TruncationPolicy) -> Result<FockState> {
    // A† must act on the top level, so f is needed up to dim.
    let cap = f.max_valid_n().map_or(policy.n_max, |m| m.min(policy.n_max));
    if cap < 2 {
        return Err(Error::TruncationNotConverged { dim: cap, tail: f64::INFINITY });
    }
    let table = f.table(cap)?;
    let mut dim = INITIAL_DIM.min(cap);
    loop {
        let (amps, bound) = amplitudes(method, &table, lambda, z, dim);
        let tail = tail_estimate(&amps);
        if tail <= policy.epsilon_tail {
            check_precision(bound)?;
            return FockState::from_unnormalized(amps, tail);
        }
        if dim == cap {
            if method == Method::ZeroZ {
                let ratio = parity_ratio(&amps);
                if ratio >= 1.0 {
                    return Err(Error::DivergentSeries { ratio });
                }
            }
            return Err(Error::TruncationNotConverged { dim, tail });
        }
        dim = (dim * 2).min(cap);
    }
}

fn check_precision(bound: f64) -> Result<()> {
    if bound > PRECISION_LIMIT {
        Err(Error::PrecisionLoss { bound })
    } else {
        Ok(())
    }
}

fn parity_ratio(amps: &[Complex64]) -> f64 {
    let top = (amps.len() - 1) & !1;
    if top < 2 || amps[top - 2] == ZERO {
        return f64::INFINITY;
    }
    (amps[top] / amps[top - 2]).norm()
}

/// Relative probability mass beyond the last level, extrapolated from the
/// ratio of the last two blocks as a geometric series.
fn tail_estimate(amps: &[Complex64]) -> f64 {
    let mass = |s: &[Complex64]| s.iter().map(|c| c.norm_sqr()).collect::<CompensatedSum>().value();
    let total = mass(amps);
    if !(total > 0.0 && total.is_finite()) {
        return f64::INFINITY;
    }
    let len = amps.len();
    let block = TAIL_BLOCK.min(len / 2);
    if block == 0 {
        return if len == 1 { 0.0 } else { f64::INFINITY };
    }
    let last = mass(&amps[len - block..]);
    if last == 0.0 {
        return 0.0;
    }
    let prev = mass(&amps[len - 2 * block..len - block]);
    let ratio = last / prev;
    if !(ratio < 1.0) {
        return f64::INFINITY;
    }
    last * ratio / (1.0 - ratio) / total
}

/// Amplitudes together with a bound on their absolute rounding error,
/// relative to the largest amplitude.
fn amplitudes(method: Method, t: &FTable, lambda: f64, z: Complex64, dim: usize) -> (Vec<Complex64>, f64) {
    match method {
        Method::NonlinearCoherent => (coherent_amplitudes(t, z, dim), 0.0),
        Method::ZeroZ => (zero_z_amplitudes(t, lambda, dim), 0.0),
        Method::General => general_amplitudes(t, lambda, z, dim),
        Method::Recursion => (recursion_amplitudes(t, lambda, z, dim), 0.0),
    }
}

/// A number carried as `exp(log_mag) · unit` with `|unit| = 1`.
#[derive(Debug, Clone, Copy)]
struct LogAmplitude {
    log_mag: f64,
    unit: Complex64,
}

const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl LogAmplitude {
    const ZERO: LogAmplitude = LogAmplitude { log_mag: f64::NEG_INFINITY, unit: ONE };
    const ONE: LogAmplitude = LogAmplitude { log_mag: 0.0, unit: ONE };
}

/// `x / |x|`, exact for real `x`.
fn unit_of(x: Complex64) -> Complex64 {
    if x.im == 0.0 {
        Complex64::new(x.re.signum(), 0.0)
    } else {
        x / x.norm()
    }
}

fn sign_unit(negative: bool) -> Complex64 {
    if negative {
        -ONE
    } else {
        ONE
    }
}

fn materialize(logs: &[LogAmplitude]) -> Vec<Complex64> {
    let shift = logs.iter().map(|a| a.log_mag).fold(f64::NEG_INFINITY, f64::max);
    logs.iter()
        .map(|a| {
            if a.log_mag == f64::NEG_INFINITY {
                ZERO
            } else {
                a.unit * (a.log_mag - shift).exp()
            }
        })
        .collect()
}

fn coherent_amplitudes(t: &FTable, z: Complex64, dim: usize) -> Vec<Complex64> {
    let mut out = vec![LogAmplitude::ZERO; dim];
    out[0] = LogAmplitude::ONE;
    if z == ZERO {
        return materialize(&out);
    }
    let (ln_z, z_unit) = (z.norm().ln(), unit_of(z));
    let mut log_mag = 0.0;
    let mut negative = false;
    for n in 1..dim {
        let f = t.f(n);
        log_mag += ln_z - 0.5 * (n as f64).ln() - f.abs().ln();
        negative ^= f < 0.0;
        out[n] = LogAmplitude { log_mag, unit: z_unit.powi(n as i32) * sign_unit(negative) };
    }
    materialize(&out)
}

fn zero_z_amplitudes(t: &FTable, lambda: f64, dim: usize) -> Vec<Complex64> {
    let rho = (lambda - 1.0) / (lambda + 1.0);
    let mut out = vec![LogAmplitude::ZERO; dim];
    out[0] = LogAmplitude::ONE;
    if rho == 0.0 {
        return materialize(&out);
    }
    let ln_rho = rho.abs().ln();
    let mut log_mag = 0.0;
    let mut negative = false;
    let mut n = 1;
    while 2 * n < dim {
        let (odd, even) = (2 * n - 1, 2 * n);
        let (f_odd, f_even) = (t.f(odd), t.f(even));
        log_mag += ln_rho + 0.5 * ((odd as f64).ln() - (even as f64).ln()) + f_odd.abs().ln() - f_even.abs().ln();
        negative ^= (rho < 0.0) ^ (f_odd < 0.0) ^ (f_even < 0.0);
        out[even] = LogAmplitude { log_mag, unit: sign_unit(negative) };
        n += 1;
    }
    materialize(&out)
}

/// Closed-form bracket `Σ_h (−w)^h S(n, h)` for `0 ≤ n < dim`.
///
/// The alternating sum cancels heavily (term magnitudes exceed the result
/// by up to ~1e15 at n = 64), so rows and sums are kept in double-double.
/// Row `n` is stored divided by `2^exp[n]`, which keeps rescaling exact.
struct Bracket {
    sums: Vec<Complex64>,
    exp: Vec<i32>,
    /// `Σ_h |(−w)^h S(n, h)|`, on the same scale as `sums`.
    abs_sums: Vec<f64>,
}

fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

impl Bracket {
    fn new(t: &FTable, minus_w: Complex64, dim: usize) -> Self {
        let w = ComplexDD::from_complex(minus_w);
        let mut out = Bracket { sums: Vec::with_capacity(dim), exp: Vec::with_capacity(dim), abs_sums: Vec::with_capacity(dim) };
        let mut older: Vec<ComplexDD> = Vec::new();
        let mut old: Vec<ComplexDD> = Vec::new();
        let (mut exp_older, mut exp_old) = (0, 0);
        for n in 0..dim {
            let mut row = vec![ComplexDD::ZERO; n / 2 + 1];
            let mut exp = exp_old;
            if n == 0 {
                row[0] = ComplexDD::ONE;
            } else {
                row[..old.len()].copy_from_slice(&old);
                if n >= 2 && minus_w != ZERO {
                    let a = w.mul_f64(t.nf2(n - 1)).scale(pow2(exp_older - exp_old));
                    for h in 1..=n / 2 {
                        row[h] = row[h].add(a.mul(older[h - 1]));
                    }
                }
                let max = row.iter().map(|v| v.max_abs()).fold(0.0, f64::max);
                if max > 0.0 {
                    let shift = max.log2().floor() as i32;
                    let factor = pow2(-shift);
                    for v in &mut row {
                        *v = v.scale(factor);
                    }
                    exp += shift;
                }
            }
            let sum = row.iter().fold(ComplexDD::ZERO, |acc, v| acc.add(*v));
            out.sums.push(sum.to_complex());
            out.abs_sums.push(row.iter().map(|v| v.to_complex().norm()).collect::<CompensatedSum>().value());
            out.exp.push(exp);
            older = std::mem::replace(&mut old, row);
            exp_older = exp_old;
            exp_old = exp;
        }
        out
    }
}

/// Unit roundoff of double-double arithmetic.
const DD_EPS: f64 = 1.0 / (1u128 << 104) as f64;

fn general_amplitudes(t: &FTable, lambda: f64, z: Complex64, dim: usize) -> (Vec<Complex64>, f64) {
    let ratio = 2.0 * z / (1.0 + lambda);
    let (ln_ratio, ratio_unit) = (ratio.norm().ln(), unit_of(ratio));
    let minus_w = -(1.0 - lambda * lambda) / (4.0 * z * z);
    let bracket = Bracket::new(t, minus_w, dim);

    let mut out = Vec::with_capacity(dim);
    let mut log_err = Vec::with_capacity(dim);
    let mut log_prefactor = 0.0;
    let mut negative = false;
    for n in 0..dim {
        if n > 0 {
            let f = t.f(n);
            log_prefactor += ln_ratio - 0.5 * (n as f64).ln() - f.abs().ln();
            negative ^= f < 0.0;
        }
        let log_scale = log_prefactor + bracket.exp[n] as f64 * LN_2;
        // rounding in the bracket is bounded by ~n ε Σ|terms|
        log_err.push(log_scale + (4.0 * (n + 1) as f64 * DD_EPS * bracket.abs_sums[n]).ln());
        let b = bracket.sums[n];
        if b == ZERO {
            out.push(LogAmplitude::ZERO);
            continue;
        }
        out.push(LogAmplitude {
            log_mag: log_scale + b.norm().ln(),
            unit: ratio_unit.powi(n as i32) * unit_of(b) * sign_unit(negative),
        });
    }
    let peak = out.iter().map(|a| a.log_mag).fold(f64::NEG_INFINITY, f64::max);
    let worst = log_err.iter().fold(f64::NEG_INFINITY, |m, e| m.max(*e));
    (materialize(&out), (worst - peak).exp())
}

fn recursion_amplitudes(t: &FTable, lambda: f64, z: Complex64, dim: usize) -> Vec<Complex64> {
    const RESCALE_ABOVE: f64 = 1e100;
    let mut c = Vec::with_capacity(dim);
    c.push(Complex64::new(1.0, 0.0));
    for n in 0..dim - 1 {
        let prev = if n == 0 { ZERO } else { c[n - 1] };
        let next = (2.0 * z * c[n] - (1.0 - lambda) * t.sqrt_n_f(n) * prev) / ((1.0 + lambda) * t.sqrt_n_f(n + 1));
        c.push(next);
        if next.norm() > RESCALE_ABOVE {
            for x in &mut c {
                *x /= RESCALE_ABOVE;
            }
        }
    }
    c
}

/// `S(n, h)`: the sum over chains `1 ≤ m_1, m_{i+1} ≥ m_i + 2, m_h ≤ n − 1`
/// of `Π m_i f²(m_i)`.
pub fn s_function(f: &NonlinearityFunction, n: usize, h: usize) -> Result<f64> {
    if h > n / 2 {
        return Err(Error::IndexOutOfRange { n, h });
    }
    Ok(s_table(f, n)?[n][h])
}

/// `S(m, h)` for all `m ≤ n`, `h ≤ m/2`, by
/// `S(m, h) = S(m − 1, h) + (m − 1) f²(m − 1) S(m − 2, h − 1)`.
pub fn s_table(f: &NonlinearityFunction, n: usize) -> Result<Vec<Vec<f64>>> {
    let t = f.table(n.saturating_sub(1))?;
    let mut table: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let mut row = vec![0.0; m / 2 + 1];
        row[0] = 1.0;
        for h in 1..=m / 2 {
            let keep = table[m - 1].get(h).copied().unwrap_or(0.0);
            row[h] = keep + t.nf2(m - 1) * table[m - 2][h - 1];
        }
        table.push(row);
    }
    Ok(table)
}

/// `‖(X + iλP)|ψ⟩ − √2 z|ψ⟩‖`, evaluated as
/// `‖[(1 − λ)A† + (1 + λ)A − 2z]|ψ⟩‖ / √2` over rows `0..N`.
/// The row at `N` is dropped since it depends on `c_{N+1}`.
pub fn residual_check(state: &FockState, f: &NonlinearityFunction, lambda: f64, z: Complex64) -> Result<f64> {
    let c = state.amplitudes();
    let top = state.max_n();
    let t = f.table(top)?;
    let mut acc = CompensatedSum::new();
    for n in 0..top {
        let down = if n == 0 { ZERO } else { (1.0 - lambda) * t.sqrt_n_f(n) * c[n - 1] };
        let up = (1.0 + lambda) * t.sqrt_n_f(n + 1) * c[n + 1];
        acc.add((down + up - 2.0 * z * c[n]).norm_sqr());
    }
    Ok((acc.value() / 2.0).sqrt())
}

/// `Σ_n |z|^{2n} / [n f²(n)]!` over `terms` terms: the nonlinear coherent
/// state normalization, `c_0 = N^{−1/2}`.
pub fn coherent_normalization(f: &NonlinearityFunction, z_abs: f64, terms: usize) -> Result<f64> {
    let t = f.table(terms.saturating_sub(1))?;
    let mut acc = CompensatedSum::new();
    let mut log_term: f64 = 0.0;
    acc.add(1.0);
    for n in 1..terms {
        log_term += 2.0 * z_abs.ln() - t.nf2(n).ln();
        acc.add(log_term.exp());
    }
    Ok(acc.value())
}

/// `c_0` of the `z = 0` family from its normalization series.
pub fn zero_z_c0(f: &NonlinearityFunction, lambda: f64, terms: usize) -> Result<f64> {
    check_lambda(lambda, ZERO)?;
    let t = f.table(2 * terms.saturating_sub(1))?;
    let rho = (lambda - 1.0) / (lambda + 1.0);
    let mut acc = CompensatedSum::new();
    acc.add(1.0);
    // ratio of double factorials and of the f skip-products, both squared
    let mut dfact = 1.0;
    let mut fskip = 1.0;
    let mut rho_pow = 1.0;
    for n in 1..terms {
        let (odd, even) = (2 * n - 1, 2 * n);
        dfact *= odd as f64 / even as f64;
        fskip *= t.f(odd) / t.f(even);
        rho_pow *= rho * rho;
        acc.add(rho_pow * dfact * fskip * fskip);
    }
    Ok(acc.value().sqrt().recip())
}

/// `c_0` of the general family from its normalization series, real `z` only.
pub fn general_c0(f: &NonlinearityFunction, lambda: f64, z: f64, terms: usize) -> Result<f64> {
    check_lambda(lambda, Complex64::new(z, 0.0))?;
    if z == 0.0 {
        return Err(Error::CaseMismatch("general normalization needs z != 0".into()));
    }
    let s = s_table(f, terms.saturating_sub(1))?;
    let t = f.table(terms.saturating_sub(1))?;
    let ratio2 = (2.0 * z / (lambda + 1.0)).powi(2);
    let w = (1.0 - lambda * lambda) / (4.0 * z * z);
    let mut acc = CompensatedSum::new();
    let mut log_prefactor: f64 = 0.0;
    for n in 0..terms {
        if n > 0 {
            log_prefactor += ratio2.ln() - t.nf2(n).ln();
        }
        let mut bracket = 1.0;
        let mut wh = 1.0;
        for h in 1..=n / 2 {
            wh *= -w;
            bracket += wh * s[n][h];
        }
        acc.add(log_prefactor.exp() * bracket * bracket);
    }
    Ok(acc.value().sqrt().recip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cz(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn policy() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    /// Direct enumeration of the nested sum.
    fn s_brute(f: &NonlinearityFunction, n: usize, h: usize) -> f64 {
        fn rec(f: &NonlinearityFunction, start: usize, n: usize, left: usize) -> f64 {
            if left == 0 {
                return 1.0;
            }
            let mut sum = 0.0;
            let mut m = start;
            while m + 2 * (left - 1) < n {
                let v = f.eval(m).unwrap();
                sum += m as f64 * v * v * rec(f, m + 2, n, left - 1);
                m += 1;
            }
            sum
        }
        if h == 0 {
            return 1.0;
        }
        rec(f, 1, n, h)
    }

    #[test]
    fn request_case_resolution() {
        let f = NonlinearityFunction::hydrogen();
        let p = policy();
        let r = |l: f64, z: f64| IntelligentStateRequest::new(f.clone(), l, cz(z), p).map(|r| r.case_tag);
        assert_eq!(r(1.0, 0.5).unwrap(), Case::I);
        assert_eq!(r(1.0, 0.0).unwrap(), Case::III);
        assert_eq!(r(3.0, 0.0).unwrap(), Case::III);
        assert_eq!(r(0.5, 0.5).unwrap(), Case::IV);
        assert_eq!(r(-1.0, 0.3), Err(Error::CaseTwoNoSolution));
        assert!(matches!(r(-1.0 + 1e-8, 0.3), Err(Error::NumericallySingular(_))));
        assert!(matches!(
            IntelligentStateRequest::new(NonlinearityFunction::harmonious(), 1.0, cz(1.2), p),
            Err(Error::OutsideConvergenceDisc { .. })
        ));
        assert!(matches!(
            IntelligentStateRequest::with_case(f.clone(), 0.5, cz(0.5), p, Some(Case::I)),
            Err(Error::CaseMismatch(_))
        ));
        assert_eq!(
            IntelligentStateRequest::with_case(f, 1.0, cz(0.5), p, Some(Case::IV)).unwrap().case_tag,
            Case::IV
        );
    }

    #[test]
    fn truncation_policy_validation() {
        assert!(TruncationPolicy::new(1e-12, 512).is_ok());
        assert!(TruncationPolicy::new(1.0, 512).is_err());
        assert!(TruncationPolicy::new(0.0, 512).is_err());
        assert!(TruncationPolicy::new(1e-12, 3).is_err());
    }

    #[test]
    fn coherent_state_from_identity() {
        let z = 0.5;
        let s = nonlinear_coherent(&NonlinearityFunction::identity(), cz(z), &policy()).unwrap();
        let mut expected = (-z * z / 2.0f64).exp();
        for (n, c) in s.amplitudes().iter().enumerate() {
            if n > 0 {
                expected *= z / (n as f64).sqrt();
            }
            assert_relative_eq!(c.re, expected, max_relative = 1e-12);
            assert_eq!(c.im, 0.0);
        }
        assert!(s.tail_mass() <= 1e-12);
    }

    #[test]
    fn coherent_vacuum_at_zero() {
        let s = build_with_dim(Method::NonlinearCoherent, &NonlinearityFunction::identity(), 1.0, ZERO, 10).unwrap();
        assert_eq!(s, FockState::vacuum(10));
    }

    #[test]
    fn harmonious_coherent_is_geometric() {
        let s = nonlinear_coherent(&NonlinearityFunction::harmonious(), cz(0.5), &policy()).unwrap();
        for (n, p) in s.probabilities().iter().enumerate() {
            let expected = 0.75 * 0.25f64.powi(n as i32);
            assert_relative_eq!(*p, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn hydrogen_coherent_distribution() {
        let s = nonlinear_coherent(&NonlinearityFunction::hydrogen(), cz(0.5), &policy()).unwrap();
        let weights: Vec<f64> = (0..s.dim())
            .map(|n| 0.25f64.powi(n as i32) * 2.0 * (n as f64 + 1.0) / (n as f64 + 2.0))
            .collect();
        let norm: f64 = weights.iter().sum();
        for (p, w) in s.probabilities().iter().zip(&weights) {
            assert_relative_eq!(*p, w / norm, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_z_examples() {
        for f in [NonlinearityFunction::identity(), NonlinearityFunction::hydrogen()] {
            let s = intelligent_zero_z(&f, 1.0, &policy()).unwrap();
            assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
            assert!(s.amplitudes()[1..].iter().all(|c| *c == ZERO));
        }

        // squeezed vacuum with tanh r = 1/2
        let s = intelligent_zero_z(&NonlinearityFunction::identity(), 3.0, &policy()).unwrap();
        let tanh_r: f64 = 0.5;
        let cosh_r = 1.0 / (1.0 - tanh_r * tanh_r).sqrt();
        let mut expected = 1.0 / cosh_r.sqrt();
        for n in 0..s.dim() / 2 {
            if n > 0 {
                // (2n)!/(2^n n!)² accumulated as a ratio
                expected *= tanh_r * ((2 * n - 1) as f64 / (2 * n) as f64).sqrt();
            }
            assert_relative_eq!(s.amplitudes()[2 * n].re, expected, max_relative = 1e-12);
            assert_eq!(s.amplitudes()[2 * n + 1], ZERO);
        }

        let s = intelligent_zero_z(&NonlinearityFunction::harmonious(), 2.0, &policy()).unwrap();
        let c = s.amplitudes();
        assert_relative_eq!((c[2] / c[0]).re, 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_z_divergence_is_reported() {
        let err = intelligent_zero_z(&NonlinearityFunction::harmonious(), -0.5, &policy()).unwrap_err();
        assert!(matches!(err, Error::DivergentSeries { .. }), "{err:?}");
        let err = intelligent_zero_z(&NonlinearityFunction::identity(), 0.0, &policy()).unwrap_err();
        assert!(matches!(err, Error::TruncationNotConverged { .. } | Error::DivergentSeries { .. }));
    }

    #[test]
    fn s_function_examples() {
        let id = NonlinearityFunction::identity();
        let h = NonlinearityFunction::harmonious();
        assert_eq!(s_function(&id, 7, 0).unwrap(), 1.0);
        assert_eq!(s_function(&id, 3, 1).unwrap(), 3.0);
        assert_eq!(s_function(&id, 4, 2).unwrap(), 3.0);
        assert_relative_eq!(s_function(&h, 4, 1).unwrap(), 3.0, max_relative = 1e-15);
        assert_eq!(s_function(&id, 4, 3), Err(Error::IndexOutOfRange { n: 4, h: 3 }));
    }

    #[test]
    fn s_function_matches_enumeration() {
        let id = NonlinearityFunction::identity();
        let h = NonlinearityFunction::harmonious();
        let hy = NonlinearityFunction::hydrogen();
        for n in 0..=14 {
            for k in 0..=n / 2 {
                assert_eq!(s_function(&id, n, k).unwrap(), s_brute(&id, n, k));
                assert_relative_eq!(s_function(&h, n, k).unwrap(), s_brute(&h, n, k), max_relative = 1e-12);
                assert_relative_eq!(s_function(&hy, n, k).unwrap(), s_brute(&hy, n, k), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn tail_estimate_is_exact_for_geometric_mass() {
        let q: f64 = 0.6;
        let dim = 40;
        let amps: Vec<Complex64> = (0..dim).map(|n| cz(q.powi(n).sqrt())).collect();
        let total: f64 = (0..dim).map(|n| q.powi(n)).sum();
        let beyond = q.powi(dim) / (1.0 - q);
        assert_relative_eq!(tail_estimate(&amps), beyond / total, max_relative = 1e-10);
        let flat = vec![cz(1.0); 64];
        assert_eq!(tail_estimate(&flat), f64::INFINITY);
    }

    #[test]
    fn bracket_matches_linear_table_without_cancellation() {
        let hy = NonlinearityFunction::hydrogen();
        let t = hy.table(60).unwrap();
        // −w > 0 makes every term positive
        let bracket = Bracket::new(&t, Complex64::new(0.7, 0.0), 60);
        let lin = s_table(&hy, 59).unwrap();
        for n in 0..60 {
            let direct: f64 = (0..=n / 2).map(|h| 0.7f64.powi(h as i32) * lin[n][h]).sum();
            let got = bracket.sums[n].re * pow2(bracket.exp[n]);
            assert_relative_eq!(got, direct, max_relative = 1e-12);
            assert_relative_eq!(bracket.abs_sums[n] * pow2(bracket.exp[n]), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn general_survives_heavy_cancellation() {
        // exact rational evaluation gives c_62 / c_0 = -7.6861943771871653e-16
        // (normalized) for harmonious f, λ = 0.5, z = 0.5 at N = 64
        let h = NonlinearityFunction::harmonious();
        let s = build_with_dim(Method::General, &h, 0.5, cz(0.5), 64).unwrap();
        assert_relative_eq!(s.amplitudes()[62].re, -7.686_194_377_187_165e-16, max_relative = 1e-12);
    }

    #[test]
    fn general_hand_value_at_n2() {
        let s = build_with_dim(Method::General, &NonlinearityFunction::identity(), 2.0, cz(0.5), 20).unwrap();
        let c = s.amplitudes();
        assert_relative_eq!((c[2] / c[0]).re, 4.0 / (9.0 * 2f64.sqrt()), max_relative = 1e-13);
    }

    #[test]
    fn general_reduces_to_coherent_at_lambda_one() {
        let f = NonlinearityFunction::identity();
        let a = build_with_dim(Method::General, &f, 1.0, cz(0.5), 30).unwrap();
        let b = build_with_dim(Method::NonlinearCoherent, &f, 1.0, cz(0.5), 30).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() <= 1e-12 * y.norm() + 1e-300);
        }
        let r = build_with_dim(Method::Recursion, &f, 1.0, cz(0.5), 30).unwrap();
        for (x, y) in r.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() <= 1e-12 * y.norm() + 1e-300);
        }
    }

    #[test]
    fn recursion_oracle_parity_at_zero_z() {
        for f in [NonlinearityFunction::identity(), NonlinearityFunction::hydrogen()] {
            let s = recursion_oracle(&f, 2.5, ZERO, &policy()).unwrap();
            for (n, c) in s.amplitudes().iter().enumerate() {
                if n % 2 == 1 {
                    assert_eq!(*c, ZERO);
                }
            }
        }
    }

    #[test]
    fn closed_forms_agree_with_recursion() {
        let cases = [
            (NonlinearityFunction::harmonious(), 2.0, cz(0.5)),
            (NonlinearityFunction::hydrogen(), 0.5, cz(0.4)),
            (NonlinearityFunction::identity(), 1.5, Complex64::new(0.3, -0.2)),
            (NonlinearityFunction::hydrogen(), 3.0, ZERO),
        ];
        for (f, lambda, z) in &cases {
            let method = if *z == ZERO { Method::ZeroZ } else { Method::General };
            let a = build_with_dim(method, f, *lambda, *z, 40).unwrap();
            let b = build_with_dim(Method::Recursion, f, *lambda, *z, 40).unwrap();
            for (n, (x, y)) in a.amplitudes().iter().zip(b.amplitudes()).enumerate() {
                if y.norm() > 1e-20 {
                    assert!((x - y).norm() <= 1e-10 * y.norm(), "{f} n={n}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn residual_examples() {
        let id = NonlinearityFunction::identity();
        let coh = nonlinear_coherent(&id, cz(0.5), &policy()).unwrap();
        assert!(residual_check(&coh, &id, 1.0, cz(0.5)).unwrap() < 1e-10);
        let h = NonlinearityFunction::harmonious();
        let r = residual_check(&FockState::vacuum(20), &h, 2.0, cz(0.5)).unwrap();
        assert!(r > 0.1, "residual {r}");
        let s = build(&IntelligentStateRequest::new(h.clone(), 2.0, cz(0.5), policy()).unwrap()).unwrap();
        assert!(residual_check(&s, &h, 2.0, cz(0.5)).unwrap() < 1e-8);
    }

    #[test]
    fn normalization_series_identities() {
        let h = NonlinearityFunction::harmonious();
        for z in [0.1, 0.3, 0.6] {
            let n = coherent_normalization(&h, z, 400).unwrap();
            assert_relative_eq!(n, 1.0 / (1.0 - z * z), max_relative = 1e-12);
            let s = nonlinear_coherent(&h, cz(z), &policy()).unwrap();
            assert_relative_eq!(s.amplitudes()[0].re, n.sqrt().recip(), max_relative = 1e-9);
        }

        let hy = NonlinearityFunction::hydrogen();
        let s = intelligent_zero_z(&hy, 2.0, &policy()).unwrap();
        assert_relative_eq!(s.amplitudes()[0].re, zero_z_c0(&hy, 2.0, 200).unwrap(), max_relative = 1e-9);

        for (f, lambda, z) in [(hy.clone(), 0.5, 0.4), (NonlinearityFunction::identity(), 2.0, 0.5)] {
            let s = intelligent_general(&f, lambda, cz(z), &policy()).unwrap();
            let c0 = general_c0(&f, lambda, z, 120).unwrap();
            assert_relative_eq!(s.amplitudes()[0].norm(), c0, max_relative = 1e-9);
        }
    }

    #[test]
    fn trapped_ion_respects_validity_cap() {
        let f = NonlinearityFunction::trapped_ion(0.2).unwrap();
        let s = nonlinear_coherent(&f, cz(1.0), &policy()).unwrap();
        assert!(s.dim() <= f.max_valid_n().unwrap());
    }

    #[test]
    fn truncation_failure_is_reported() {
        let tight = TruncationPolicy::new(1e-12, 16).unwrap();
        let err = nonlinear_coherent(&NonlinearityFunction::harmonious(), cz(0.95), &tight).unwrap_err();
        assert!(matches!(err, Error::TruncationNotConverged { .. }));
    }
}
