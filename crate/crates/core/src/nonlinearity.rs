//! Nonlinearity functions `f(n)` that deform the bosonic ladder operators,
//! `A = a f(n)`, `A† = f(n) a†`.
//!
//! The catalog holds the undeformed oscillator, the trapped-ion
//! center-of-mass function built from associated Laguerre polynomials, the
//! harmonious states, the hydrogen-like spectrum and the Penson–Solomon
//! family. Further functions can be derived from a discrete spectrum
//! (`e_n = n f²(n)`), from coherent-state expansion coefficients, or as the
//! dual `1/f`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Trapped-ion validity scan stops here if no Laguerre sign change is found.
pub const TRAPPED_ION_SCAN_LIMIT: usize = 1 << 16;

/// Keeps `n f²(n)` finite for Penson–Solomon with `q < 1`.
const PENSON_SOLOMON_LOG_BUDGET: f64 = 300.0;

/// Associated Laguerre polynomial `L_n^k(x)` by upward recurrence.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let k = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + k - x;
    for m in 1..n {
        let m = m as f64;
        let next = ((2.0 * m + 1.0 + k - x) * cur - (m + k) * prev) / (m + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `L_0^k(x), …, L_n^k(x)` in one pass of the same recurrence.
pub fn laguerre_sequence(n: usize, k: usize, x: f64) -> Vec<f64> {
    let kf = k as f64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push(1.0 + kf - x);
    for m in 1..n {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0 + kf - x) * out[m] - (mf + kf) * out[m - 1]) / (mf + 1.0);
        out.push(next);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Identity,
    TrappedIon { x: f64 },
    Harmonious,
    Hydrogen,
    PensonSolomon { q: f64 },
    Dual(Box<NonlinearityFunction>),
    /// `values[n - 1] = f(n)`.
    Tabulated(Arc<[f64]>),
}

/// A real nonlinearity function with its validity range and the radius of
/// the disc on which its nonlinear coherent states are normalizable.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityFunction {
    name: String,
    params: BTreeMap<String, f64>,
    kind: Kind,
    max_valid_n: Option<usize>,
    convergence_radius: Option<f64>,
}

impl fmt::Display for NonlinearityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

impl NonlinearityFunction {
    fn catalog(name: &str, kind: Kind, max_valid_n: Option<usize>, radius: Option<f64>) -> Self {
        Self {
            name: name.to_string(),
            params: BTreeMap::new(),
            kind,
            max_valid_n,
            convergence_radius: radius,
        }
    }

    fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// `f ≡ 1`, the undeformed oscillator.
    pub fn identity() -> Self {
        Self::catalog("identity", Kind::Identity, None, None)
    }

    /// `f(n) = L_n^1(η²) / ((n + 1) L_n^0(η²))`.
    ///
    /// The valid range ends one below the first `n` at which either Laguerre
    /// factor stops being positive.
    pub fn trapped_ion(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "Lamb-Dicke parameter eta must be finite and >= 0, got {eta}"
            )));
        }
        let x = eta * eta;
        let max_valid_n = trapped_ion_valid_range(x);
        Ok(Self::catalog("trapped-ion", Kind::TrappedIon { x }, max_valid_n, None).with_param("eta", eta))
    }

    /// `f(n) = 1/√n`; normalizable only inside the unit disc.
    pub fn harmonious() -> Self {
        Self::catalog("harmonious", Kind::Harmonious, None, Some(1.0))
    }

    /// `f(n) = √(n + 2)/(n + 1)` from `e_n = 1 − 1/(n + 1)²`.
    pub fn hydrogen() -> Self {
        Self::catalog("hydrogen", Kind::Hydrogen, None, Some(1.0))
    }

    /// `f(n) = q^(1 − n)` with `0 < q ≤ 1`.
    pub fn penson_solomon(q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "Penson-Solomon q must lie in (0, 1], got {q}"
            )));
        }
        let max_valid_n = if q == 1.0 {
            None
        } else {
            Some(1 + (PENSON_SOLOMON_LOG_BUDGET / -q.ln()).floor() as usize)
        };
        Ok(Self::catalog("penson-solomon", Kind::PensonSolomon { q }, max_valid_n, None).with_param("q", q))
    }

    /// `f(n) = √(e_n / n)` from a spectrum `e_1, e_2, …`.
    pub fn from_spectrum(source: &str, spectrum: &[f64]) -> Result<Self> {
        if spectrum.is_empty() {
            return Err(Error::InvalidParam("spectrum is empty".into()));
        }
        let values = spectrum
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let n = i + 1;
                if e > 0.0 && e.is_finite() {
                    Ok((e / n as f64).sqrt())
                } else {
                    Err(Error::NonPositiveSpectrum { index: n, value: e })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::tabulated(format!("spectrum:{source}"), values))
    }

    /// `f(n) = C_{n−1} / (√n C_n)` from expansion coefficients `C_0, C_1, …`.
    pub fn from_coefficients(coefficients: &[f64]) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::InvalidParam("need at least C_0 and C_1".into()));
        }
        if let Some(index) = coefficients.iter().position(|&c| c == 0.0) {
            return Err(Error::ZeroCoefficient { index });
        }
        let values = coefficients
            .windows(2)
            .enumerate()
            .map(|(i, w)| w[0] / ((i + 1) as f64).sqrt() / w[1])
            .collect();
        Ok(Self::tabulated("coefficients".into(), values))
    }

    fn tabulated(name: String, values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            name,
            params: BTreeMap::new(),
            kind: Kind::Tabulated(values.into()),
            max_valid_n: Some(n),
            convergence_radius: None,
        }
    }

    /// The dual function `1/f`. Taking the dual twice returns the original.
    pub fn dual(&self) -> Self {
        if let Kind::Dual(base) = &self.kind {
            return (**base).clone();
        }
        let radius = match self.kind {
            Kind::PensonSolomon { q } if q < 1.0 => Some(0.0),
            _ => None,
        };
        Self {
            name: format!("dual:{}", self.name),
            params: self.params.clone(),
            kind: Kind::Dual(Box::new(self.clone())),
            max_valid_n: self.max_valid_n,
            convergence_radius: radius,
        }
    }

    /// Resolve a command-line style name such as `hydrogen`,
    /// `dual:harmonious` or `spectrum:levels.txt`.
    pub fn parse(name: &str, eta: Option<f64>, q: Option<f64>) -> Result<Self> {
        if let Some(base) = name.strip_prefix("dual:") {
            return Ok(Self::parse(base, eta, q)?.dual());
        }
        if let Some(path) = name.strip_prefix("spectrum:") {
            let spectrum = read_spectrum(path)?;
            return Self::from_spectrum(path, &spectrum);
        }
        match name {
            "identity" => Ok(Self::identity()),
            "harmonious" => Ok(Self::harmonious()),
            "hydrogen" => Ok(Self::hydrogen()),
            "trapped-ion" => Self::trapped_ion(
                eta.ok_or_else(|| Error::InvalidParam("trapped-ion requires eta".into()))?,
            ),
            "penson-solomon" => Self::penson_solomon(
                q.ok_or_else(|| Error::InvalidParam("penson-solomon requires q".into()))?,
            ),
            other => Err(Error::UnknownNonlinearity(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Largest `n` with `f(n)` finite, nonzero and sign-stable; `None` when unbounded.
    pub fn max_valid_n(&self) -> Option<usize> {
        self.max_valid_n
    }

    /// Radius in `|z|` of the nonlinear coherent state normalization disc; `None` when unbounded.
    pub fn convergence_radius(&self) -> Option<f64> {
        self.convergence_radius
    }

    pub fn is_valid(&self, n: usize) -> bool {
        self.max_valid_n.is_none_or(|max| n <= max)
    }

    fn check_range(&self, n: usize) -> Result<()> {
        match self.max_valid_n {
            Some(max) if n > max => Err(Error::OutOfValidRange { n, max }),
            _ => Ok(()),
        }
    }

    /// `f(n)` for `1 ≤ n ≤ max_valid_n`.
    pub fn eval(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParam("f(n) is defined for n >= 1".into()));
        }
        self.check_range(n)?;
        Ok(self.eval_unchecked(n))
    }

    fn eval_unchecked(&self, n: usize) -> f64 {
        let nf = n as f64;
        match &self.kind {
            Kind::Identity => 1.0,
            Kind::TrappedIon { x } => laguerre(n, 1, *x) / ((nf + 1.0) * laguerre(n, 0, *x)),
            Kind::Harmonious => 1.0 / nf.sqrt(),
            Kind::Hydrogen => (nf + 2.0).sqrt() / (nf + 1.0),
            Kind::PensonSolomon { q } => q.powf(1.0 - nf),
            Kind::Dual(base) => 1.0 / base.eval_unchecked(n),
            Kind::Tabulated(values) => values[n - 1],
        }
    }

    /// Tabulate `f(1), …, f(upto)`.
    pub fn table(&self, upto: usize) -> Result<FTable> {
        self.check_range(upto)?;
        let mut values = Vec::with_capacity(upto + 1);
        values.push(f64::NAN);
        match &self.kind {
            Kind::TrappedIon { x } => {
                let l0 = laguerre_sequence(upto, 0, *x);
                let l1 = laguerre_sequence(upto, 1, *x);
                values.extend((1..=upto).map(|n| l1[n] / ((n as f64 + 1.0) * l0[n])));
            }
            Kind::Dual(base) => {
                let inner = base.table(upto)?;
                values.extend((1..=upto).map(|n| 1.0 / inner.f(n)));
            }
            _ => values.extend((1..=upto).map(|n| self.eval_unchecked(n))),
        }
        Ok(FTable { values })
    }

    /// `ln |[f(n)]!| = Σ_{k=1..n} ln |f(k)|`; zero for `n = 0`.
    pub fn log_f_factorial(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        let table = self.table(n)?;
        Ok((1..=n).map(|k| table.f(k).abs().ln()).collect::<CompensatedSum>().value())
    }

    /// `ln [n f²(n)]! = ln n! + 2 ln [f(n)]!`.
    pub fn log_nf2_factorial(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Ok(0.0);
        }
        let table = self.table(n)?;
        Ok((1..=n).map(|k| table.nf2(k).ln()).collect::<CompensatedSum>().value())
    }
}

fn trapped_ion_valid_range(x: f64) -> Option<usize> {
    if x == 0.0 {
        return None;
    }
    let (mut l0_prev, mut l0) = (1.0, 1.0 - x);
    let (mut l1_prev, mut l1) = (1.0, 2.0 - x);
    for n in 1..=TRAPPED_ION_SCAN_LIMIT {
        if !(l0 > 0.0 && l1 > 0.0) {
            return Some(n - 1);
        }
        let m = n as f64;
        let l0_next = ((2.0 * m + 1.0 - x) * l0 - m * l0_prev) / (m + 1.0);
        let l1_next = ((2.0 * m + 2.0 - x) * l1 - (m + 1.0) * l1_prev) / (m + 1.0);
        l0_prev = l0;
        l0 = l0_next;
        l1_prev = l1;
        l1 = l1_next;
    }
    Some(TRAPPED_ION_SCAN_LIMIT)
}

/// Precomputed `f(1..=upto)`; index 0 is never read.
#[derive(Debug, Clone)]
pub struct FTable {
    values: Vec<f64>,
}

impl FTable {
    #[inline]
    pub fn f(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        self.values[n]
    }

    /// `n f²(n)`, zero at `n = 0`.
    #[inline]
    pub fn nf2(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            let f = self.values[n];
            n as f64 * f * f
        }
    }

    /// `√n f(n)`, zero at `n = 0`.
    #[inline]
    pub fn sqrt_n_f(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            (n as f64).sqrt() * self.values[n]
        }
    }

    pub fn upto(&self) -> usize {
        self.values.len() - 1
    }
}

/// Parse a spectrum listing: one positive decimal per line, line `n` holding `e_n`.
pub fn parse_spectrum(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                return Err(Error::SpectrumParse { line: line_no, message: "blank line".into() });
            }
            let value: f64 = trimmed.parse().map_err(|_| Error::SpectrumParse {
                line: line_no,
                message: format!("`{trimmed}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::SpectrumParse {
                    line: line_no,
                    message: format!("`{trimmed}` is not finite"),
                });
            }
            if value <= 0.0 {
                return Err(Error::NonPositiveSpectrum { index: line_no, value });
            }
            Ok(value)
        })
        .collect()
}

pub fn read_spectrum(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_spectrum(&std::fs::read_to_string(path)?)
}
