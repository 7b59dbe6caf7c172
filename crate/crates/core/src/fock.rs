//! Truncated Fock-space states and their moments under both the bosonic
//! ladder operators `a, a†` and the deformed pair `A = a f(n), A† = f(n) a†`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{FTable, NonlinearityFunction};
use crate::numeric::{CompensatedSum, ComplexSum, DoubleDouble};

/// Normalization tolerance on `Σ |c_n|²`.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Variances down to this value are treated as rounding and clamped to zero.
pub const VARIANCE_FLOOR: f64 = -1e-10;

/// A pure state `Σ_{n=0}^{N} c_n |n⟩` with a certificate for the
/// probability mass left out beyond `n = N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    amplitudes: Vec<Complex64>,
    tail_mass: f64,
}

impl FockState {
    /// Normalize `amplitudes` and wrap them.
    pub fn from_unnormalized(mut amplitudes: Vec<Complex64>, tail_mass: f64) -> Result<Self> {
        let norm2 = norm_sqr(&amplitudes);
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return Err(Error::NotNormalized(norm2));
        }
        let scale = norm2.sqrt().recip();
        for c in &mut amplitudes {
            *c *= scale;
        }
        Ok(Self { amplitudes, tail_mass })
    }

    /// Wrap amplitudes that must already be normalized.
    pub fn from_normalized(amplitudes: Vec<Complex64>, tail_mass: f64) -> Result<Self> {
        let norm2 = norm_sqr(&amplitudes);
        if (norm2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm2));
        }
        Ok(Self { amplitudes, tail_mass })
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::number(0, dim)
    }

    /// The number state `|n⟩` in a basis of `dim` levels.
    pub fn number(n: usize, dim: usize) -> Self {
        assert!(n < dim, "|{n}> does not fit in dimension {dim}");
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[n] = Complex64::new(1.0, 0.0);
        Self { amplitudes, tail_mass: 0.0 }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Number of basis levels, `N + 1`.
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Highest occupied basis index `N`.
    pub fn max_n(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    /// Serializable snapshot tagged with the parameters that produced it.
    pub fn to_dump(&self, name: &str, lambda: f64, z: Complex64) -> StateDump {
        StateDump {
            name: name.to_string(),
            lambda,
            z: [z.re, z.im],
            n: self.max_n(),
            tail_mass: self.tail_mass,
            amplitudes: self.amplitudes.iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_dump(dump: &StateDump) -> Result<Self> {
        if dump.amplitudes.len() != dump.n + 1 {
            return Err(Error::InvalidParam(format!(
                "dump lists {} amplitudes but N = {}",
                dump.amplitudes.len(),
                dump.n
            )));
        }
        let amplitudes = dump.amplitudes.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        Self::from_normalized(amplitudes, dump.tail_mass)
    }
}

fn norm_sqr(amplitudes: &[Complex64]) -> f64 {
    amplitudes.iter().map(|c| c.norm_sqr()).collect::<CompensatedSum>().value()
}

/// JSON state dump shared with the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub name: String,
    pub lambda: f64,
    pub z: [f64; 2],
    #[serde(rename = "N")]
    pub n: usize,
    pub tail_mass: f64,
    pub amplitudes: Vec<[f64; 2]>,
}

/// `⟨a⟩, ⟨a²⟩, ⟨n⟩, ⟨n²⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderMoments {
    pub mean_a: Complex64,
    pub mean_a2: Complex64,
    pub mean_n: f64,
    pub mean_n2: f64,
}

/// `⟨A⟩, ⟨A²⟩, ⟨A†A⟩, ⟨AA†⟩` and `⟨[X, P]⟩/i = ⟨AA†⟩ − ⟨A†A⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformedMoments {
    pub mean_lower: Complex64,
    pub mean_lower2: Complex64,
    pub mean_raise_lower: f64,
    pub mean_lower_raise: f64,
    pub mean_comm_xp: f64,
}

/// Both moment families for one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub ladder: LadderMoments,
    pub deformed: DeformedMoments,
}

/// `Σ_n w(n) conj(c_n) c_{n+shift}`.
fn shifted_sum(c: &[Complex64], shift: usize, weight: impl Fn(usize) -> f64) -> Complex64 {
    let mut acc = ComplexSum::new();
    for n in 0..c.len().saturating_sub(shift) {
        acc.add(c[n].conj() * c[n + shift] * weight(n));
    }
    acc.value()
}

fn diagonal_sum(c: &[Complex64], weight: impl Fn(usize) -> f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(n, cn)| cn.norm_sqr() * weight(n))
        .collect::<CompensatedSum>()
        .value()
}

fn diagonal_sum_dd(c: &[Complex64], weight: impl Fn(usize) -> f64) -> DoubleDouble {
    c.iter()
        .enumerate()
        .fold(DoubleDouble::ZERO, |acc, (n, cn)| acc.add(DoubleDouble::from_f64(cn.norm_sqr()).mul_f64(weight(n))))
}

pub fn ladder_moments(state: &FockState) -> LadderMoments {
    let c = state.amplitudes();
    LadderMoments {
        mean_a: shifted_sum(c, 1, |n| ((n + 1) as f64).sqrt()),
        mean_a2: shifted_sum(c, 2, |n| (((n + 1) * (n + 2)) as f64).sqrt()),
        mean_n: diagonal_sum(c, |n| n as f64),
        mean_n2: diagonal_sum(c, |n| (n * n) as f64),
    }
}

/// Table of `f` large enough to let `A†` act on the top level of `state`.
fn table_for(state: &FockState, f: &NonlinearityFunction) -> Result<FTable> {
    f.table(state.dim())
}

pub fn deformed_moments(state: &FockState, f: &NonlinearityFunction) -> Result<DeformedMoments> {
    let table = table_for(state, f)?;
    Ok(deformed_moments_with(state, &table))
}

pub(crate) fn deformed_moments_with(state: &FockState, t: &FTable) -> DeformedMoments {
    let c = state.amplitudes();
    let raise_lower = |n| n as f64 * f_or_one(t, n) * f_or_one(t, n);
    let lower_raise = |n| t.nf2(n + 1);
    let mean_raise_lower = diagonal_sum(c, raise_lower);
    let mean_lower_raise = diagonal_sum(c, lower_raise);
    // the two means nearly cancel when f² n levels off
    let comm = diagonal_sum_dd(c, lower_raise).add(diagonal_sum_dd(c, raise_lower).neg());
    DeformedMoments {
        mean_lower: shifted_sum(c, 1, |n| ((n + 1) as f64).sqrt() * t.f(n + 1)),
        mean_lower2: shifted_sum(c, 2, |n| {
            (((n + 1) * (n + 2)) as f64).sqrt() * t.f(n + 1) * t.f(n + 2)
        }),
        mean_raise_lower,
        mean_lower_raise,
        mean_comm_xp: comm.hi + comm.lo,
    }
}

// n f(n)² at n = 0 must vanish even when f(0) is undefined.
#[inline]
fn f_or_one(t: &FTable, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        t.f(n)
    }
}

/// `⟨[X, P]⟩/i` summed directly as `Σ |c_n|² [(n+1) f²(n+1) − n f²(n)]`.
pub fn commutator_direct(state: &FockState, f: &NonlinearityFunction) -> Result<f64> {
    let t = table_for(state, f)?;
    Ok(diagonal_sum(state.amplitudes(), |n| t.nf2(n + 1) - t.nf2(n)))
}

pub fn moments(state: &FockState, f: &NonlinearityFunction) -> Result<MomentSet> {
    Ok(MomentSet {
        ladder: ladder_moments(state),
        deformed: deformed_moments(state, f)?,
    })
}

/// Uncertainties of the deformed quadratures `X = (A + A†)/√2`,
/// `P = (A − A†)/(√2 i)` and `⟨[X, P]⟩/i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureStats {
    pub dx: f64,
    pub dp: f64,
    pub comm: f64,
}

pub fn deformed_quadrature_stats(state: &FockState, f: &NonlinearityFunction) -> Result<QuadratureStats> {
    let m = deformed_moments(state, f)?;
    quadrature_stats_from(&m)
}

pub(crate) fn quadrature_stats_from(m: &DeformedMoments) -> Result<QuadratureStats> {
    let sym = 0.5 * (m.mean_lower_raise + m.mean_raise_lower);
    let mean_x = std::f64::consts::SQRT_2 * m.mean_lower.re;
    let mean_p = std::f64::consts::SQRT_2 * m.mean_lower.im;
    let var_x = m.mean_lower2.re + sym - mean_x * mean_x;
    let var_p = -m.mean_lower2.re + sym - mean_p * mean_p;
    Ok(QuadratureStats {
        dx: clamp_variance(var_x)?.sqrt(),
        dp: clamp_variance(var_p)?.sqrt(),
        comm: m.mean_comm_xp,
    })
}

pub(crate) fn clamp_variance(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= VARIANCE_FLOOR {
        Ok(0.0)
    } else {
        Err(Error::NegativeVariance(v))
    }
}
