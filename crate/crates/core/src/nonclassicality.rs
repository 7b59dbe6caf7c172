//! Photon statistics and quadrature squeezing of a built state.
//!
//! Squeezing is measured on the undeformed quadratures `x = (a + a†)/√2`,
//! `p = (a − a†)/(√2 i)`. The deformed `X, P` enter only through the
//! intelligence residual `ΔX ΔP − ½|⟨[X, P]⟩|`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{self, clamp_variance, FockState, LadderMoments};
use crate::nonlinearity::NonlinearityFunction;

/// `⟨n⟩` below this counts as the vacuum.
pub const VACUUM_MEAN_N: f64 = 1e-14;

/// Vacuum variance of either quadrature.
const VACUUM_VARIANCE: f64 = 0.5;

/// `Q = (⟨(Δn)²⟩ − ⟨n⟩) / ⟨n⟩`.
pub fn mandel_q(state: &FockState) -> Result<f64> {
    let m = fock::ladder_moments(state);
    mandel_from(&m)
}

fn photon_variance(m: &LadderMoments) -> Result<f64> {
    clamp_variance(m.mean_n2 - m.mean_n * m.mean_n)
}

fn mandel_from(m: &LadderMoments) -> Result<f64> {
    if m.mean_n < VACUUM_MEAN_N {
        return Err(Error::VacuumUndefined);
    }
    Ok((photon_variance(m)? - m.mean_n) / m.mean_n)
}

/// `(Δx)², (Δp)²` and the squeezing parameters `q_i = ((Δq_i)² − ½)/½`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureReport {
    pub var_x: f64,
    pub var_p: f64,
    pub q1: f64,
    pub q2: f64,
}

pub fn quadrature_report(state: &FockState) -> Result<QuadratureReport> {
    quadrature_from(&fock::ladder_moments(state))
}

fn quadrature_from(m: &LadderMoments) -> Result<QuadratureReport> {
    let a = m.mean_a;
    let a2 = m.mean_a2;
    let ad = a.conj();
    let ad2 = a2.conj();
    let n = Complex64::new(m.mean_n, 0.0);
    let var_x = 0.5 * (1.0 + a2 + ad2 + 2.0 * n - a * a - ad * ad - 2.0 * a * ad);
    let var_p = 0.5 * (1.0 - a2 - ad2 + 2.0 * n + a * a + ad * ad - 2.0 * a * ad);
    let var_x = clamp_variance(var_x.re)?;
    let var_p = clamp_variance(var_p.re)?;
    Ok(QuadratureReport {
        var_x,
        var_p,
        q1: (var_x - VACUUM_VARIANCE) / VACUUM_VARIANCE,
        q2: (var_p - VACUUM_VARIANCE) / VACUUM_VARIANCE,
    })
}

/// Every diagnostic for one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatsReport {
    pub mean_n: f64,
    pub var_n: f64,
    pub mandel_q: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub q1: f64,
    pub q2: f64,
    #[serde(rename = "dX")]
    pub dx: f64,
    #[serde(rename = "dP")]
    pub dp: f64,
    pub comm_abs: f64,
    pub intelligence_residual: f64,
}

impl StatsReport {
    /// `|ΔX ΔP − ½|⟨[X, P]⟩|| / (ΔX ΔP + ½|⟨[X, P]⟩|)`.
    pub fn relative_intelligence_residual(&self) -> f64 {
        let scale = self.dx * self.dp + 0.5 * self.comm_abs;
        if scale == 0.0 {
            0.0
        } else {
            self.intelligence_residual.abs() / scale
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "<n>={:.6e} Q={:.6e} q1={:.6e} q2={:.6e} dX={:.6e} dP={:.6e} |<[X,P]>|={:.6e} residual={:.3e}",
            self.mean_n,
            self.mandel_q,
            self.q1,
            self.q2,
            self.dx,
            self.dp,
            self.comm_abs,
            self.intelligence_residual
        )
    }
}

/// Assemble a [`StatsReport`] for `state`, built from `f`.
///
/// `lambda` and `z` are accepted for symmetry with the construction API;
/// the report depends only on the state and `f`.
pub fn full_report(state: &FockState, f: &NonlinearityFunction, _lambda: f64, _z: Complex64) -> Result<StatsReport> {
    let m = fock::moments(state, f)?;
    let var_n = photon_variance(&m.ladder)?;
    let mandel_q = mandel_from(&m.ladder)?;
    let quad = quadrature_from(&m.ladder)?;
    let deformed = fock::quadrature_stats_from(&m.deformed)?;
    let comm_abs = deformed.comm.abs();
    Ok(StatsReport {
        mean_n: m.ladder.mean_n,
        var_n,
        mandel_q,
        var_x: quad.var_x,
        var_p: quad.var_p,
        q1: quad.q1,
        q2: quad.q2,
        dx: deformed.dx,
        dp: deformed.dp,
        comm_abs,
        intelligence_residual: deformed.dx * deformed.dp - 0.5 * comm_abs,
    })
}
