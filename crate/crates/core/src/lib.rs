//! Construction and analysis of f-deformed intelligent states of a single
//! bosonic mode.
//!
//! A nonlinearity function `f(n)` deforms the ladder operators to
//! `A = a f(n)`, `A† = f(n) a†`. The states built here saturate the
//! uncertainty relation for the deformed quadratures
//! `X = (A + A†)/√2`, `P = (A − A†)/(√2 i)`, with `λ = ΔX/ΔP` setting which
//! quadrature carries the smaller fluctuation.
//!
//! - [`nonlinearity`]: the catalog of `f(n)` and functions derived from spectra.
//! - [`fock`]: truncated states and their moments.
//! - [`states`]: the three constructible families and a recursion cross-check.
//! - [`nonclassicality`]: Mandel Q and quadrature squeezing.
//! - [`scan`] and [`verify`]: parameter sweeps and the self-check suite behind the CLI.

pub mod error;
pub mod fock;
pub mod nonclassicality;
pub mod nonlinearity;
pub mod numeric;
pub mod scan;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
pub use fock::FockState;
pub use nonclassicality::StatsReport;
pub use nonlinearity::NonlinearityFunction;
pub use states::{Case, IntelligentStateRequest, TruncationPolicy};
