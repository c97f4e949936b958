//! Geometric evolution PDE toolbox on the hyperbolic plane.
//!
//! Everything runs in the global Iwasawa coordinates `(x1, x2)` of `H²`,
//! where the metric is `e^{-2x2} dx1² + dx2²`. The crate provides:
//!
//! - closed-form geometry of domain and target (`geometry`),
//! - a truncated structured grid with Laplace–Beltrami calculus (`grid`),
//! - harmonic maps built from scaled holomorphic disk maps (`harmonic`),
//! - the harmonic map heat flow with decay diagnostics (`heat`),
//! - the wave map equation with a leapfrog integrator (`wave`),
//! - frame transport along the heat flow and gauge field audits (`gauge`,
//!   `master`),
//! - the magnetic operator `-Δ + W` and its smallest eigenvalue (`spectrum`),
//! - batch experiment drivers with CSV/JSON artifacts (`experiment`).
//!
//! See the `examples/` directory for one runnable entry point per
//! capability; the `h2wave` binary wraps the same drivers as subcommands.

pub mod experiment;
pub mod fit;
pub mod gauge;
pub mod geometry;
pub mod grid;
pub mod harmonic;
pub mod heat;
pub mod io;
pub mod master;
pub mod spectrum;
pub mod util;
pub mod wave;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or precondition violation.
    #[error("configuration error: {0}")]
    Config(String),

    /// A field stopped being finite; PDE blow-up must surface, not propagate.
    #[error("numerical blow-up in {stage} at step {step} ({coord}={value}): first bad node #{node}")]
    Blowup {
        stage: &'static str,
        step: usize,
        /// Name of the evolution coordinate ("s" or "t").
        coord: &'static str,
        value: f64,
        node: usize,
    },

    /// Requested norm is not one of the supported exponents.
    #[error("unsupported norm p={0}; only p=2 and p=inf are available")]
    UnsupportedNorm(f64),

    /// Diagnostic routine was handed too little data.
    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
