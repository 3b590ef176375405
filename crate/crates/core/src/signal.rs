//! Training sequences, two-segment observations and their reduction to
//! sufficient statistics.
//!
//! Each packet carries `K` training symbols. The front-end switches after the
//! first `K/2`, so the second half observes `F·H` instead of `H`:
//!
//! ```text
//! U1 = H X1 + N1,   U2 = F H X2 + N2
//! ```
//!
//! with unit-variance noise. Matched filtering with `σ² = 2N/(PK)` gives
//! `Y1 = σ² U1 X1ᴴ` and `Y2 = σ² U2 X2ᴴ`, which carry everything the
//! estimators need.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::ComplexMat;
use crate::rng::complex_gaussian_matrix;

/// Training blocks for the two halves of a packet. Both satisfy
/// `X Xᴴ = (PK/2N)·I_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub x1: ComplexMat,
    pub x2: ComplexMat,
    pub power: f64,
    pub symbols: usize,
}

impl TrainingPair {
    pub fn antennas(&self) -> usize {
        self.x1.rows()
    }

    /// Noise-equivalent variance of the sufficient statistics, `2N/(PK)`.
    pub fn sigma2(&self) -> f64 {
        2.0 * self.antennas() as f64 / (self.power * self.symbols as f64)
    }
}

/// Builds the training pair from the first `N` rows of the unitary
/// `K/2`-point DFT, scaled by `√(PK/2N)`. The same block is sent in both
/// halves.
pub fn make_training(antennas: usize, symbols: usize, power: f64) -> Result<TrainingPair> {
    if symbols % 2 != 0 {
        return Err(Error::InvalidArg(format!("training length K must be even, got {symbols}")));
    }
    let half = symbols / 2;
    if antennas == 0 || half < antennas {
        return Err(Error::InvalidArg(format!(
            "need 1 <= N <= K/2, got N = {antennas}, K = {symbols}"
        )));
    }
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::InvalidArg(format!("symbol power must be positive, got {power}")));
    }
    let amplitude = (power * symbols as f64 / (2.0 * antennas as f64)).sqrt() / (half as f64).sqrt();
    let x = ComplexMat::from_fn(antennas, half, |n, t| {
        let angle = -TAU * ((n * t) % half) as f64 / half as f64;
        Complex64::from_polar(amplitude, angle)
    });
    Ok(TrainingPair {
        x1: x.clone(),
        x2: x,
        power,
        symbols,
    })
}

/// Raw observations of one experiment plus the ground truth that produced
/// them.
#[derive(Debug, Clone)]
pub struct ObservationBatch {
    pub u1: ComplexMat,
    pub u2: ComplexMat,
    pub f: Complex64,
    pub sigma_h2: f64,
    pub h: ComplexMat,
}

/// Whether [`synthesize`] adds receiver noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Noise {
    #[default]
    Unit,
    Off,
}

/// `U1 = H X1 + N1`, `U2 = F H X2 + N2` with i.i.d. `CN(0, 1)` noise.
///
/// The noise matrices are drawn only when `noise` is [`Noise::Unit`]; `N1`
/// is drawn before `N2`.
pub fn synthesize<R: Rng + ?Sized>(
    h: &ComplexMat,
    sigma_h2: f64,
    f: Complex64,
    pair: &TrainingPair,
    noise: Noise,
    rng: &mut R,
) -> Result<ObservationBatch> {
    if h.cols() != pair.antennas() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} antennas, training has {}",
            h.cols(),
            pair.antennas()
        )));
    }
    let mut u1 = h.matmul(&pair.x1)?;
    let mut u2 = h.matmul(&pair.x2)?.scale(f);
    if noise == Noise::Unit {
        let n1 = complex_gaussian_matrix(rng, u1.rows(), u1.cols());
        let n2 = complex_gaussian_matrix(rng, u2.rows(), u2.cols());
        u1 = u1.add(&n1)?;
        u2 = u2.add(&n2)?;
    }
    Ok(ObservationBatch {
        u1,
        u2,
        f,
        sigma_h2,
        h: h.clone(),
    })
}

/// Matched-filter outputs `(Y1, Y2)`, each `L × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub y1: ComplexMat,
    pub y2: ComplexMat,
    pub sigma2: f64,
}

impl SufficientStats {
    pub fn new(y1: ComplexMat, y2: ComplexMat, sigma2: f64) -> Result<Self> {
        if y1.dims() != y2.dims() {
            return Err(Error::DimensionMismatch(format!(
                "Y1 is {}x{}, Y2 is {}x{}",
                y1.rows(),
                y1.cols(),
                y2.rows(),
                y2.cols()
            )));
        }
        if y1.rows() == 0 || y1.cols() == 0 {
            return Err(Error::InvalidArg("statistics must be non-empty".into()));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArg(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(Self { y1, y2, sigma2 })
    }

    /// Packet count `L`.
    pub fn packets(&self) -> usize {
        self.y1.rows()
    }

    /// Transmit antenna count `N`.
    pub fn antennas(&self) -> usize {
        self.y1.cols()
    }
}

/// `Y1 = σ² U1 X1ᴴ`, `Y2 = σ² U2 X2ᴴ`.
pub fn sufficient_stats(batch: &ObservationBatch, pair: &TrainingPair) -> Result<SufficientStats> {
    let sigma2 = pair.sigma2();
    let y1 = batch.u1.matmul(&pair.x1.adjoint())?.scale_real(sigma2);
    let y2 = batch.u2.matmul(&pair.x2.adjoint())?.scale_real(sigma2);
    SufficientStats::new(y1, y2, sigma2)
}
