//! Fisher information and Cramér-Rao bound for `θ = [F, σ_h²]ᵀ`.
//!
//! `F` is complex and handled with Wirtinger derivatives (`F` and `F^*`
//! independent), `σ_h²` is real. Entry `(1, 1)` of the bound therefore bounds
//! `E|F̂ − F|²`.

use num_complex::Complex64;

use crate::channel::CorrelationSpec;
use crate::error::{Error, Result};
use crate::estimators::packet_covariance;
use crate::linalg::{ComplexMat, Herm2};

/// A FIM whose determinant falls below this fraction of the product of its
/// diagonal is treated as singular.
const SINGULAR_RATIO: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimResult {
    pub fim: Herm2,
    /// Inverse of `fim`; `None` when the information matrix is singular.
    pub crb: Option<Herm2>,
}

impl FimResult {
    fn new(fim: Herm2) -> Self {
        let scale = (fim.s11 * fim.s22).abs();
        let det = fim.det();
        let crb = if det > SINGULAR_RATIO * scale && det > 0.0 {
            fim.inverse()
        } else {
            None
        };
        Self { fim, crb }
    }

    /// Bound on `E|F̂ − F|²`.
    pub fn crb_f(&self) -> Option<f64> {
        self.crb.map(|c| c.s11)
    }

    /// Bound on `var(σ̂_h²)`.
    pub fn crb_sigma(&self) -> Option<f64> {
        self.crb.map(|c| c.s22)
    }
}

fn check_inputs(sigma_h2: f64, antennas: usize, sigma2: f64) -> Result<()> {
    if !(sigma_h2 >= 0.0) || !sigma_h2.is_finite() {
        return Err(Error::InvalidArg(format!("sigma_h2 must be finite and >= 0, got {sigma_h2}")));
    }
    if antennas == 0 {
        return Err(Error::InvalidArg("at least one antenna is required".into()));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidArg(format!("sigma2 must be positive, got {sigma2}")));
    }
    Ok(())
}

/// Closed-form FIM:
///
/// ```text
/// I = Σ_k N(1+|F|²)λ_k² / [λ_kσ_h²(1+|F|²) + σ²]² · F_k
/// F_k = [[σ_h⁴(λ_kσ_h²/σ² + 1), Fσ_h²], [F^*σ_h², 1+|F|²]]
/// ```
pub fn fim_closed(
    f: Complex64,
    sigma_h2: f64,
    spec: &CorrelationSpec,
    antennas: usize,
    sigma2: f64,
) -> Result<FimResult> {
    check_inputs(sigma_h2, antennas, sigma2)?;
    let n = antennas as f64;
    let gain = 1.0 + f.norm_sqr();
    let fim = spec
        .eigenvalues()
        .iter()
        .filter(|&&l| l != 0.0)
        .fold(Herm2::default(), |acc, &l| {
            let d = l * sigma_h2 * gain + sigma2;
            let pre = n * gain * l * l / (d * d);
            let block = Herm2::new(
                sigma_h2 * sigma_h2 * (l * sigma_h2 / sigma2 + 1.0),
                gain,
                f.conj() * sigma_h2,
            );
            acc.add(&block.scale(pre))
        });
    Ok(FimResult::new(fim))
}

/// `∂C_k/∂F^*`, `∂C_k/∂F` and `∂C_k/∂σ_h²`.
pub fn covariance_derivatives(f: Complex64, sigma_h2: f64, lambda: f64) -> [ComplexMat; 3] {
    let z = Complex64::new(0.0, 0.0);
    let a = Complex64::new(sigma_h2 * lambda, 0.0);
    let l = Complex64::new(lambda, 0.0);
    let mat = |v: [Complex64; 4]| ComplexMat::from_fn(2, 2, |i, j| v[2 * i + j]);
    [
        mat([z, a, z, a * f]),
        mat([z, z, a, a * f.conj()]),
        mat([l, l * f.conj(), l * f, l * f.norm_sqr()]),
    ]
}

/// FIM from `[I]_ij = N Σ_k Tr[C_k⁻¹ ∂C_k/∂θ_i^* C_k⁻¹ ∂C_k/∂θ_j]`.
pub fn fim_general(
    f: Complex64,
    sigma_h2: f64,
    spec: &CorrelationSpec,
    antennas: usize,
    sigma2: f64,
) -> Result<FimResult> {
    check_inputs(sigma_h2, antennas, sigma2)?;
    let n = antennas as f64;
    let mut acc = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (k, &lambda) in spec.eigenvalues().iter().enumerate() {
        let c = packet_covariance(f, sigma_h2, lambda, sigma2).to_mat();
        let c_inv = c.inverse().map_err(|_| Error::SingularCovariance { index: k })?;
        let [d_fc, d_f, d_s] = covariance_derivatives(f, sigma_h2, lambda);
        let conj_side = [&d_fc, &d_s];
        let plain_side = [&d_f, &d_s];
        for (i, di) in conj_side.iter().enumerate() {
            let left = c_inv.matmul(di)?;
            for (j, dj) in plain_side.iter().enumerate() {
                let right = c_inv.matmul(dj)?;
                acc[i][j] += left.matmul(&right)?.trace() * n;
            }
        }
    }
    Ok(FimResult::new(Herm2::new(acc[0][0].re, acc[1][1].re, acc[1][0])))
}

/// `√CRB_F / |F|`, the relative RMSE floor for `F̂`.
pub fn relative_crb_f(
    f: Complex64,
    sigma_h2: f64,
    spec: &CorrelationSpec,
    antennas: usize,
    sigma2: f64,
) -> Result<f64> {
    if f.norm() == 0.0 {
        return Err(Error::InvalidArg("relative bound is undefined for F = 0".into()));
    }
    let result = fim_closed(f, sigma_h2, spec, antennas, sigma2)?;
    let bound = result.crb_f().ok_or(Error::Singular)?;
    Ok(bound.max(0.0).sqrt() / f.norm())
}
