//! Maximum-likelihood and method-of-moments estimation of `(F, σ_h²)`.
//!
//! In the eigenbasis of `C_H = V diag(λ) Vᴴ` the packets decouple: row `k`
//! of `Vᴴ Y1` and `Vᴴ Y2` is a pair of correlated Gaussian vectors with 2×2
//! covariance
//!
//! ```text
//! C_k = σ_h² λ_k [1, F]ᵀ[1, F]^* + σ² I
//! ```
//!
//! whose top eigenvector `e₁ ∝ (1, F)` does not depend on `k`. With
//! `μ = σ_h²(1 + |F|²)` the log-likelihood concentrates to
//!
//! ```text
//! (N/σ²) [ e₁ᴴ S(μ) e₁ − σ² Σ_k ln(μ λ_k + σ²) ] + const,
//! S(μ) = (1/N) Σ_k w_k(μ) S_k,   w_k = μλ_k / (μλ_k + σ²)
//! ```
//!
//! Maximising over `e₁` picks the top eigenvector of `S(μ)`, leaving a scalar
//! search over `μ`. For `C_H = I` the stationarity condition solves in closed
//! form, which is the method-of-moments estimator.

use num_complex::Complex64;

use crate::channel::CorrelationSpec;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMat, Herm2};
use crate::signal::SufficientStats;

/// `|E₁|` below this is reported as [`EstimateStatus::FInfinite`].
pub const E1_THRESHOLD: f64 = 1e-9;

/// Number of log-spaced probes scanned before golden-section refinement.
pub const COARSE_PROBES: usize = 64;

/// How an estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateStatus {
    Ok,
    /// `E₁ = 0` with `μ̂ > 0`: the likelihood increases without bound as
    /// `|F| → ∞`. `f_hat` is infinite and `sigma_h2_hat` is 0.
    FInfinite,
    /// `μ̂ = 0`: the likelihood does not depend on `F`. `f_hat` is reported
    /// as 0 and `sigma_h2_hat` as 0.
    DegenerateZeroMu,
}

impl std::fmt::Display for EstimateStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EstimateStatus::Ok => "Ok",
            EstimateStatus::FInfinite => "FInfinite",
            EstimateStatus::DegenerateZeroMu => "DegenerateZeroMu",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEstimate {
    pub f_hat: Complex64,
    pub sigma_h2_hat: f64,
    pub mu_hat: f64,
    /// Concentrated objective at `mu_hat`.
    pub objective: f64,
    pub status: EstimateStatus,
}

impl ThetaEstimate {
    fn from_top_eigenvector(mu: f64, top: [Complex64; 2], objective: f64) -> Self {
        if mu <= 0.0 {
            return Self {
                f_hat: Complex64::new(0.0, 0.0),
                sigma_h2_hat: 0.0,
                mu_hat: 0.0,
                objective,
                status: EstimateStatus::DegenerateZeroMu,
            };
        }
        let [e1, e2] = top;
        if e1.norm() < E1_THRESHOLD {
            return Self {
                f_hat: Complex64::new(f64::INFINITY, 0.0),
                sigma_h2_hat: 0.0,
                mu_hat: mu,
                objective,
                status: EstimateStatus::FInfinite,
            };
        }
        Self {
            f_hat: e2 / e1,
            sigma_h2_hat: e1.norm_sqr() * mu,
            mu_hat: mu,
            objective,
            status: EstimateStatus::Ok,
        }
    }
}

/// Options for the scalar search in [`estimate_ml`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlOptions {
    /// Search window is `[μ_seed / factor, μ_seed · factor]`.
    pub bracket_factor: f64,
    /// Golden-section stops when the `ln μ` bracket is narrower than this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for MlOptions {
    fn default() -> Self {
        Self {
            bracket_factor: 1e4,
            tol: 1e-10,
            max_iters: 200,
        }
    }
}

impl MlOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.bracket_factor > 1.0) || !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArg(format!(
                "line search needs bracket_factor > 1, tol > 0 and max_iters >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-packet weights `w_k = μλ_k / (μλ_k + σ²)`.
pub fn s_weights(eigenvalues: &[f64], sigma2: f64, mu: f64) -> Vec<f64> {
    eigenvalues
        .iter()
        .map(|&l| {
            let a = mu * l;
            if a == 0.0 {
                0.0
            } else {
                a / (a + sigma2)
            }
        })
        .collect()
}

fn check_dims(stats: &SufficientStats, spec: &CorrelationSpec) -> Result<()> {
    if stats.packets() != spec.packets() {
        return Err(Error::DimensionMismatch(format!(
            "statistics cover {} packets, correlation matrix {}",
            stats.packets(),
            spec.packets()
        )));
    }
    Ok(())
}

/// Statistics rotated into the eigenbasis of `C_H`, reduced to one 2×2
/// sample covariance `S_k` per eigen-index. Building it costs `O(L²N)`;
/// every later evaluation of `S(μ)` or the objective is `O(L)`.
#[derive(Debug, Clone)]
pub struct Concentrated {
    lambdas: Vec<f64>,
    per_index: Vec<Herm2>,
    sigma2: f64,
    antennas: usize,
}

/// Rows of `Vᴴ Y1` and `Vᴴ Y2`.
fn rotate_stats(stats: &SufficientStats, spec: &CorrelationSpec) -> Result<(ComplexMat, ComplexMat)> {
    let vh = spec.eig().vectors.adjoint();
    Ok((vh.matmul(&stats.y1)?, vh.matmul(&stats.y2)?))
}

impl Concentrated {
    pub fn new(stats: &SufficientStats, spec: &CorrelationSpec) -> Result<Self> {
        check_dims(stats, spec)?;
        let (z1, z2) = rotate_stats(stats, spec)?;
        let n = stats.antennas() as f64;
        let per_index = (0..stats.packets())
            .map(|k| {
                let (r1, r2) = (z1.row(k), z2.row(k));
                let s11: f64 = r1.iter().map(|z| z.norm_sqr()).sum();
                let s22: f64 = r2.iter().map(|z| z.norm_sqr()).sum();
                let s21: Complex64 = r2.iter().zip(r1).map(|(a, b)| a * b.conj()).sum();
                Herm2::new(s11 / n, s22 / n, s21 / n)
            })
            .collect();
        Ok(Self {
            lambdas: spec.eigenvalues().to_vec(),
            per_index,
            sigma2: stats.sigma2,
            antennas: stats.antennas(),
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `S(μ)`.
    pub fn s_matrix(&self, mu: f64) -> Herm2 {
        s_weights(&self.lambdas, self.sigma2, mu)
            .iter()
            .zip(&self.per_index)
            .filter(|(w, _)| **w != 0.0)
            .fold(Herm2::default(), |acc, (&w, s)| acc.add(&s.scale(w)))
    }

    /// `σ² Σ_k ln(μλ_k + σ²)`, i.e. `σ² ln det(μC_H + σ²I)`.
    pub fn log_det_penalty(&self, mu: f64) -> f64 {
        self.sigma2 * self.lambdas.iter().map(|&l| (mu * l + self.sigma2).ln()).sum::<f64>()
    }

    /// `η(μ) − σ² ln det(μC_H + σ²I)`.
    pub fn objective(&self, mu: f64) -> f64 {
        let eta = if mu == 0.0 { 0.0 } else { self.s_matrix(mu).top().0 };
        eta - self.log_det_penalty(mu)
    }

    /// `(N/σ²)[e₁ᴴ S(μ) e₁ − σ² ln det(μC_H + σ²I)]`, the log-likelihood up to
    /// a parameter-free constant, for any unit `e₁`.
    pub fn concentrated_loglik(&self, mu: f64, e1: [Complex64; 2]) -> f64 {
        let n = self.antennas as f64;
        (n / self.sigma2) * (self.s_matrix(mu).quad(e1) - self.log_det_penalty(mu))
    }
}

/// `S(μ)` through the per-eigen-index sum.
pub fn s_matrix(stats: &SufficientStats, spec: &CorrelationSpec, mu: f64) -> Result<Herm2> {
    check_mu(mu)?;
    Ok(Concentrated::new(stats, spec)?.s_matrix(mu))
}

/// `S(μ)` through `S_ij = (1/N) Tr[μC_H (μC_H + σ²I)⁻¹ Y_i Y_jᴴ]`, without
/// diagonalising `C_H`.
pub fn s_matrix_trace_form(stats: &SufficientStats, spec: &CorrelationSpec, mu: f64) -> Result<Herm2> {
    check_mu(mu)?;
    check_dims(stats, spec)?;
    let l = stats.packets();
    let a = spec.matrix().scale_real(mu);
    let b = a.add(&ComplexMat::identity(l).scale_real(stats.sigma2))?;
    // a and b commute, so b⁻¹a = a b⁻¹
    let w = b.solve(&a)?;
    let wy1 = w.matmul(&stats.y1)?;
    let wy2 = w.matmul(&stats.y2)?;
    let tr = |m: &ComplexMat, y: &ComplexMat| -> Complex64 {
        m.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a * b.conj()).sum()
    };
    let n = stats.antennas() as f64;
    Ok(Herm2::new(
        tr(&wy1, &stats.y1).re / n,
        tr(&wy2, &stats.y2).re / n,
        tr(&wy2, &stats.y1) / n,
    ))
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArg(format!("mu must be finite and >= 0, got {mu}")));
    }
    Ok(())
}

/// `η(μ) − σ² ln det(μC_H + σ²I)`.
pub fn ml_objective(stats: &SufficientStats, spec: &CorrelationSpec, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    Ok(Concentrated::new(stats, spec)?.objective(mu))
}

/// `(F, σ_h²)` with `μ = σ_h²(1 + |F|²)` and `e₁ ∝ (1, F)`.
pub fn theta_from_mu(mu: f64, e1: [Complex64; 2]) -> (Complex64, f64) {
    (e1[1] / e1[0], mu * e1[0].norm_sqr() / (e1[0].norm_sqr() + e1[1].norm_sqr()))
}

/// Sample covariance `S₀ = (1/N)[Tr(Y_i Y_jᴴ)]`.
fn unweighted_s(stats: &SufficientStats) -> Herm2 {
    let n = stats.antennas() as f64;
    let s21: Complex64 = stats
        .y2
        .as_slice()
        .iter()
        .zip(stats.y1.as_slice())
        .map(|(a, b)| a * b.conj())
        .sum();
    Herm2::new(
        stats.y1.frobenius_norm_sqr() / n,
        stats.y2.frobenius_norm_sqr() / n,
        s21 / n,
    )
}

/// Closed-form estimator, exact ML when `C_H = I`:
/// `μ̂ = max(η₀/L − σ², 0)` with `η₀` the top eigenvalue of `S₀`.
pub fn estimate_mm(stats: &SufficientStats) -> ThetaEstimate {
    let s0 = unweighted_s(stats);
    let (eta0, top) = s0.top();
    let l = stats.packets() as f64;
    let sigma2 = stats.sigma2;
    let mu = (eta0 / l - sigma2).max(0.0);
    let objective = mu / (mu + sigma2) * eta0 - sigma2 * l * (mu + sigma2).ln();
    ThetaEstimate::from_top_eigenvector(mu, top, objective)
}

/// Maximum-likelihood estimate for a general known `C_H`.
///
/// Maximises the concentrated objective over `u = ln μ`: a coarse scan of
/// [`COARSE_PROBES`] points over `[μ_seed/factor, μ_seed·factor]`, seeded by
/// the closed-form estimate, then golden-section refinement around the best
/// probe. The boundary `μ = 0` is compared explicitly.
pub fn estimate_ml(stats: &SufficientStats, spec: &CorrelationSpec, opts: &MlOptions) -> Result<ThetaEstimate> {
    let conc = Concentrated::new(stats, spec)?;
    estimate_ml_concentrated(&conc, estimate_mm(stats).mu_hat, opts)
}

/// [`estimate_ml`] on an already rotated problem.
pub fn estimate_ml_concentrated(conc: &Concentrated, mu_seed: f64, opts: &MlOptions) -> Result<ThetaEstimate> {
    opts.validate()?;
    let seed = if mu_seed > 0.0 { mu_seed } else { conc.sigma2() };
    let half_width = opts.bracket_factor.ln();
    let f = |u: f64| conc.objective(u.exp());

    let mut lo = seed.ln() - half_width;
    let mut hi = seed.ln() + half_width;
    let step = (hi - lo) / (COARSE_PROBES - 1) as f64;
    let (mut best_i, mut probes) = scan(&f, lo, step);
    // If the maximum sits on the upper edge, slide the window up.
    let mut shifts = 0;
    while best_i == COARSE_PROBES - 1 && shifts < 8 {
        lo = hi;
        hi = lo + 2.0 * half_width;
        (best_i, probes) = scan(&f, lo, step);
        shifts += 1;
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = lo + step * (best_i + 1).min(COARSE_PROBES - 1) as f64;
    let (u_star, f_star) = golden_section_max(&f, a, b, opts.tol, opts.max_iters)?;
    let (u_star, f_star) = if probes[best_i] > f_star {
        (lo + step * best_i as f64, probes[best_i])
    } else {
        (u_star, f_star)
    };

    let f_zero = conc.objective(0.0);
    if f_zero >= f_star {
        return Ok(ThetaEstimate::from_top_eigenvector(0.0, [Complex64::new(1.0, 0.0); 2], f_zero));
    }
    let mu = u_star.exp();
    let (_, top) = conc.s_matrix(mu).top();
    Ok(ThetaEstimate::from_top_eigenvector(mu, top, f_star))
}

fn scan(f: &impl Fn(f64) -> f64, lo: f64, step: f64) -> (usize, Vec<f64>) {
    let values: Vec<f64> = (0..COARSE_PROBES).map(|i| f(lo + step * i as f64)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > values[best] { i } else { best });
    (best, values)
}

/// Golden-section search for a maximum of `f` on `[a, b]`; returns the
/// abscissa and value of the best point seen.
pub fn golden_section_max(
    f: &impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a).abs() > tol {
        if iters == max_iters {
            return Err(Error::OptimizerFailure(format!(
                "bracket width {:e} after {max_iters} iterations",
                (b - a).abs()
            )));
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iters += 1;
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Exact joint log-density `ln p(Y1, Y2; F, σ_h²)`.
///
/// Evaluated directly from the per-eigen-index Gaussian model: for each `k`
/// and antenna `n`, `((VᴴY1)_{kn}, (VᴴY2)_{kn}) ~ CN(0, C_k)`.
pub fn loglik_direct(stats: &SufficientStats, spec: &CorrelationSpec, f: Complex64, sigma_h2: f64) -> Result<f64> {
    check_dims(stats, spec)?;
    if !(sigma_h2 >= 0.0) {
        return Err(Error::InvalidArg(format!("sigma_h2 must be >= 0, got {sigma_h2}")));
    }
    let (z1, z2) = rotate_stats(stats, spec)?;
    let sigma2 = stats.sigma2;
    let ln_pi = std::f64::consts::PI.ln();
    let mut total = 0.0;
    for (k, &lambda) in spec.eigenvalues().iter().enumerate() {
        let c_k = packet_covariance(f, sigma_h2, lambda, sigma2);
        let det = c_k.det();
        let inv = match c_k.inverse() {
            Some(inv) if det > 0.0 => inv,
            _ => return Err(Error::SingularCovariance { index: k }),
        };
        let ln_det = det.ln();
        for (&a, &b) in z1.row(k).iter().zip(z2.row(k)) {
            total -= 2.0 * ln_pi + ln_det + inv.quad([a, b]);
        }
    }
    Ok(total)
}

/// Per-eigen-index covariance
/// `C_k = [[σ_h²λ + σ², σ_h²F^*λ], [σ_h²Fλ, σ_h²|F|²λ + σ²]]`.
pub fn packet_covariance(f: Complex64, sigma_h2: f64, lambda: f64, sigma2: f64) -> Herm2 {
    let a = sigma_h2 * lambda;
    Herm2::new(a + sigma2, a * f.norm_sqr() + sigma2, f * a)
}
