//! Temporal correlation across packets (Clarke's model) and sampling of the
//! correlated Rayleigh channel matrix `H`.

use std::f64::consts::{FRAC_PI_4, PI};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMat, HermEig};
use crate::rng::complex_gaussian_matrix;

/// Default propagation speed in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Eigenvalues of `C_H` below `-CLAMP_TOL·λ₁` are rejected, the rest of the
/// negative ones are rounded up to zero.
pub const CLAMP_TOL: f64 = 1e-9;

/// Fraction of `λ₁` above which an eigenvalue counts as significant in
/// [`CorrelationSpec::significant_eigenvalues`]. Diagnostic only.
pub const SIGNIFICANT_FRACTION: f64 = 0.01;

pub fn kmh_to_mps(v_kmh: f64) -> f64 {
    v_kmh / 3.6
}

/// Maximum Doppler shift `v / λ = v·f_c / c`.
pub fn doppler_freq(v: f64, carrier_hz: f64, c: f64) -> Result<f64> {
    if !(carrier_hz > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidArg(format!(
            "carrier frequency ({carrier_hz}) and propagation speed ({c}) must be positive"
        )));
    }
    if !(v >= 0.0) {
        return Err(Error::InvalidArg(format!("velocity must be non-negative, got {v}")));
    }
    Ok(v * carrier_hz / c)
}

/// Bessel function of the first kind, order zero.
///
/// Power series up to `|x| = 12`, Hankel's asymptotic expansion beyond it
/// (truncated at its smallest term).
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 12.0 {
        let q = -0.25 * x * x;
        let mut term = 1.0_f64;
        let mut sum = 1.0_f64;
        for m in 1..80 {
            term *= q / (m * m) as f64;
            sum += term;
            if term.abs() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        // t_k = Π_{j≤k} (2j-1)² / (8 j x); P takes the even k with
        // alternating sign, Q the odd k with the opposite phase.
        let mut p = 1.0;
        let mut q = 0.0;
        let mut term = 1.0_f64;
        let mut k = 1;
        loop {
            let next = term * ((2 * k - 1) as f64).powi(2) / (8.0 * k as f64 * x);
            if next >= term || next < 1e-18 {
                break;
            }
            term = next;
            if k % 2 == 0 {
                p += if (k / 2) % 2 == 0 { term } else { -term };
            } else {
                q += if ((k - 1) / 2) % 2 == 0 { -term } else { term };
            }
            k += 1;
        }
        let chi = x - FRAC_PI_4;
        (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Kind of temporal fading between packets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fading {
    /// Independent channel in every packet, `C_H = I`.
    Iid,
    /// Clarke's model driven by the fastest scatterer speed in km/h.
    Clarke { velocity_kmh: f64 },
}

impl Fading {
    pub fn doppler_hz(&self, carrier_hz: f64) -> Result<f64> {
        match *self {
            Fading::Iid => Ok(f64::INFINITY),
            Fading::Clarke { velocity_kmh } => {
                doppler_freq(kmh_to_mps(velocity_kmh), carrier_hz, SPEED_OF_LIGHT)
            }
        }
    }

    pub fn correlation(&self, packets: usize, carrier_hz: f64, slot_s: f64) -> Result<CorrelationSpec> {
        match *self {
            Fading::Iid => CorrelationSpec::iid(packets),
            Fading::Clarke { .. } => {
                CorrelationSpec::clarke(packets, self.doppler_hz(carrier_hz)?, slot_s)
            }
        }
    }
}

/// Normalised packet-to-packet correlation `C_H` together with its
/// eigensystem and a square root for sampling.
#[derive(Debug, Clone)]
pub struct CorrelationSpec {
    packets: usize,
    doppler_hz: f64,
    slot_s: f64,
    matrix: ComplexMat,
    eig: HermEig,
    sqrt: ComplexMat,
}

impl CorrelationSpec {
    /// Clarke's model: `[C_H]_{kj} = J₀(2π f_d T_s (k − j))`.
    pub fn clarke(packets: usize, doppler_hz: f64, slot_s: f64) -> Result<Self> {
        if packets == 0 {
            return Err(Error::InvalidArg("at least one packet is required".into()));
        }
        if !(slot_s > 0.0) {
            return Err(Error::InvalidArg(format!("slot duration must be positive, got {slot_s}")));
        }
        if !(doppler_hz >= 0.0) || !doppler_hz.is_finite() {
            return Err(Error::InvalidArg(format!("Doppler frequency must be finite and >= 0, got {doppler_hz}")));
        }
        let lags: Vec<f64> = (0..packets)
            .map(|d| bessel_j0(2.0 * PI * doppler_hz * slot_s * d as f64))
            .collect();
        let matrix = ComplexMat::from_fn(packets, packets, |k, j| lags[k.abs_diff(j)].into());
        Self::build(matrix, doppler_hz, slot_s)
    }

    /// Independent fading, `C_H = I_L`.
    pub fn iid(packets: usize) -> Result<Self> {
        if packets == 0 {
            return Err(Error::InvalidArg("at least one packet is required".into()));
        }
        Self::build(ComplexMat::identity(packets), f64::INFINITY, f64::NAN)
    }

    /// Arbitrary Hermitian PSD correlation matrix.
    pub fn from_matrix(matrix: ComplexMat) -> Result<Self> {
        if !matrix.is_square() || matrix.rows() == 0 {
            return Err(Error::DimensionMismatch("correlation matrix must be square and non-empty".into()));
        }
        Self::build(matrix, f64::NAN, f64::NAN)
    }

    fn build(matrix: ComplexMat, doppler_hz: f64, slot_s: f64) -> Result<Self> {
        let raw = linalg::herm_eig(&matrix, linalg::EIG_TOL)?;
        let values = linalg::clamp_eigenvalues(&raw.values, CLAMP_TOL)?;
        let sqrt = linalg::sqrt_from_eig(&values, &raw.vectors);
        Ok(Self {
            packets: matrix.rows(),
            doppler_hz,
            slot_s,
            matrix,
            eig: HermEig {
                values,
                vectors: raw.vectors,
            },
            sqrt,
        })
    }

    /// Number of packets `L`.
    pub fn packets(&self) -> usize {
        self.packets
    }

    /// Maximum Doppler shift; infinite for i.i.d., NaN for a user matrix.
    pub fn doppler_hz(&self) -> f64 {
        self.doppler_hz
    }

    pub fn slot_s(&self) -> f64 {
        self.slot_s
    }

    pub fn matrix(&self) -> &ComplexMat {
        &self.matrix
    }

    /// Eigensystem of `C_H` with negative rounding noise clamped to zero.
    pub fn eig(&self) -> &HermEig {
        &self.eig
    }

    /// Clamped eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }

    /// `M` with `M Mᴴ = C_H`.
    pub fn sqrt(&self) -> &ComplexMat {
        &self.sqrt
    }

    /// Count of eigenvalues above `fraction · λ₁`.
    pub fn significant_eigenvalues(&self, fraction: f64) -> usize {
        let top = self.eig.values.first().copied().unwrap_or(0.0);
        self.eig.values.iter().filter(|&&l| l > fraction * top).count()
    }
}

/// One draw of the `L × N` channel matrix.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    pub h: ComplexMat,
    pub sigma_h2: f64,
}

/// Draws `H = σ_h · C_H^{1/2} · G` with `G` an `L × N` matrix of i.i.d.
/// `CN(0, 1)` entries. Columns (antennas) are independent, rows (packets)
/// carry the temporal correlation.
///
/// `sigma_h2 = 0` is accepted and yields `H = 0`.
pub fn sample_channel<R: Rng + ?Sized>(
    spec: &CorrelationSpec,
    antennas: usize,
    sigma_h2: f64,
    rng: &mut R,
) -> Result<ChannelDraw> {
    if !(sigma_h2 >= 0.0) || !sigma_h2.is_finite() {
        return Err(Error::InvalidArg(format!("channel power must be finite and >= 0, got {sigma_h2}")));
    }
    if antennas == 0 {
        return Err(Error::InvalidArg("at least one transmit antenna is required".into()));
    }
    let g = complex_gaussian_matrix(rng, spec.packets(), antennas);
    let h = spec.sqrt().matmul(&g)?.scale_real(sigma_h2.sqrt());
    Ok(ChannelDraw { h, sigma_h2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_stream;
    use num_complex::Complex64;

    // Independent oracle: plain power series, summed to 60 terms.
    fn j0_series(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..60 {
            term *= -(x * x / 4.0) / (m * m) as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_freq(0.0, 9e8, SPEED_OF_LIGHT).unwrap(), 0.0);
        let slow = doppler_freq(kmh_to_mps(5.0), 9e8, SPEED_OF_LIGHT).unwrap();
        assert!((slow - 4.169).abs() < 5e-4, "{slow}");
        let medium = doppler_freq(kmh_to_mps(50.0), 9e8, SPEED_OF_LIGHT).unwrap();
        assert!((medium - 41.69).abs() < 5e-3, "{medium}");
        assert!(doppler_freq(1.0, 0.0, SPEED_OF_LIGHT).is_err());
        assert!(doppler_freq(1.0, 9e8, -1.0).is_err());
    }

    #[test]
    fn j0_reference_values() {
        assert_eq!(bessel_j0(0.0), 1.0);
        assert!(bessel_j0(2.404825557695773).abs() < 1e-9);
        assert!(j0_series(2.404825557695773).abs() < 1e-9);
        assert!((bessel_j0(1.0) - 0.7651976866).abs() < 1e-10);
        assert!((bessel_j0(1.0) - j0_series(1.0)).abs() < 1e-15);
        assert_eq!(bessel_j0(-3.0), bessel_j0(3.0));
    }

    #[test]
    fn j0_matches_series_and_is_continuous_at_switch() {
        for i in 0..=1000 {
            let x = 12.0 * i as f64 / 1000.0;
            assert!((bessel_j0(x) - j0_series(x)).abs() < 1e-11, "x={x}");
        }
        let below = bessel_j0(12.0);
        let above = bessel_j0(12.0 + 1e-12);
        assert!((below - above).abs() < 1e-11);
    }

    #[test]
    fn j0_large_arguments() {
        // 32nd zero of J0
        assert!(bessel_j0(99.7468198586806).abs() < 1e-10);
        // envelope: |J0(x)| <= sqrt(2/(πx))
        for &x in &[50.0, 500.0, 5000.0, 1e4] {
            assert!(bessel_j0(x).abs() <= (2.0 / (PI * x)).sqrt() * 1.001);
        }
        // J0(20) from standard tables
        assert!((bessel_j0(20.0) - 0.16702466434058316).abs() < 1e-12);
    }

    #[test]
    fn static_channel_is_rank_one() {
        let spec = CorrelationSpec::clarke(3, 0.0, 1e-3).unwrap();
        assert!(spec.matrix().as_slice().iter().all(|&z| z == Complex64::new(1.0, 0.0)));
        assert!((spec.eigenvalues()[0] - 3.0).abs() < 1e-12);
        assert!(spec.eigenvalues()[1..].iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn iid_is_identity() {
        let spec = CorrelationSpec::iid(5).unwrap();
        assert_eq!(spec.matrix(), &ComplexMat::identity(5));
        assert_eq!(spec.eigenvalues(), &[1.0; 5]);
    }

    #[test]
    fn slow_fading_has_one_significant_eigenvalue() {
        let spec = Fading::Clarke { velocity_kmh: 5.0 }.correlation(10, 9e8, 1e-3).unwrap();
        assert_eq!(spec.significant_eigenvalues(SIGNIFICANT_FRACTION), 1);
        let medium = Fading::Clarke { velocity_kmh: 50.0 }.correlation(10, 9e8, 1e-3).unwrap();
        assert!(medium.significant_eigenvalues(SIGNIFICANT_FRACTION) > 1);
    }

    #[test]
    fn clarke_structure() {
        for &(l, fd) in &[(4, 4.169), (10, 41.69), (16, 200.0), (1, 10.0)] {
            let spec = CorrelationSpec::clarke(l, fd, 1e-3).unwrap();
            let m = spec.matrix();
            for k in 0..l {
                assert_eq!(m[(k, k)], Complex64::new(1.0, 0.0));
                for j in 0..l {
                    assert_eq!(m[(k, j)], m[(j, k)]);
                    if k > 0 && j > 0 {
                        assert_eq!(m[(k, j)], m[(k - 1, j - 1)]);
                    }
                }
            }
            let trace: f64 = spec.eigenvalues().iter().sum();
            assert!((trace - l as f64).abs() <= 1e-9 * l as f64);
            assert!(spec.eigenvalues().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn clarke_rejects_bad_input() {
        assert!(CorrelationSpec::clarke(0, 1.0, 1e-3).is_err());
        assert!(CorrelationSpec::clarke(3, 1.0, 0.0).is_err());
        assert!(CorrelationSpec::clarke(3, -1.0, 1e-3).is_err());
        assert!(CorrelationSpec::iid(0).is_err());
    }

    #[test]
    fn sqrt_reconstructs_slow_fading() {
        let spec = CorrelationSpec::clarke(4, 4.17, 1e-3).unwrap();
        let r = spec.sqrt().matmul(&spec.sqrt().adjoint()).unwrap();
        let err = r.sub(spec.matrix()).unwrap().frobenius_norm() / spec.matrix().frobenius_norm();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn iid_entries_have_unit_variance() {
        let spec = CorrelationSpec::iid(4).unwrap();
        let mut rng = trial_stream(5, 0, 0);
        let mut acc = 0.0;
        let mut count = 0;
        while count < 100_000 {
            let d = sample_channel(&spec, 5, 1.0, &mut rng).unwrap();
            acc += d.h.frobenius_norm_sqr();
            count += 20;
        }
        let var = acc / count as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn static_channel_rows_are_identical() {
        let spec = CorrelationSpec::clarke(6, 0.0, 1e-3).unwrap();
        let mut rng = trial_stream(8, 0, 0);
        let d = sample_channel(&spec, 3, 2.0, &mut rng).unwrap();
        for k in 1..6 {
            for n in 0..3 {
                assert!((d.h[(k, n)] - d.h[(0, n)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn slow_fading_lag_one_correlation() {
        let fd = doppler_freq(kmh_to_mps(5.0), 9e8, SPEED_OF_LIGHT).unwrap();
        let spec = CorrelationSpec::clarke(10, fd, 1e-3).unwrap();
        let expected = bessel_j0(2.0 * PI * fd * 1e-3);
        let mut rng = trial_stream(21, 0, 0);
        let (mut cross, mut power) = (Complex64::new(0.0, 0.0), 0.0);
        let mut cols_cross = Complex64::new(0.0, 0.0);
        let draws = 100_000;
        for _ in 0..draws {
            let d = sample_channel(&spec, 2, 1.0, &mut rng).unwrap();
            cross += d.h[(1, 0)] * d.h[(0, 0)].conj();
            power += d.h[(0, 0)].norm_sqr();
            cols_cross += d.h[(0, 0)] * d.h[(0, 1)].conj();
        }
        let rho = cross.re / power;
        assert!((rho - expected).abs() < 0.02 * expected, "{rho} vs {expected}");
        // spatial independence
        assert!((cols_cross / draws as f64).norm() < 3.0 / (draws as f64).sqrt());
    }
}
