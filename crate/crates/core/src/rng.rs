//! Seeded random streams and circular complex Gaussian draws.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::ComplexMat;

/// Random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Independent stream for one `(snr_index, trial_index)` cell of an
/// experiment. ChaCha is counter based, so each cell gets its own stream id
/// and the draws never depend on which thread runs the trial.
pub fn trial_stream(master_seed: u64, snr_index: usize, trial_index: usize) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((snr_index as u64) << 32) | (trial_index as u64 & 0xffff_ffff));
    rng
}

/// One `CN(0, 1)` sample via Box-Muller: real and imaginary parts are
/// independent `N(0, 1/2)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    // 1 - U lies in (0, 1], keeping the log finite
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-u1.ln()).sqrt();
    let phi = std::f64::consts::TAU * u2;
    Complex64::new(r * phi.cos(), r * phi.sin())
}

/// `rows × cols` matrix of i.i.d. `CN(0, 1)` entries, filled row by row.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMat {
    ComplexMat::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}
