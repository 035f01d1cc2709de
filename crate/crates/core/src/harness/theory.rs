//! Closed-form reference curves.

use statrs::function::erf::erfc;

/// Gray-coded QPSK over AWGN: `Q(sqrt(2 Eb/N0)) = erfc(sqrt(Eb/N0)) / 2`.
pub fn qpsk_ber(ebn0_db: f64) -> f64 {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    0.5 * erfc(ebn0.sqrt())
}
