use crate::error::{check_len, Error, Result};
use crate::linalg::norm_sq;

/// Denominators below this make [`snr`] return `+inf`.
const SNR_FLOOR: f64 = 1e-300;

/// Relative solution error `||x - x_hat||^2 / ||x_hat||^2`.
pub fn rse(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    check_len("rse", x_hat.len(), x.len())?;
    let denom = norm_sq(x_hat);
    if denom == 0.0 {
        return Err(Error::ZeroVector);
    }
    let num: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(num / denom)
}

/// `10 log10(sum x_i^2 / sum (x_i - x_ref_i)^2)`, with the current iterate's
/// energy in the numerator. Returns `f64::INFINITY` when the error energy
/// underflows.
pub fn snr(x: &[f64], x_ref: &[f64]) -> Result<f64> {
    check_len("snr", x_ref.len(), x.len())?;
    let err: f64 = x.iter().zip(x_ref).map(|(a, b)| (a - b) * (a - b)).sum();
    if err < SNR_FLOOR {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (norm_sq(x) / err).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rse_examples() {
        let x_hat = [1.0, 0.0, -2.0];
        assert_eq!(rse(&x_hat, &x_hat).unwrap(), 0.0);
        assert_eq!(rse(&[0.0; 3], &x_hat).unwrap(), 1.0);
        assert_eq!(rse(&[2.0, 0.0, -4.0], &x_hat).unwrap(), 1.0);
        assert!(matches!(rse(&[1.0], &[0.0]), Err(Error::ZeroVector)));
        assert!(rse(&[1.0, 1.0, 1.0], &x_hat).unwrap() > 0.0);
    }

    #[test]
    fn snr_examples() {
        // sum x^2 = 100, sum (x - x_ref)^2 = 1
        let v = snr(&[10.0, 0.0], &[9.0, 0.0]).unwrap();
        assert!((v - 20.0).abs() < 1e-12);
        assert_eq!(snr(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), f64::INFINITY);
        // equal signal and error energies
        assert!(snr(&[1.0, 0.0], &[2.0, 0.0]).unwrap().abs() < 1e-12);
        // x = 2 x_ref: ratio 4
        let v = snr(&[2.0, -4.0], &[1.0, -2.0]).unwrap();
        assert!((v - 10.0 * 4f64.log10()).abs() < 1e-12);
    }
}
