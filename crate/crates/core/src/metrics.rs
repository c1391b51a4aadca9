//! Error metrics for comparing low-precision outputs to references.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Floor substituted for MERE values of zero before geometric aggregation.
pub const MERE_FLOOR: f64 = 1e-6;

/// Mean element-wise relative error of `out` against `ref_`.
///
/// Each element contributes `|out - ref| / max(|ref|, ref_floor)` with
/// `ref_floor = 1e-6 * mean(|ref|)`, guarding near-zero references; the sum
/// is divided by the element count.
pub fn mere(out: &Matrix<f32>, ref_: &Matrix<f32>) -> Result<f64> {
    if out.shape() != ref_.shape() {
        return Err(Error::shape(
            "mere",
            format!("{:?}", ref_.shape()),
            format!("{:?}", out.shape()),
        ));
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("mere"));
    }
    let count = ref_.len() as f64;
    let mean_abs = ref_
        .as_slice()
        .iter()
        .map(|&v| (v as f64).abs())
        .sum::<f64>()
        / count;
    let floor = 1e-6 * mean_abs;
    let sum: f64 = out
        .as_slice()
        .iter()
        .zip(ref_.as_slice())
        .map(|(&o, &r)| {
            let denom = (r as f64).abs().max(floor);
            if denom == 0.0 {
                // all-zero reference: absolute deviation
                (o as f64 - r as f64).abs()
            } else {
                (o as f64 - r as f64).abs() / denom
            }
        })
        .sum();
    Ok(sum / count)
}

/// Geometric mean `exp(mean(log v))`; zeros are floored at [`MERE_FLOOR`].
pub fn geomean_mere(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("geomean_mere"));
    }
    let log_sum: f64 = values
        .iter()
        .map(|&v| {
            assert!(v >= 0.0 && v.is_finite(), "MERE values must be finite and >= 0");
            v.max(MERE_FLOOR).ln()
        })
        .sum();
    Ok((log_sum / values.len() as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_matrices_have_zero_error() {
        let m = Matrix::from_vec(2, 2, vec![1.0f32, -2.0, 3.0, 0.5]);
        assert_eq!(mere(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn uniform_relative_deviation() {
        let r = Matrix::from_vec(2, 2, vec![1.0f32, -2.0, 4.0, 8.0]);
        let out = r.map(|v| v * 1.1);
        let e = mere(&out, &r).unwrap();
        assert!((e - 0.1).abs() < 1e-6, "mere {e}");
    }

    #[test]
    fn zero_reference_element_stays_finite() {
        let r = Matrix::from_vec(1, 3, vec![1.0f32, 0.0, 2.0]);
        let out = Matrix::from_vec(1, 3, vec![1.0f32, 0.5, 2.0]);
        let e = mere(&out, &r).unwrap();
        assert!(e.is_finite());
        // the zero-ref element is divided by 1e-6 * mean(|ref|) = 1e-6
        let expect = (0.5 / 1e-6) / 3.0;
        assert!((e - expect).abs() / expect < 1e-9);
    }

    #[test]
    fn scale_invariance_above_floor() {
        let r = Matrix::from_vec(1, 4, vec![1.0f32, -3.0, 2.5, 10.0]);
        let out = Matrix::from_vec(1, 4, vec![1.01f32, -2.9, 2.6, 10.4]);
        let e1 = mere(&out, &r).unwrap();
        let e2 = mere(&out.map(|v| v * 16.0), &r.map(|v| v * 16.0)).unwrap();
        assert!((e1 - e2).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Matrix::<f32>::zeros(2, 2);
        let b = Matrix::<f32>::zeros(2, 3);
        assert!(mere(&a, &b).is_err());
    }

    #[test]
    fn geomean_basics() {
        assert_eq!(geomean_mere(&[0.37]).unwrap(), 0.37);
        let g = geomean_mere(&[1.0, 4.0]).unwrap();
        assert!((g - 2.0).abs() < 1e-12);
        assert!(geomean_mere(&[]).is_err());
    }

    #[test]
    fn geomean_of_reference_fixture() {
        // directly computed: exp(mean(ln[0.03, 0.47, 0.49, 0.48]))
        let g = geomean_mere(&[0.03, 0.47, 0.49, 0.48]).unwrap();
        let direct = (0.03f64.ln() + 0.47f64.ln() + 0.49f64.ln() + 0.48f64.ln()) / 4.0;
        assert!((g - direct.exp()).abs() < 1e-15);
        assert!((g - 0.239_973_954).abs() < 1e-6, "geomean {g}");
    }

    #[test]
    fn geomean_floors_zeros() {
        let g = geomean_mere(&[0.0, 1.0]).unwrap();
        assert!((g - (MERE_FLOOR).sqrt()).abs() < 1e-12);
    }
}
