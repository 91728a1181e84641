//! Dense row-major arrays of f64, the carrier for observations, Q-values,
//! parameters, and gradients.

use crate::error::{CoreError, Result};

/// A dense multidimensional array in row-major order.
///
/// Invariant: `data.len()` equals the product of the shape extents.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Array {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(CoreError::config(format!(
                "array data length {} does not match shape {:?} (expected {})",
                data.len(),
                shape,
                expected
            )));
        }
        Ok(Array {
            shape: shape.to_vec(),
            data,
        })
    }

    /// 1-D array from a slice.
    pub fn vector(values: &[f64]) -> Self {
        Array {
            shape: vec![values.len()],
            data: values.to_vec(),
        }
    }

    /// Scalar wrapped as a one-element array.
    pub fn scalar(value: f64) -> Self {
        Array {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Number of rows when viewed as 2-D; a 1-D array is a single row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[..self.shape.len() - 1].iter().product(),
        }
    }

    /// Trailing extent (row width when viewed as 2-D).
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&0)
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.data[idx]
    }

    /// Reinterprets the data under a new shape of identical total length.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(CoreError::config(format!(
                "cannot reshape {} elements to {:?}",
                self.data.len(),
                shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(CoreError::numeric(format!("non-finite value in {context}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_length_mismatch() {
        assert!(Array::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Array::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn rows_and_cols() {
        let a = Array::zeros(&[4, 7]);
        assert_eq!(a.rows(), 4);
        assert_eq!(a.cols(), 7);
        let v = Array::vector(&[1.0, 2.0]);
        assert_eq!(v.rows(), 1);
        assert_eq!(v.cols(), 2);
    }

    #[test]
    fn finiteness_check() {
        let mut a = Array::zeros(&[2]);
        assert!(a.check_finite("test").is_ok());
        a.data_mut()[0] = f64::NAN;
        assert!(a.check_finite("test").is_err());
    }
}
