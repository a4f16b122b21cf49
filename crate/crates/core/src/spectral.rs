//! Orthonormal DCT-II basis over the time axis of fixed-length sequences.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("InvalidLength: sequence length must be positive")]
    InvalidLength,
    #[error("LengthMismatch: expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("EmptyHistory: cannot pad an empty history")]
    EmptyHistory,
}

/// Row-major `L × L` orthonormal basis; row `l` holds coefficient `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DctBasis {
    len: usize,
    matrix: Vec<f64>,
}

static CACHE: Lazy<Mutex<HashMap<usize, Arc<DctBasis>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

impl DctBasis {
    pub fn new(len: usize) -> Result<Self, SpectralError> {
        if len == 0 {
            return Err(SpectralError::InvalidLength);
        }
        let scale = (2.0 / len as f64).sqrt();
        // Constant row folded into one square root so L=1 and L=4 come out exact.
        let scale0 = (1.0 / len as f64).sqrt();
        let mut matrix = vec![0.0; len * len];
        for l in 0..len {
            let row_scale = if l == 0 { scale0 } else { scale };
            for t in 0..len {
                let angle = std::f64::consts::PI / (2.0 * len as f64) * (2 * t + 1) as f64 * l as f64;
                matrix[l * len + t] = row_scale * angle.cos();
            }
        }
        Ok(Self { len, matrix })
    }

    /// Shared basis for `len`, built once per process.
    pub fn cached(len: usize) -> Result<Arc<Self>, SpectralError> {
        let mut cache = CACHE.lock().expect("dct cache poisoned");
        if let Some(b) = cache.get(&len) {
            return Ok(b.clone());
        }
        let basis = Arc::new(Self::new(len)?);
        cache.insert(len, basis.clone());
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn at(&self, l: usize, t: usize) -> f64 {
        self.matrix[l * self.len + t]
    }

    /// Row-major entries, `C[l][t]`.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, SpectralError> {
        self.check(x.len())?;
        Ok((0..self.len)
            .map(|l| self.matrix[l * self.len..(l + 1) * self.len].iter().zip(x).map(|(c, v)| c * v).sum())
            .collect())
    }

    pub fn inverse(&self, h: &[f64]) -> Result<Vec<f64>, SpectralError> {
        self.check(h.len())?;
        Ok((0..self.len).map(|t| (0..self.len).map(|l| self.at(l, t) * h[l]).sum()).collect())
    }

    fn check(&self, n: usize) -> Result<(), SpectralError> {
        if n != self.len {
            return Err(SpectralError::LengthMismatch { expected: self.len, actual: n });
        }
        Ok(())
    }
}

pub fn dct(x: &[f64]) -> Result<Vec<f64>, SpectralError> {
    DctBasis::cached(x.len())?.forward(x)
}

pub fn idct(h: &[f64]) -> Result<Vec<f64>, SpectralError> {
    DctBasis::cached(h.len())?.inverse(h)
}

/// Extends a history to `history.len() + future` frames by repeating the last frame.
pub fn pad_history<T: Clone>(history: &[T], future: usize) -> Result<Vec<T>, SpectralError> {
    let last = history.last().ok_or(SpectralError::EmptyHistory)?;
    let mut out = history.to_vec();
    out.extend(std::iter::repeat(last.clone()).take(future));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal() {
        let h = dct(&[1.0; 4]).unwrap();
        assert!((h[0] - 2.0).abs() < 1e-12);
        assert!(h[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn single_sample_is_identity() {
        assert_eq!(dct(&[3.5]).unwrap(), vec![3.5]);
    }

    #[test]
    fn errors() {
        assert_eq!(dct(&[]), Err(SpectralError::InvalidLength));
        let b = DctBasis::new(3).unwrap();
        assert_eq!(b.forward(&[1.0]), Err(SpectralError::LengthMismatch { expected: 3, actual: 1 }));
        assert_eq!(pad_history::<f64>(&[], 2), Err(SpectralError::EmptyHistory));
    }

    #[test]
    fn padding_repeats_last() {
        assert_eq!(pad_history(&[1, 2, 3], 2).unwrap(), vec![1, 2, 3, 3, 3]);
    }

    #[test]
    fn round_trip() {
        let x: Vec<f64> = (0..45).map(|i| (i as f64 * 0.37).sin() + 0.01 * i as f64).collect();
        let back = idct(&dct(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
