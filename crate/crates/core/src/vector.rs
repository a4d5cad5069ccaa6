//! Value-semantic dense vectors.

use crate::float;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector { data: vec![0.0; n] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Vector { data: s.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        float::sqrt(self.norm_sq())
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(float::abs(*v)))
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector {
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector {
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Vector {
        Vector {
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: f64, other: &Vector) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// `a * x + (1 - a) * y`
    pub fn convex_comb(a: f64, x: &Vector, y: &Vector) -> Vector {
        debug_assert_eq!(x.len(), y.len());
        Vector {
            data: x
                .data
                .iter()
                .zip(y.data.iter())
                .map(|(xi, yi)| a * xi + (1.0 - a) * yi)
                .collect(),
        }
    }

    /// Concatenation, used to assemble stacked analysis vectors.
    pub fn concat(parts: &[&Vector]) -> Vector {
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Vector { data }
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector { data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_norms() {
        let x = Vector::from_slice(&[3.0, 4.0]);
        assert_eq!(x.dot(&x), 25.0);
        assert_eq!(x.norm(), 5.0);
        assert_eq!(x.norm_inf(), 4.0);
    }

    #[test]
    fn convex_comb_endpoints() {
        let x = Vector::from_slice(&[1.0, 2.0]);
        let y = Vector::from_slice(&[5.0, -2.0]);
        assert_eq!(Vector::convex_comb(1.0, &x, &y), x);
        assert_eq!(Vector::convex_comb(0.0, &x, &y), y);
    }

    #[test]
    fn axpy_updates_in_place() {
        let mut x = Vector::from_slice(&[1.0, 1.0]);
        let y = Vector::from_slice(&[2.0, -1.0]);
        x.axpy(0.5, &y);
        assert_eq!(x.as_slice(), &[2.0, 0.5]);
    }
}
