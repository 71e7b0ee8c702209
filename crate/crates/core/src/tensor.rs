//! Dense row-major f64 tensors of rank 1 or 2, just enough for the models here.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::domain(format!(
                "shape {shape:?} does not hold {} values",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Xavier (Glorot) uniform initialisation of a `rows x cols` matrix.
    pub fn xavier(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
        Tensor {
            shape: vec![rows, cols],
            data,
        }
    }

    pub fn uniform(shape: &[usize], bound: f64, rng: &mut Rng) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(|_| rng.random_range(-bound..=bound)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() > 1 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    /// `out += self * x`
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        let c = self.cols();
        debug_assert_eq!(x.len(), c);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(c)) {
            *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.matvec_acc(x, &mut out);
        out
    }

    /// `out += self^T * g`
    pub fn matvec_t_acc(&self, g: &[f64], out: &mut [f64]) {
        let c = self.cols();
        for (&gi, row) in g.iter().zip(self.data.chunks_exact(c)) {
            if gi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += gi * a;
            }
        }
    }

    /// `self += g x^T`
    pub fn add_outer(&mut self, g: &[f64], x: &[f64]) {
        let c = self.cols();
        for (&gi, row) in g.iter().zip(self.data.chunks_exact_mut(c)) {
            if gi == 0.0 {
                continue;
            }
            for (r, xv) in row.iter_mut().zip(x) {
                *r += gi * xv;
            }
        }
    }

    pub fn add_assign(&mut self, other: &[f64]) {
        for (a, b) in self.data.iter_mut().zip(other) {
            *a += b;
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Parameter containers that expose their tensors by name, in a fixed order.
pub trait Parameters {
    fn named(&self) -> Vec<(&'static str, &Tensor)>;
    fn named_mut(&mut self) -> Vec<(&'static str, &mut Tensor)>;

    fn norm_sq(&self) -> f64 {
        self.named().iter().map(|(_, t)| t.norm_sq()).sum()
    }

    fn count(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }
}
