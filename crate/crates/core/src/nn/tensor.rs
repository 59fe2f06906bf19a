use super::NnError;

/// Dense row-major array of `f64` with a paired gradient buffer.
///
/// The gradient buffer is materialized lazily: activations flowing through
/// the network never allocate one, parameters allocate it on first use.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            values: vec![0.0; len],
            grad: Vec::new(),
        }
    }

    pub fn from_vec(shape: &[usize], values: Vec<f64>) -> Result<Self, NnError> {
        let len: usize = shape.iter().product();
        if len != values.len() {
            return Err(NnError::Shape(format!(
                "shape {shape:?} needs {len} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            values,
            grad: Vec::new(),
        })
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Self {
            shape: vec![values.len()],
            values,
            grad: Vec::new(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Leading extent; 1 for scalars and vectors are treated as a single row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 | 1 => 1,
            _ => self.shape[0],
        }
    }

    /// Extent of the trailing axis.
    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.values[i * c..(i + 1) * c]
    }

    pub fn has_grad(&self) -> bool {
        !self.grad.is_empty()
    }

    /// Gradient buffer; empty slice when it was never materialized.
    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        self.materialize_grad();
        &mut self.grad
    }

    /// Split borrow: read values while accumulating into the gradient.
    pub fn parts_mut(&mut self) -> (&[f64], &mut [f64]) {
        self.materialize_grad();
        (&self.values, &mut self.grad)
    }

    /// `values -= lr * scale * grad`; no-op without a gradient buffer.
    pub fn descend(&mut self, lr: f64, scale: f64) {
        if self.grad.len() == self.values.len() {
            for (v, g) in self.values.iter_mut().zip(&self.grad) {
                *v -= lr * (g * scale);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    fn materialize_grad(&mut self) {
        if self.grad.len() != self.values.len() {
            self.grad = vec![0.0; self.values.len()];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::from_vec(&[2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!((t.rows(), t.cols()), (2, 3));
    }

    #[test]
    fn grad_is_lazy_and_same_shape() {
        let mut t = Tensor::zeros(&[4, 2]);
        assert!(!t.has_grad());
        t.grad_mut()[3] = 1.5;
        assert_eq!(t.grad().len(), 8);
        t.zero_grad();
        assert!(t.grad().iter().all(|&g| g == 0.0));
    }
}
