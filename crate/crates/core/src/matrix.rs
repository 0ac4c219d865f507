//! Dense square matrices in row-major order.

/// A dense square matrix of `f64` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    size: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    /// All-zero matrix of the given size.
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    /// Builds a matrix from a row-major data vector. Panics if the length is
    /// not `size * size`.
    pub fn from_row_major(size: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), size * size, "row-major data length mismatch");
        Self { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.size + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.size..(row + 1) * self.size]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.size..(row + 1) * self.size]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|` over all pairs.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.size {
            for j in (i + 1)..self.size {
                let gap = (self.get(i, j) - self.get(j, i)).abs();
                if gap > worst {
                    worst = gap;
                }
            }
        }
        worst
    }
}
