//! Row-major dense tensors with arbitrary mode sizes (internal helper).

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dense {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    /// Sizes of the blocks before and after `mode` in row-major order.
    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let outer = self.shape[..mode].iter().product();
        let inner = self.shape[mode + 1..].iter().product();
        (outer, self.shape[mode], inner)
    }

    /// `out[.., i, ..] = sum_a m[(i, a)] * self[.., a, ..]` along `mode`.
    pub fn mode_mul(&self, mode: usize, m: &DMatrix<f64>) -> Dense {
        let (outer, len, inner) = self.split(mode);
        debug_assert_eq!(m.ncols(), len);
        let rows = m.nrows();
        let mut data = vec![0.0; outer * rows * inner];
        for o in 0..outer {
            let src = &self.data[o * len * inner..(o + 1) * len * inner];
            let dst = &mut data[o * rows * inner..(o + 1) * rows * inner];
            for i in 0..rows {
                let out_row = &mut dst[i * inner..(i + 1) * inner];
                for a in 0..len {
                    let w = m[(i, a)];
                    if w == 0.0 {
                        continue;
                    }
                    let in_row = &src[a * inner..(a + 1) * inner];
                    for (d, s) in out_row.iter_mut().zip(in_row) {
                        *d += w * s;
                    }
                }
            }
        }
        let mut shape = self.shape.clone();
        shape[mode] = rows;
        Dense { shape, data }
    }

    /// Contracts `mode` with a vector, removing that mode.
    pub fn contract_mode(&self, mode: usize, v: &[f64]) -> Dense {
        let (outer, len, inner) = self.split(mode);
        debug_assert_eq!(v.len(), len);
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            let src = &self.data[o * len * inner..(o + 1) * len * inner];
            let dst = &mut data[o * inner..(o + 1) * inner];
            for (a, w) in v.iter().enumerate() {
                for (d, s) in dst.iter_mut().zip(&src[a * inner..(a + 1) * inner]) {
                    *d += w * s;
                }
            }
        }
        let mut shape = self.shape.clone();
        shape.remove(mode);
        Dense { shape, data }
    }

    /// Gram matrix `X_(mode) X_(mode)^T` of the mode unfolding.
    pub fn unfold_gram(&self, mode: usize) -> DMatrix<f64> {
        let (outer, len, inner) = self.split(mode);
        let mut g = DMatrix::zeros(len, len);
        for o in 0..outer {
            let blk = &self.data[o * len * inner..(o + 1) * len * inner];
            for a in 0..len {
                for b in a..len {
                    let s: f64 = blk[a * inner..(a + 1) * inner]
                        .iter()
                        .zip(&blk[b * inner..(b + 1) * inner])
                        .map(|(x, y)| x * y)
                        .sum();
                    g[(a, b)] += s;
                }
            }
        }
        for a in 0..len {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }

    /// Mode unfolding as a `shape[mode] x rest` matrix.
    pub fn unfold(&self, mode: usize) -> DMatrix<f64> {
        let (outer, len, inner) = self.split(mode);
        DMatrix::from_fn(len, outer * inner, |a, col| {
            let (o, i) = (col / inner, col % inner);
            self.data[(o * len + a) * inner + i]
        })
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }
}
