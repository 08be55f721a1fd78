//! Compressed-sensing forward model: a dense Gaussian random matrix
//! applied to the flattened image.

use crate::error::Result;
use crate::operators::{check_shape, LinearOperator};
use crate::rng::{rng_from_seed, standard_normal};
use crate::tensor::Tensor;

pub struct SensingOp {
    /// Row-major (m, n); `None` for the identity test hook.
    matrix: Option<Tensor>,
    m: usize,
    in_shape: Vec<usize>,
    out_shape: Vec<usize>,
}

/// Measurement matrix with i.i.d. N(0, 1/m) entries, reproducible from
/// `(m, image_shape, seed)`.
pub fn gaussian_sensing(m: usize, image_shape: (usize, usize), seed: u64) -> SensingOp {
    let n = image_shape.0 * image_shape.1;
    let mut rng = rng_from_seed(seed);
    let matrix = standard_normal(&[m, n], &mut rng).scale(1.0 / (m as f64).sqrt());
    SensingOp {
        matrix: Some(matrix),
        m,
        in_shape: vec![image_shape.0, image_shape.1],
        out_shape: vec![m],
    }
}

impl SensingOp {
    /// Identity override: `apply` flattens, `adjoint` reshapes back.
    pub fn identity(image_shape: (usize, usize)) -> SensingOp {
        let n = image_shape.0 * image_shape.1;
        SensingOp {
            matrix: None,
            m: n,
            in_shape: vec![image_shape.0, image_shape.1],
            out_shape: vec![n],
        }
    }

    pub fn measurements(&self) -> usize {
        self.m
    }
}

impl LinearOperator for SensingOp {
    fn in_shape(&self) -> &[usize] {
        &self.in_shape
    }

    fn out_shape(&self) -> &[usize] {
        &self.out_shape
    }

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        check_shape("sensing apply", &self.in_shape, x)?;
        let n = x.numel();
        match &self.matrix {
            None => x.reshape(&[n]),
            Some(a) => {
                let mut out = vec![0.0; self.m];
                for (i, row) in a.data().chunks_exact(n).enumerate() {
                    out[i] = row.iter().zip(x.data()).map(|(&r, &v)| r * v).sum();
                }
                Tensor::new(vec![self.m], out)
            }
        }
    }

    fn adjoint(&self, y: &Tensor) -> Result<Tensor> {
        check_shape("sensing adjoint", &self.out_shape, y)?;
        match &self.matrix {
            None => y.reshape(&self.in_shape),
            Some(a) => {
                let n: usize = self.in_shape.iter().product();
                let mut out = vec![0.0; n];
                for (i, row) in a.data().chunks_exact(n).enumerate() {
                    let yi = y.data()[i];
                    if yi != 0.0 {
                        for (o, &r) in out.iter_mut().zip(row) {
                            *o += r * yi;
                        }
                    }
                }
                Tensor::new(self.in_shape.clone(), out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::test_util::{adjoint_test, linearity_test};

    #[test]
    fn identity_override_applies_identity() {
        let op = SensingOp::identity((4, 4));
        let x = standard_normal(&[4, 4], &mut rng_from_seed(1));
        let y = op.apply(&x).unwrap();
        assert_eq!(y.data(), x.data());
        let back = op.adjoint(&y).unwrap();
        assert_eq!(back.shape(), &[4, 4]);
        assert_eq!(back.data(), x.data());
    }

    #[test]
    fn column_norms_concentrate_near_one() {
        // entries ~ N(0, 1/m) so each column has expected squared norm 1
        let m = 150;
        let op = gaussian_sensing(m, (10, 10), 33);
        let a = op.matrix.as_ref().unwrap();
        let n = 100;
        let mut mean = 0.0;
        for j in 0..n {
            let mut s = 0.0;
            for i in 0..m {
                let v = a.data()[i * n + j];
                s += v * v;
            }
            mean += s.sqrt();
        }
        mean /= n as f64;
        assert!((mean - 1.0).abs() < 0.1, "mean column norm {mean}");
    }

    #[test]
    fn reproducible_from_seed() {
        let a = gaussian_sensing(20, (6, 6), 7);
        let b = gaussian_sensing(20, (6, 6), 7);
        assert_eq!(
            a.matrix.as_ref().unwrap().data(),
            b.matrix.as_ref().unwrap().data()
        );
    }

    #[test]
    fn adjoint_and_linearity_identities() {
        let op = gaussian_sensing(40, (8, 8), 11);
        assert!(adjoint_test(&op, 100, 6) <= 1e-8);
        assert!(linearity_test(&op, 20, 6) <= 1e-10);
    }
}
