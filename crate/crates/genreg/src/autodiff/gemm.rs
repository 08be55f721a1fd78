//! Thin safe wrapper over `matrixmultiply::dgemm` for row-major matrices
//! with optional logical transposes. All dense and im2col paths funnel
//! through here.

/// Row-major matrix view; `trans` means the logical matrix is the
/// transpose of the stored one.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [f64],
    pub stored_rows: usize,
    pub stored_cols: usize,
    pub trans: bool,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        MatRef {
            data,
            stored_rows: rows,
            stored_cols: cols,
            trans: false,
        }
    }

    pub fn t(mut self) -> Self {
        self.trans = !self.trans;
        self
    }

    pub fn rows(&self) -> usize {
        if self.trans {
            self.stored_cols
        } else {
            self.stored_rows
        }
    }

    pub fn cols(&self) -> usize {
        if self.trans {
            self.stored_rows
        } else {
            self.stored_cols
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.trans {
            (1, self.stored_cols as isize)
        } else {
            (self.stored_cols as isize, 1)
        }
    }
}

/// c = alpha * a * b + beta * c, with c row-major (rows x cols).
pub(crate) fn gemm(alpha: f64, a: MatRef, b: MatRef, beta: f64, c: &mut [f64]) {
    let (m, ka) = (a.rows(), a.cols());
    let (kb, n) = (b.rows(), b.cols());
    assert_eq!(ka, kb, "gemm inner dimensions {} vs {}", ka, kb);
    assert_eq!(c.len(), m * n, "gemm output buffer size");
    if m == 0 || n == 0 {
        return;
    }
    if ka == 0 {
        for v in c.iter_mut() {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    unsafe {
        matrixmultiply::dgemm(
            m,
            ka,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
