use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// A strided read-only view of a row-major buffer.
#[derive(Clone, Copy)]
pub struct View<'a, T> {
    pub(crate) data: &'a [T],
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) row_stride: isize,
    pub(crate) col_stride: isize,
}

impl<'a, T> View<'a, T> {
    pub fn new(data: &'a [T], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "view size");
        View { data, rows, cols, row_stride: cols as isize, col_stride: 1 }
    }

    pub fn t(self) -> Self {
        View {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
        }
    }
}

/// Floating-point element type of tensors: `f32` for training, `f64` for
/// gradient checking.
pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    const BITS: u32;

    /// `c = beta * c + a · b` for row-major `c` of shape `a.rows × b.cols`.
    fn gemm(a: View<'_, Self>, b: View<'_, Self>, c: &mut [Self], beta: Self);

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_scalar {
    ($t:ty, $bits:expr, $kernel:path) => {
        impl Scalar for $t {
            const BITS: u32 = $bits;

            fn gemm(a: View<'_, Self>, b: View<'_, Self>, c: &mut [Self], beta: Self) {
                assert_eq!(a.cols, b.rows, "gemm inner dimension");
                assert_eq!(c.len(), a.rows * b.cols, "gemm output size");
                if a.rows == 0 || b.cols == 0 {
                    return;
                }
                if a.cols == 0 {
                    c.iter_mut().for_each(|v| *v *= beta);
                    return;
                }
                // SAFETY: the views index within their slices (checked by
                // construction) and `c` holds exactly rows × cols elements.
                unsafe {
                    $kernel(
                        a.rows,
                        a.cols,
                        b.cols,
                        1.0,
                        a.data.as_ptr(),
                        a.row_stride,
                        a.col_stride,
                        b.data.as_ptr(),
                        b.row_stride,
                        b.col_stride,
                        beta,
                        c.as_mut_ptr(),
                        b.cols as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, 32, matrixmultiply::sgemm);
impl_scalar!(f64, 64, matrixmultiply::dgemm);
