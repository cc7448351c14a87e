//! One set of training steps, two executions: over packed ciphertexts and
//! over plain h x h images. Both follow the same floating-point operation
//! order, so in exact noise mode they agree bit for bit.

use crate::approx::{app_sign, ensure_level, eval_composite_power, CompositePolySpec, SmoothFit};
use crate::engine::{Bootstrapper, CryptoContext};
use crate::error::Result;
use crate::matrix::{
    hadamard, he_mat_mult, he_rect_mat_mult, he_transpose, mu, phi, pi, slot_image, zeta, Matrix,
    PackedMatrix, MATMUL_DEPTH_A, MATMUL_DEPTH_B,
};

/// Operations the training step needs. Every product is followed by a
/// rescale; ciphertext operands are refreshed on demand.
pub trait Algebra {
    type V: Clone;

    /// `a * b` where `a` holds `t`-row blocks replicated down the image.
    fn rect(&self, a: &Self::V, b: &Self::V, t: usize) -> Result<Self::V>;
    fn transpose(&self, a: &Self::V) -> Result<Self::V>;
    fn add(&self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn sub(&self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn mul(&self, a: &Self::V, b: &Self::V) -> Result<Self::V>;
    fn mul_plain(&self, a: &Self::V, m: &Matrix) -> Result<Self::V>;
    fn scale(&self, a: &Self::V, c: f64) -> Result<Self::V>;
    fn add_const(&self, a: &Self::V, c: f64) -> Result<Self::V>;
    fn sign(&self, a: &Self::V, spec: &CompositePolySpec) -> Result<Self::V>;
    fn poly(&self, a: &Self::V, fit: &SmoothFit) -> Result<Self::V>;
    fn refresh(&self, a: &Self::V) -> Result<Self::V>;
}

/// Ciphertext execution on one party's (or the server's) context.
pub struct CipherAlgebra<'a> {
    pub ctx: &'a CryptoContext,
    pub boot: &'a dyn Bootstrapper,
}

impl CipherAlgebra<'_> {
    fn need(&self, a: &PackedMatrix, level: u32, op: &'static str) -> Result<PackedMatrix> {
        if a.level() >= level {
            return Ok(a.clone());
        }
        Ok(a.with_ct(ensure_level(self.ctx, &a.ct, level, Some(self.boot), op)?))
    }

    fn square(a: &PackedMatrix) -> PackedMatrix {
        PackedMatrix {
            rows_t: a.dim_h,
            ..a.clone()
        }
    }
}

impl Algebra for CipherAlgebra<'_> {
    type V = PackedMatrix;

    fn rect(&self, a: &PackedMatrix, b: &PackedMatrix, t: usize) -> Result<PackedMatrix> {
        let a = self.need(a, MATMUL_DEPTH_A, "rect")?;
        let b = Self::square(&self.need(b, MATMUL_DEPTH_B, "rect")?);
        if t == a.dim_h {
            he_mat_mult(self.ctx, &Self::square(&a), &b)
        } else {
            let a = PackedMatrix { rows_t: t, ..a };
            he_rect_mat_mult(self.ctx, &a, &b)
        }
    }

    fn transpose(&self, a: &PackedMatrix) -> Result<PackedMatrix> {
        let a = self.need(a, 1, "transpose")?;
        he_transpose(self.ctx, &Self::square(&a))
    }

    fn add(&self, a: &PackedMatrix, b: &PackedMatrix) -> Result<PackedMatrix> {
        Ok(a.with_ct(self.ctx.add(&a.ct, &b.ct)?))
    }

    fn sub(&self, a: &PackedMatrix, b: &PackedMatrix) -> Result<PackedMatrix> {
        Ok(a.with_ct(self.ctx.sub(&a.ct, &b.ct)?))
    }

    fn mul(&self, a: &PackedMatrix, b: &PackedMatrix) -> Result<PackedMatrix> {
        let a = self.need(a, 1, "mul")?;
        let b = self.need(b, 1, "mul")?;
        let p = self.ctx.mul_ct(&a.ct, &b.ct)?;
        Ok(a.with_ct(self.ctx.rescale(&p)?))
    }

    fn mul_plain(&self, a: &PackedMatrix, m: &Matrix) -> Result<PackedMatrix> {
        let a = self.need(a, 1, "mul_plain")?;
        let s = self.ctx.slot_count() / (a.dim_h * a.dim_h);
        let lanes = vec![m.clone(); s];
        let pt = self
            .ctx
            .encode(&slot_image(self.ctx.slot_count(), a.dim_h, &lanes)?)?;
        let p = self.ctx.mul_pt(&a.ct, &pt)?;
        Ok(a.with_ct(self.ctx.rescale(&p)?))
    }

    fn scale(&self, a: &PackedMatrix, c: f64) -> Result<PackedMatrix> {
        let a = self.need(a, 1, "scale")?;
        let p = self.ctx.mul_pt(&a.ct, &self.ctx.constant(c))?;
        Ok(a.with_ct(self.ctx.rescale(&p)?))
    }

    fn add_const(&self, a: &PackedMatrix, c: f64) -> Result<PackedMatrix> {
        Ok(a.with_ct(self.ctx.add_pt(&a.ct, &self.ctx.constant(c))?))
    }

    fn sign(&self, a: &PackedMatrix, spec: &CompositePolySpec) -> Result<PackedMatrix> {
        Ok(a.with_ct(app_sign(self.ctx, &a.ct, spec, Some(self.boot))?))
    }

    fn poly(&self, a: &PackedMatrix, fit: &SmoothFit) -> Result<PackedMatrix> {
        let a = self.need(a, fit.depth(), "poly")?;
        Ok(a.with_ct(fit.eval_ct(self.ctx, &a.ct)?))
    }

    fn refresh(&self, a: &PackedMatrix) -> Result<PackedMatrix> {
        Ok(a.with_ct(self.boot.bootstrap(self.ctx, &a.ct)?))
    }
}

/// Plaintext execution on h x h images. With `exact` set, the sign and
/// smooth-function steps use the true functions instead of polynomials.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlainAlgebra {
    pub exact: bool,
}

fn zip(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| f(a.get(i, j), b.get(i, j)))
}

fn exact_sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Algebra for PlainAlgebra {
    type V = Matrix;

    fn rect(&self, a: &Matrix, b: &Matrix, t: usize) -> Result<Matrix> {
        let h = a.rows();
        let (a0, b0) = (mu(a), zeta(b));
        let mut acc = hadamard(&a0, &b0);
        for k in 1..t {
            let term = hadamard(&phi(&a0, k), &pi(&b0, k));
            acc = zip(&acc, &term, |x, y| x + y);
        }
        let mut span = t;
        while span < h {
            acc = zip(&acc, &pi(&acc, span), |x, y| x + y);
            span *= 2;
        }
        Ok(acc)
    }

    fn transpose(&self, a: &Matrix) -> Result<Matrix> {
        Ok(a.transpose())
    }

    fn add(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        Ok(zip(a, b, |x, y| x + y))
    }

    fn sub(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        Ok(zip(a, b, |x, y| x - y))
    }

    fn mul(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        Ok(zip(a, b, |x, y| x * y))
    }

    fn mul_plain(&self, a: &Matrix, m: &Matrix) -> Result<Matrix> {
        Ok(zip(a, m, |x, y| x * y))
    }

    fn scale(&self, a: &Matrix, c: f64) -> Result<Matrix> {
        Ok(a.map(|x| x * c))
    }

    fn add_const(&self, a: &Matrix, c: f64) -> Result<Matrix> {
        Ok(a.map(|x| x + c))
    }

    fn sign(&self, a: &Matrix, spec: &CompositePolySpec) -> Result<Matrix> {
        Ok(if self.exact {
            a.map(exact_sign)
        } else {
            a.map(|x| eval_composite_power(x, spec))
        })
    }

    fn poly(&self, a: &Matrix, fit: &SmoothFit) -> Result<Matrix> {
        Ok(if self.exact {
            a.map(|x| fit.target.eval(x))
        } else {
            a.map(|x| fit.eval(x))
        })
    }

    fn refresh(&self, a: &Matrix) -> Result<Matrix> {
        Ok(a.clone())
    }
}
