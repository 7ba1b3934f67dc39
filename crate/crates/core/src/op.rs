use num_complex::Complex64 as C64;

/// Linear operator with a matrix-free action, assumed Hermitian by the
/// propagators and expectation helpers built on top of it.
pub trait HermitianOp {
    fn dim(&self) -> usize;

    /// y = A x. Slices must both have length `dim`.
    fn apply(&self, x: &[C64], y: &mut [C64]);

    /// Real part of <x|A|x>; exactly the expectation value when A is
    /// Hermitian and x normalized.
    fn expectation(&self, x: &[C64]) -> f64 {
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply(x, &mut y);
        inner(x, &y).re
    }
}

impl<T: HermitianOp + ?Sized> HermitianOp for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        (**self).apply(x, y)
    }
}

/// Conjugate-linear inner product <a|b>.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// Euclidean norm.
pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Scale a vector to unit norm in place; returns the prior norm.
pub fn normalize(a: &mut [C64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        let inv = 1.0 / n;
        for z in a.iter_mut() {
            *z *= inv;
        }
    }
    n
}
