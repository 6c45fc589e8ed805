//! Scalar abstraction shared by the exact-capable parts of the crate.
//!
//! Polyhedral routines are written once against [`Scalar`] and run on
//! `f64`, `f32` or exact [`Rational`] arithmetic. Floating types carry a
//! tolerance for rank and sign decisions; rationals decide exactly.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

/// Exact rational scalar.
pub type Rational = BigRational;

pub trait Scalar: Clone + Debug + PartialOrd + Signed + FromPrimitive + ToPrimitive + 'static {
    /// Tolerance used when no explicit one is given. Zero for exact types.
    fn default_tolerance() -> Self;

    /// Lossy conversion from `f64`. Exact for rationals (every finite double is a dyadic rational).
    fn from_f64_lossy(v: f64) -> Self;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Norm used to normalize direction vectors: Euclidean for floats, max-abs for rationals.
    fn direction_norm(v: &[Self]) -> Self;

    /// Whether `|self| <= tol`.
    fn is_negligible(&self, tol: &Self) -> bool {
        self.abs() <= *tol
    }
}

impl Scalar for f64 {
    fn default_tolerance() -> Self {
        1e-9
    }
    fn from_f64_lossy(v: f64) -> Self {
        v
    }
    fn direction_norm(v: &[Self]) -> Self {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Scalar for f32 {
    fn default_tolerance() -> Self {
        1e-5
    }
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
    fn direction_norm(v: &[Self]) -> Self {
        v.iter().map(|x| x * x).sum::<f32>().sqrt()
    }
}

impl Scalar for Rational {
    fn default_tolerance() -> Self {
        Rational::zero()
    }
    fn from_f64_lossy(v: f64) -> Self {
        Rational::from_float(v).unwrap_or_else(|| Rational::from_integer(BigInt::zero()))
    }
    fn direction_norm(v: &[Self]) -> Self {
        v.iter()
            .map(|x| x.abs())
            .fold(Rational::zero(), |acc, x| if x > acc { x } else { acc })
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Scales `v` to unit [`Scalar::direction_norm`]; leaves zero vectors untouched.
pub(crate) fn normalize<T: Scalar>(v: &mut [T]) {
    let n = T::direction_norm(v);
    if !n.is_zero() {
        for x in v.iter_mut() {
            *x = x.clone() / n.clone();
        }
    }
}

/// Basis of the null space of `rows` (each of length `dim`) by Gauss-Jordan elimination.
///
/// Returns `(basis, rank)`; basis vectors are columns of the free-variable parametrization.
pub(crate) fn null_space<T: Scalar>(rows: &[Vec<T>], dim: usize, tol: &T) -> (Vec<Vec<T>>, usize) {
    let mut m: Vec<Vec<T>> = rows.to_vec();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..dim {
        if r >= m.len() {
            break;
        }
        let (best, best_val) = (r..m.len())
            .map(|i| (i, m[i][c].abs()))
            .fold((r, T::zero()), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        if best_val <= *tol || best_val.is_zero() {
            continue;
        }
        m.swap(r, best);
        let piv = m[r][c].clone();
        for x in m[r].iter_mut() {
            *x = x.clone() / piv.clone();
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..dim {
                    let v = m[r][j].clone();
                    m[i][j] = m[i][j].clone() - f.clone() * v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let mut basis = Vec::new();
    for free in (0..dim).filter(|c| !pivots.contains(c)) {
        let mut v = vec![T::zero(); dim];
        v[free] = T::one();
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -m[row][free].clone();
        }
        basis.push(v);
    }
    (basis, pivots.len())
}
