//! Polyhedra in H- and V-representation, homogenization cones, and the
//! sliding-mode polytope of a switching domain.

mod dd;
mod sliding;

use std::cmp::Ordering;

use thiserror::Error;

use crate::scalar::{dot, Scalar};

pub use sliding::{sliding_polytope, sliding_rate_matrix, vertices};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolytopeError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("numerically ambiguous sign {value:e} on inequality row {row}")]
    Degenerate { row: usize, value: f64 },
    #[error("polyhedron is empty")]
    Empty,
    #[error("polyhedron is unbounded")]
    Unbounded,
}

/// `{x : A x ≤ b, E x = g}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolyhedron<T> {
    dim: usize,
    a: Vec<Vec<T>>,
    b: Vec<T>,
    e: Vec<Vec<T>>,
    g: Vec<T>,
}

impl<T: Scalar> HPolyhedron<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            a: Vec::new(),
            b: Vec::new(),
            e: Vec::new(),
            g: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn push_ineq(&mut self, row: Vec<T>, rhs: T) {
        assert_eq!(row.len(), self.dim, "inequality row width");
        self.a.push(row);
        self.b.push(rhs);
    }

    pub fn push_eq(&mut self, row: Vec<T>, rhs: T) {
        assert_eq!(row.len(), self.dim, "equality row width");
        self.e.push(row);
        self.g.push(rhs);
    }

    pub fn inequalities(&self) -> impl Iterator<Item = (&[T], &T)> {
        self.a.iter().map(Vec::as_slice).zip(&self.b)
    }

    pub fn equalities(&self) -> impl Iterator<Item = (&[T], &T)> {
        self.e.iter().map(Vec::as_slice).zip(&self.g)
    }

    pub fn n_inequalities(&self) -> usize {
        self.a.len()
    }

    pub fn n_equalities(&self) -> usize {
        self.e.len()
    }

    pub fn contains(&self, x: &[T], tol: &T) -> Result<bool, PolytopeError> {
        if x.len() != self.dim {
            return Err(PolytopeError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        let ineq_ok = self
            .inequalities()
            .all(|(row, rhs)| dot(row, x) - rhs.clone() <= *tol);
        let eq_ok = self
            .equalities()
            .all(|(row, rhs)| (dot(row, x) - rhs.clone()).abs() <= *tol);
        Ok(ineq_ok && eq_ok)
    }

    /// Double description on the homogenized cone.
    pub fn to_v(&self, tol: &T) -> Result<VPolyhedron<T>, PolytopeError> {
        let d = self.dim;
        // Cone rows in (x, t): b t − A x ≥ 0, then t ≥ 0 last so row indices match A.
        let mut rows: Vec<Vec<T>> = self
            .inequalities()
            .map(|(row, rhs)| {
                let mut r: Vec<T> = row.iter().map(|v| -v.clone()).collect();
                r.push(rhs.clone());
                r
            })
            .collect();
        let mut t_row = vec![T::zero(); d + 1];
        t_row[d] = T::one();
        rows.push(t_row);
        let eqs: Vec<Vec<T>> = self
            .equalities()
            .map(|(row, rhs)| {
                let mut r: Vec<T> = row.iter().map(|v| -v.clone()).collect();
                r.push(rhs.clone());
                r
            })
            .collect();
        let gens = dd::dd_cone(d + 1, &rows, &eqs, tol)?;
        let mut vertices = Vec::new();
        let mut rays = Vec::new();
        for y in &gens.rays {
            let t = y[d].clone();
            if t.is_negligible(tol) {
                rays.push(y[..d].to_vec());
            } else {
                vertices.push(y[..d].iter().map(|x| x.clone() / t.clone()).collect());
            }
        }
        if vertices.is_empty() {
            return Ok(VPolyhedron::empty(d));
        }
        for l in &gens.lineality {
            let dir = l[..d].to_vec();
            rays.push(dir.iter().map(|x| -x.clone()).collect());
            rays.push(dir);
        }
        Ok(VPolyhedron::new(d, vertices, rays, tol))
    }
}

/// `conv(V) + cone(R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VPolyhedron<T> {
    dim: usize,
    vertices: Vec<Vec<T>>,
    rays: Vec<Vec<T>>,
}

fn cmp_revlex<T: Scalar>(a: &[T], b: &[T], tol: &T) -> Ordering {
    for (x, y) in a.iter().zip(b).rev() {
        let diff = x.clone() - y.clone();
        if !diff.is_negligible(tol) {
            return if diff.is_positive() { Ordering::Greater } else { Ordering::Less };
        }
    }
    Ordering::Equal
}

fn dedup_sorted<T: Scalar>(mut v: Vec<Vec<T>>, tol: &T) -> Vec<Vec<T>> {
    v.sort_by(|a, b| cmp_revlex(a, b, tol));
    v.dedup_by(|a, b| cmp_revlex(a, b, tol) == Ordering::Equal);
    v
}

impl<T: Scalar> VPolyhedron<T> {
    /// Deduplicates, normalizes rays, and orders both lists with the last coordinate most significant.
    pub fn new(dim: usize, vertices: Vec<Vec<T>>, rays: Vec<Vec<T>>, tol: &T) -> Self {
        let rays: Vec<Vec<T>> = rays
            .into_iter()
            .filter(|r| !T::direction_norm(r).is_negligible(tol))
            .map(|mut r| {
                crate::scalar::normalize(&mut r);
                // Rationals normalize by max-abs; floats by Euclidean length.
                r.iter_mut().for_each(|x| {
                    if x.is_negligible(tol) {
                        *x = T::zero();
                    }
                });
                r
            })
            .collect();
        let vertices = vertices
            .into_iter()
            .map(|v| {
                v.into_iter()
                    .map(|x| if x.is_negligible(tol) { T::zero() } else { x })
                    .collect()
            })
            .collect();
        Self {
            dim,
            vertices: dedup_sorted(vertices, tol),
            rays: dedup_sorted(rays, tol),
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            vertices: Vec::new(),
            rays: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<T>] {
        &self.vertices
    }

    pub fn rays(&self) -> &[Vec<T>] {
        &self.rays
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Facets and affine hull via the dual cone of the homogenized generators.
    pub fn to_h(&self, tol: &T) -> Result<HPolyhedron<T>, PolytopeError> {
        if self.is_empty() {
            return Err(PolytopeError::Empty);
        }
        let d = self.dim;
        let gens: Vec<Vec<T>> = self
            .vertices
            .iter()
            .map(|v| {
                let mut g = v.clone();
                g.push(T::one());
                g
            })
            .chain(self.rays.iter().map(|r| {
                let mut g = r.clone();
                g.push(T::zero());
                g
            }))
            .collect();
        let dual = dd::dd_cone(d + 1, &gens, &[], tol)?;
        let mut h = HPolyhedron::new(d);
        // a · (x, 1) ≥ 0  ⇔  (−a_x) · x ≤ a_t.
        let split = |a: &[T]| -> Option<(Vec<T>, T)> {
            let mut row: Vec<T> = a[..d].iter().map(|x| -x.clone()).collect();
            let mut rhs = a[d].clone();
            let norm = T::direction_norm(&row);
            if norm.is_negligible(tol) {
                return None;
            }
            row.iter_mut().for_each(|x| *x = x.clone() / norm.clone());
            rhs = rhs / norm;
            Some((row, rhs))
        };
        for a in &dual.lineality {
            if let Some((row, rhs)) = split(a) {
                h.push_eq(row, rhs);
            }
        }
        for a in &dual.rays {
            if let Some((row, rhs)) = split(a) {
                h.push_ineq(row, rhs);
            }
        }
        Ok(h)
    }
}

/// Columns `(v, 1)` for each vertex followed by `(r, 0)` for each ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RayMatrix<T> {
    rows: usize,
    columns: Vec<Vec<T>>,
    n_vertices: usize,
}

impl<T: Scalar> RayMatrix<T> {
    pub fn from_v(v: &VPolyhedron<T>) -> Result<Self, PolytopeError> {
        if v.is_empty() {
            return Err(PolytopeError::Empty);
        }
        let columns = v
            .vertices()
            .iter()
            .map(|x| {
                let mut c = x.clone();
                c.push(T::one());
                c
            })
            .chain(v.rays().iter().map(|r| {
                let mut c = r.clone();
                c.push(T::zero());
                c
            }))
            .collect();
        Ok(Self {
            rows: v.dim() + 1,
            columns,
            n_vertices: v.vertices().len(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn to_f64(&self) -> RayMatrix<f64> {
        RayMatrix {
            rows: self.rows,
            columns: self
                .columns
                .iter()
                .map(|c| c.iter().map(Scalar::to_f64_lossy).collect())
                .collect(),
            n_vertices: self.n_vertices,
        }
    }
}

impl RayMatrix<f64> {
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.rows, self.columns.len(), |i, j| self.columns[j][i])
    }
}

pub fn h_to_v<T: Scalar>(p: &HPolyhedron<T>, tol: &T) -> Result<VPolyhedron<T>, PolytopeError> {
    p.to_v(tol)
}

pub fn v_to_h<T: Scalar>(p: &VPolyhedron<T>, tol: &T) -> Result<HPolyhedron<T>, PolytopeError> {
    p.to_h(tol)
}

pub fn contains<T: Scalar>(p: &HPolyhedron<T>, x: &[T], tol: &T) -> Result<bool, PolytopeError> {
    p.contains(x, tol)
}

/// Homogenization cone of a nonempty polyhedron.
pub fn homogenization_cone<T: Scalar>(p: &HPolyhedron<T>, tol: &T) -> Result<RayMatrix<T>, PolytopeError> {
    RayMatrix::from_v(&p.to_v(tol)?)
}
