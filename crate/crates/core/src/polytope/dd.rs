//! Double description method for cones `{y : H y ≥ 0, Q y = 0}`.

use crate::scalar::{dot, normalize, null_space, Scalar};

use super::PolytopeError;

/// Generators of a polyhedral cone: extreme rays plus a lineality basis.
#[derive(Debug, Clone)]
pub(crate) struct ConeGenerators<T> {
    pub rays: Vec<Vec<T>>,
    pub lineality: Vec<Vec<T>>,
}

#[derive(Clone)]
struct ZeroSet(Vec<u64>);

impl ZeroSet {
    fn new(rows: usize) -> Self {
        Self(vec![0; rows / 64 + 1])
    }
    fn insert(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }
    fn contains_all(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == *b)
    }
}

/// Sign of `v` under `tol`, with a band around `tol` reported as ambiguous.
fn classify<T: Scalar>(v: &T, tol: &T, row: usize) -> Result<i8, PolytopeError> {
    if v.is_negligible(tol) {
        return Ok(0);
    }
    if !tol.is_zero() {
        let hi = tol.clone() * T::from_f64_lossy(10.0);
        if v.abs() < hi {
            return Err(PolytopeError::Degenerate {
                row,
                value: v.to_f64_lossy(),
            });
        }
    }
    Ok(if v.is_positive() { 1 } else { -1 })
}

fn axpy<T: Scalar>(y: &mut [T], a: &T, x: &[T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = yi.clone() + a.clone() * xi.clone();
    }
}

/// Rows of `ineq` are processed in the given order; row indices in errors refer to `ineq`.
pub(crate) fn dd_cone<T: Scalar>(
    dim: usize,
    ineq: &[Vec<T>],
    eq: &[Vec<T>],
    tol: &T,
) -> Result<ConeGenerators<T>, PolytopeError> {
    // Parametrize the equality subspace: y = N z.
    let (basis, _) = null_space(eq, dim, tol);
    let r = basis.len();
    let rows: Vec<Vec<T>> = ineq
        .iter()
        .map(|h| basis.iter().map(|col| dot(h, col)).collect())
        .collect();

    let mut lineality: Vec<Vec<T>> = (0..r)
        .map(|i| {
            let mut e = vec![T::zero(); r];
            e[i] = T::one();
            e
        })
        .collect();
    let mut rays: Vec<(Vec<T>, ZeroSet)> = Vec::new();
    let nrows = rows.len();

    for (ri, h) in rows.iter().enumerate() {
        // Lineality phase: a lineality direction not orthogonal to h turns into a ray.
        let mut best: Option<(usize, T)> = None;
        for (li, l) in lineality.iter().enumerate() {
            let v = dot(h, l);
            if classify(&v, tol, ri)? != 0 && best.as_ref().map_or(true, |(_, b)| v.abs() > b.abs()) {
                best = Some((li, v));
            }
        }
        if let Some((li, hv)) = best {
            let mut piv = lineality.remove(li);
            if hv.is_negative() {
                piv.iter_mut().for_each(|x| *x = -x.clone());
            }
            let hv = hv.abs();
            for l in lineality.iter_mut() {
                let c = -(dot(h, l) / hv.clone());
                axpy(l, &c, &piv);
                normalize(l);
            }
            for (ray, z) in rays.iter_mut() {
                let c = -(dot(h, ray) / hv.clone());
                axpy(ray, &c, &piv);
                normalize(ray);
                z.insert(ri);
            }
            normalize(&mut piv);
            // Lineality directions vanish on every earlier row.
            let mut z = ZeroSet::new(nrows);
            (0..ri).for_each(|i| z.insert(i));
            rays.push((piv, z));
            continue;
        }

        let mut signs = Vec::with_capacity(rays.len());
        let mut values = Vec::with_capacity(rays.len());
        for (ray, _) in &rays {
            let v = dot(h, ray);
            signs.push(classify(&v, tol, ri)?);
            values.push(v);
        }
        if signs.iter().all(|&s| s >= 0) {
            for ((_, z), &s) in rays.iter_mut().zip(&signs) {
                if s == 0 {
                    z.insert(ri);
                }
            }
            continue;
        }
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| signs[i] > 0).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| signs[i] < 0).collect();
        let mut fresh = Vec::new();
        for &p in &pos {
            for &n in &neg {
                let common = rays[p].1.and(&rays[n].1);
                let adjacent = !(0..rays.len())
                    .any(|o| o != p && o != n && rays[o].1.contains_all(&common));
                if !adjacent {
                    continue;
                }
                let mut v: Vec<T> = rays[n]
                    .0
                    .iter()
                    .map(|x| x.clone() * values[p].clone())
                    .collect();
                let c = -values[n].clone();
                axpy(&mut v, &c, &rays[p].0);
                normalize(&mut v);
                let mut z = common;
                z.insert(ri);
                fresh.push((v, z));
            }
        }
        let mut kept: Vec<(Vec<T>, ZeroSet)> = Vec::with_capacity(rays.len() + fresh.len());
        for (i, (ray, mut z)) in rays.into_iter().enumerate() {
            match signs[i] {
                0 => {
                    z.insert(ri);
                    kept.push((ray, z));
                }
                1 => kept.push((ray, z)),
                _ => {}
            }
        }
        kept.extend(fresh);
        rays = kept;
    }

    let lift = |z: &[T]| -> Vec<T> {
        let mut y = vec![T::zero(); dim];
        for (zi, col) in z.iter().zip(&basis) {
            axpy(&mut y, zi, col);
        }
        y
    };
    Ok(ConeGenerators {
        rays: rays.iter().map(|(z, _)| lift(z)).collect(),
        lineality: lineality.iter().map(|z| lift(z)).collect(),
    })
}
