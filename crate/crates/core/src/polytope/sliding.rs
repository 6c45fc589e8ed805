use crate::model::{ModelError, UncertainGrn};
use crate::partition::{Coord, DomainId, Partition, PartitionError};
use crate::scalar::Scalar;

use super::{HPolyhedron, PolytopeError};

/// `F = [f^1_{D_1} … f^1_{D_q} f^2_{D_1} … f^L_{D_q}]` as `n × Lq` rows, k-major.
pub fn sliding_rate_matrix(
    model: &UncertainGrn,
    partition: &Partition,
    ds: DomainId,
) -> Result<Vec<Vec<f64>>, PartitionError> {
    let adj = partition.adjacent_regulatory(ds)?;
    let n = model.n();
    let mut cols = Vec::with_capacity(model.extremal_count() * adj.len());
    for k in 0..model.extremal_count() {
        for &r in &adj {
            cols.push(model.rate_in_domain(k, partition.domain(r))?);
        }
    }
    Ok((0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

/// `{γ ≥ 0 : [F̄^1 … F̄^L] γ = c̄, 1ᵀγ = 1}` over `γ ∈ R^{Lq}`.
///
/// `F̄` keeps the pinned rows of `F`; `c̄_i = c_i θ_i` at the pinned threshold.
pub fn sliding_polytope<T: Scalar>(
    model: &UncertainGrn,
    partition: &Partition,
    ds: DomainId,
) -> Result<HPolyhedron<T>, PartitionError> {
    let f = sliding_rate_matrix(model, partition, ds)?;
    let dim = f.first().map_or(0, Vec::len);
    let d = partition.domain(ds);
    let mut h = HPolyhedron::new(dim);
    for i in d.pinned_vars() {
        let Coord::Pinned(t) = d.coords()[i] else {
            return Err(PartitionError::Model(ModelError::SwitchingDomain));
        };
        let rhs = model.degradation()[i] * partition.threshold(i, t);
        h.push_eq(
            f[i].iter().map(|&v| T::from_f64_lossy(v)).collect(),
            T::from_f64_lossy(rhs),
        );
    }
    h.push_eq(vec![T::one(); dim], T::one());
    for j in 0..dim {
        let mut row = vec![T::zero(); dim];
        row[j] = -T::one();
        h.push_ineq(row, T::zero());
    }
    Ok(h)
}

/// Vertices of a bounded polyhedron; empty input gives an empty list.
pub fn vertices<T: Scalar>(p: &HPolyhedron<T>, tol: &T) -> Result<Vec<Vec<T>>, PolytopeError> {
    let v = p.to_v(tol)?;
    if !v.rays().is_empty() {
        return Err(PolytopeError::Unbounded);
    }
    Ok(v.vertices().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    fn facet(p: &Partition) -> DomainId {
        p.id_of(&[Coord::Interval(0), Coord::Pinned(0)])
    }

    #[test]
    fn example_facet_rows() {
        let m = bundled::sliding_example();
        let p = Partition::new(&m);
        let h = sliding_polytope::<f64>(&m, &p, facet(&p)).unwrap();
        let eqs: Vec<(Vec<f64>, f64)> = h.equalities().map(|(r, b)| (r.to_vec(), *b)).collect();
        assert_eq!(eqs[0], (vec![2.0, 0.0, 3.0, 0.0, 2.0, 0.0, 3.0, 0.0], 1.0));
        assert_eq!(eqs[1], (vec![1.0; 8], 1.0));
        assert_eq!(h.n_inequalities(), 8);
    }

    #[test]
    fn example_facet_vertices() {
        let m = bundled::sliding_example();
        let p = Partition::new(&m);
        let h = sliding_polytope::<f64>(&m, &p, facet(&p)).unwrap();
        let w = vertices(&h, &1e-9).unwrap();
        assert_eq!(w.len(), 16);
        let half = [0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(w.iter().any(|v| v.iter().zip(&half).all(|(a, b)| (a - b).abs() < 1e-12)));
        for v in &w {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(v.iter().all(|&x| x >= -1e-12));
        }
    }

    #[test]
    fn non_sliding_facet_is_empty() {
        let m = bundled::sliding_example();
        let p = Partition::new(&m);
        // x1 = 1, 0 < x2 < 1: both sides have f1 ∈ {2, 3} > 1, no sliding.
        let s = p.id_of(&[Coord::Pinned(0), Coord::Interval(0)]);
        let h = sliding_polytope::<f64>(&m, &p, s).unwrap();
        assert!(vertices(&h, &1e-9).unwrap().is_empty());
    }

    #[test]
    fn plain_simplex_vertices() {
        let mut h = HPolyhedron::<f64>::new(3);
        h.push_eq(vec![1.0; 3], 1.0);
        for j in 0..3 {
            let mut r = vec![0.0; 3];
            r[j] = -1.0;
            h.push_ineq(r, 0.0);
        }
        let w = vertices(&h, &1e-9).unwrap();
        assert_eq!(w, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
    }

    #[test]
    fn unbounded_is_rejected() {
        let mut h = HPolyhedron::<f64>::new(1);
        h.push_ineq(vec![-1.0], 0.0);
        assert_eq!(vertices(&h, &1e-9), Err(PolytopeError::Unbounded));
    }
}
