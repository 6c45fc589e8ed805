use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

/// Shape of a declared unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    SymMatrix(usize),
    Vector(usize),
    Scalar,
}

impl VarKind {
    /// Number of scalar unknowns; symmetric matrices store their upper triangle.
    pub fn scalar_count(self) -> usize {
        match self {
            VarKind::SymMatrix(s) => s * (s + 1) / 2,
            VarKind::Vector(s) => s,
            VarKind::Scalar => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    pub nonneg: bool,
    pub offset: usize,
}

impl VarDecl {
    /// Scalar index of entry `(i, j)` of a symmetric matrix variable.
    pub fn sym_index(&self, i: usize, j: usize) -> usize {
        let VarKind::SymMatrix(s) = self.kind else {
            panic!("{} is not a symmetric matrix", self.name)
        };
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.offset + i * s - i * (i + 1) / 2 + j
    }
}

/// `E(x) = E_0 + Σ_u x_u E_u` with symmetric dense coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSym {
    pub constant: DMatrix<f64>,
    /// Sorted by scalar index, no duplicates.
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl AffineSym {
    pub fn size(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (u, e) in &self.terms {
            m += e * x[*u];
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `E(x) ⪯ 0`
    Nsd,
    /// `E(x) ⪰ 0`
    Psd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    pub id: String,
    pub expr: AffineSym,
    pub sense: Sense,
}

/// `Σ coeff · x_u = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEquality {
    pub id: String,
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Symbolic LMI feasibility problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    vars: Vec<VarDecl>,
    blocks: Vec<LmiBlock>,
    equalities: Vec<LinearEquality>,
    n_scalars: usize,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: impl Into<String>, kind: VarKind, nonneg: bool) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(VarDecl {
            name: name.into(),
            kind,
            nonneg,
            offset: self.n_scalars,
        });
        self.n_scalars += kind.scalar_count();
        id
    }

    pub fn var(&self, id: VarId) -> &VarDecl {
        &self.vars[id.0]
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn blocks(&self) -> &[LmiBlock] {
        &self.blocks
    }

    pub fn equalities(&self) -> &[LinearEquality] {
        &self.equalities
    }

    pub fn n_scalars(&self) -> usize {
        self.n_scalars
    }

    pub fn add_lmi(&mut self, id: impl Into<String>, expr: AffineSym, sense: Sense) {
        assert!(expr.terms.iter().all(|(u, e)| *u < self.n_scalars && e.shape() == expr.constant.shape()));
        self.blocks.push(LmiBlock {
            id: id.into(),
            expr,
            sense,
        });
    }

    pub fn add_equality(&mut self, id: impl Into<String>, coeffs: Vec<(usize, f64)>, rhs: f64) {
        assert!(coeffs.iter().all(|(u, _)| *u < self.n_scalars));
        self.equalities.push(LinearEquality {
            id: id.into(),
            coeffs,
            rhs,
        });
    }

    /// Scalar indices of every entrywise-nonnegative unknown.
    pub fn nonneg_indices(&self) -> Vec<usize> {
        self.vars
            .iter()
            .filter(|v| v.nonneg)
            .flat_map(|v| v.offset..v.offset + v.kind.scalar_count())
            .collect()
    }

    /// Builds an affine block by probing `f` at zero and at each unit vector of the given variables.
    ///
    /// `f` must be affine in the scalar vector it receives.
    pub fn linearize(&self, vars: &[VarId], f: impl Fn(&[f64]) -> DMatrix<f64>) -> AffineSym {
        let mut x = vec![0.0; self.n_scalars];
        let constant = f(&x);
        let mut indices: Vec<usize> = vars
            .iter()
            .flat_map(|v| {
                let d = self.var(*v);
                d.offset..d.offset + d.kind.scalar_count()
            })
            .collect();
        indices.sort_unstable();
        indices.dedup();
        let mut terms = Vec::with_capacity(indices.len());
        for u in indices {
            x[u] = 1.0;
            let e = f(&x) - &constant;
            x[u] = 0.0;
            if e.iter().any(|v| *v != 0.0) {
                terms.push(sym_part(e, u));
            }
        }
        AffineSym {
            constant: symmetrize(constant),
            terms,
        }
    }

    pub fn sym_value(&self, x: &[f64], id: VarId) -> DMatrix<f64> {
        let d = self.var(id);
        let VarKind::SymMatrix(s) = d.kind else {
            panic!("{} is not a symmetric matrix", d.name)
        };
        DMatrix::from_fn(s, s, |i, j| x[d.sym_index(i, j)])
    }

    pub fn vector_value(&self, x: &[f64], id: VarId) -> DVector<f64> {
        let d = self.var(id);
        let VarKind::Vector(s) = d.kind else {
            panic!("{} is not a vector", d.name)
        };
        DVector::from_fn(s, |i, _| x[d.offset + i])
    }

    pub fn scalar_value(&self, x: &[f64], id: VarId) -> f64 {
        x[self.var(id).offset]
    }

    /// Interchange form: variables, blocks as coefficient lists, equalities.
    pub fn to_json(&self) -> Value {
        let mat = |m: &DMatrix<f64>| -> Value {
            Value::Array(
                (0..m.nrows())
                    .map(|i| Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect()))
                    .collect(),
            )
        };
        json!({
            "variables": self.vars.iter().map(|v| {
                let (kind, size) = match v.kind {
                    VarKind::SymMatrix(s) => ("symmetric", s),
                    VarKind::Vector(s) => ("vector", s),
                    VarKind::Scalar => ("scalar", 1),
                };
                json!({"name": v.name, "kind": kind, "size": size, "nonneg": v.nonneg, "offset": v.offset})
            }).collect::<Vec<_>>(),
            "scalar_count": self.n_scalars,
            "blocks": self.blocks.iter().map(|b| json!({
                "id": b.id,
                "sense": match b.sense { Sense::Nsd => "nsd", Sense::Psd => "psd" },
                "constant": mat(&b.expr.constant),
                "terms": b.expr.terms.iter().map(|(u, e)| json!({"index": u, "matrix": mat(e)})).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "equalities": self.equalities.iter().map(|e| json!({
                "id": e.id,
                "coeffs": e.coeffs.iter().map(|(u, c)| json!([u, c])).collect::<Vec<_>>(),
                "rhs": e.rhs,
            })).collect::<Vec<_>>(),
        })
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn sym_part(m: DMatrix<f64>, u: usize) -> (usize, DMatrix<f64>) {
    (u, symmetrize(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_index_is_upper_triangular_row_major() {
        let mut p = SdpProblem::new();
        p.declare("s", VarKind::Scalar, false);
        let m = p.declare("P", VarKind::SymMatrix(3), false);
        let d = p.var(m);
        let idx: Vec<usize> = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
            .iter()
            .map(|&(i, j)| d.sym_index(i, j))
            .collect();
        assert_eq!(idx, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(d.sym_index(2, 0), 3);
        assert_eq!(p.n_scalars(), 7);
    }

    #[test]
    fn linearize_recovers_affine_map() {
        let mut p = SdpProblem::new();
        let a = p.declare("a", VarKind::Vector(2), false);
        let expr = p.linearize(&[a], |x| {
            let v = p.vector_value(x, a);
            DMatrix::from_row_slice(2, 2, &[1.0 + v[0], v[1], v[1], -2.0 * v[0]])
        });
        let m = expr.eval(&[3.0, 4.0]);
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[4.0, 4.0, 4.0, -6.0]));
        assert_eq!(expr.terms.len(), 2);
    }
}
