//! State transition graphs from focal-point sign tests.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::model::{ModelError, UncertainGrn};
use crate::partition::{focal_point, Coord, DomainId, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Crossing,
    SlidingEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StgEdge {
    pub from: DomainId,
    pub to: DomainId,
    pub kind: EdgeKind,
}

/// A focal-point component landing exactly on a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Degeneracy {
    pub domain: DomainId,
    pub var: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stg {
    /// 0-based extremal index.
    pub k: usize,
    pub edges: BTreeSet<StgEdge>,
    pub degenerate: BTreeSet<Degeneracy>,
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Below,
    Above,
}

/// Side of the threshold pinned in `s_coord` on which a regulatory coordinate lies.
fn side(reg: Coord, s_coord: Coord) -> Side {
    match (reg, s_coord) {
        (Coord::Interval(j), Coord::Pinned(t)) if j > t => Side::Above,
        _ => Side::Below,
    }
}

/// `Some(true)` if the flow on `side` moves toward `theta`, `None` if `phi == theta`.
fn approaches(side: Side, phi: f64, theta: f64) -> Option<bool> {
    if phi == theta {
        return None;
    }
    Some(match side {
        Side::Below => phi > theta,
        Side::Above => phi < theta,
    })
}

pub fn build_stg(model: &UncertainGrn, partition: &Partition, k: usize) -> Result<Stg, ModelError> {
    let mut focal = vec![None; partition.len()];
    for d in partition.regulatory() {
        focal[d.id().0] = Some(focal_point(model, k, d)?);
    }
    let phi = |id: DomainId| focal[id.0].as_ref().expect("regulatory focal point");
    let mut edges = BTreeSet::new();
    let mut degenerate = BTreeSet::new();
    for s in partition.switching() {
        let pinned = s.pinned_vars();
        let adj = partition
            .adjacent_regulatory(s.id())
            .expect("switching domain has neighbours");
        // Per regulatory neighbour and pinned variable: does it approach θ_i?
        let mut toward = Vec::with_capacity(adj.len());
        for &r in &adj {
            let rd = partition.domain(r);
            let mut row = Vec::with_capacity(pinned.len());
            for &i in &pinned {
                let Coord::Pinned(t) = s.coords()[i] else { unreachable!() };
                let theta = partition.threshold(i, t);
                let a = approaches(side(rd.coords()[i], s.coords()[i]), phi(r)[i], theta);
                if a.is_none() {
                    degenerate.insert(Degeneracy { domain: r, var: i });
                }
                row.push(a);
            }
            toward.push(row);
        }
        let mirror = |ri: usize, bit: usize| -> usize {
            let mut c = partition.domain(adj[ri]).coords().to_vec();
            let v = pinned[bit];
            if let (Coord::Interval(j), Coord::Pinned(t)) = (c[v], s.coords()[v]) {
                c[v] = Coord::Interval(if j > t { t } else { t + 1 });
            }
            let id = partition.id_of(&c);
            adj.iter().position(|&x| x == id).expect("mirror is adjacent")
        };
        for (ri, &r) in adj.iter().enumerate() {
            let row = &toward[ri];
            if row.iter().all(|a| *a == Some(true)) {
                let sliding = (0..pinned.len()).any(|b| toward[mirror(ri, b)][b] == Some(true));
                edges.insert(StgEdge {
                    from: r,
                    to: s.id(),
                    kind: if sliding { EdgeKind::SlidingEntry } else { EdgeKind::Crossing },
                });
            }
            if row.iter().all(|a| *a == Some(false)) {
                edges.insert(StgEdge {
                    from: s.id(),
                    to: r,
                    kind: EdgeKind::Crossing,
                });
            }
        }
    }
    Ok(Stg { k, edges, degenerate })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeDiff {
    pub edge: StgEdge,
    /// 1-based extremal indices whose graph contains the edge.
    pub present_in: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption1Report {
    pub passed: bool,
    pub graphs: Vec<Stg>,
    pub differing: Vec<EdgeDiff>,
}

impl Assumption1Report {
    pub fn degenerate(&self) -> BTreeSet<(usize, Degeneracy)> {
        self.graphs
            .iter()
            .flat_map(|g| g.degenerate.iter().map(move |d| (g.k, *d)))
            .collect()
    }
}

/// Passes iff every extremal system has the same graph, annotations included.
pub fn check_assumption1(model: &UncertainGrn, partition: &Partition) -> Result<Assumption1Report, ModelError> {
    let graphs: Vec<Stg> = (0..model.extremal_count())
        .map(|k| build_stg(model, partition, k))
        .collect::<Result<_, _>>()?;
    let all: BTreeSet<StgEdge> = graphs.iter().flat_map(|g| g.edges.iter().copied()).collect();
    let differing: Vec<EdgeDiff> = all
        .into_iter()
        .filter_map(|e| {
            let present_in: Vec<usize> = graphs
                .iter()
                .filter(|g| g.edges.contains(&e))
                .map(|g| g.k + 1)
                .collect();
            (present_in.len() != graphs.len()).then_some(EdgeDiff { edge: e, present_in })
        })
        .collect();
    Ok(Assumption1Report {
        passed: differing.is_empty(),
        graphs,
        differing,
    })
}

/// DOT rendering with domain labels.
pub fn to_dot(stg: &Stg, partition: &Partition) -> String {
    let mut out = format!("digraph stg_k{} {{\n", stg.k + 1);
    for d in partition.domains() {
        let shape = if d.is_regulatory() { "box" } else { "ellipse" };
        out.push_str(&format!(
            "  n{} [label=\"{}\", shape={}];\n",
            d.id().0,
            partition.label(d.id()),
            shape
        ));
    }
    for e in &stg.edges {
        let style = match e.kind {
            EdgeKind::Crossing => "solid",
            EdgeKind::SlidingEntry => "dashed",
        };
        out.push_str(&format!("  n{} -> n{} [style={}];\n", e.from.0, e.to.0, style));
    }
    out.push_str("}\n");
    out
}
