//! Lagrange spaces on triangles and their degree-of-freedom maps.
//!
//! Nodes are numbered vertices first, then edge midpoints in the mesh's
//! sorted edge order. Vector spaces interleave components: the dof of
//! component `c` at node `n` is `2 * n + c`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::field::{Location, ScalarField, VectorField};
use super::quadrature::QuadratureRule;
use crate::error::{invalid, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceKind {
    P1Scalar,
    P1Vector2,
    P2Vector2,
}

impl SpaceKind {
    pub fn degree(self) -> usize {
        match self {
            Self::P1Scalar | Self::P1Vector2 => 1,
            Self::P2Vector2 => 2,
        }
    }

    pub fn components(self) -> usize {
        match self {
            Self::P1Scalar => 1,
            Self::P1Vector2 | Self::P2Vector2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::P1Scalar => "P1Scalar",
            Self::P1Vector2 => "P1Vector2",
            Self::P2Vector2 => "P2Vector2",
        }
    }
}

/// Support of a node: a mesh vertex or the midpoint of a mesh edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSupport {
    Vertex(usize),
    EdgeMidpoint([usize; 2]),
}

/// Affine triangle geometry: area and constant barycentric gradients.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub vertices: [[f64; 2]; 3],
    pub vertex_ids: [usize; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(mesh: &Mesh, t: usize) -> Self {
        let ids = mesh.triangles()[t];
        let p = ids.map(|v| mesh.vertices()[v]);
        let area = crate::mesh::signed_area(p[0], p[1], p[2]);
        let two_a = 2.0 * area;
        let grad_lambda = [
            [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
            [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
            [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
        ];
        Self {
            vertices: p,
            vertex_ids: ids,
            area,
            grad_lambda,
        }
    }

    pub fn point(&self, bary: &[f64; 3]) -> [f64; 2] {
        let mut x = [0.0; 2];
        for (b, v) in bary.iter().zip(&self.vertices) {
            x[0] += b * v[0];
            x[1] += b * v[1];
        }
        x
    }

    /// Vertex weights for field evaluation at `bary`.
    pub fn vertex_weights(&self, bary: &[f64; 3]) -> [(usize, f64); 3] {
        [
            (self.vertex_ids[0], bary[0]),
            (self.vertex_ids[1], bary[1]),
            (self.vertex_ids[2], bary[2]),
        ]
    }
}

/// Values and gradients of the scalar Lagrange basis at one point; only
/// the first `len` entries are meaningful.
#[derive(Debug, Clone, Copy)]
pub struct BasisEval {
    pub len: usize,
    pub values: [f64; 6],
    pub grads: [[f64; 2]; 6],
}

pub fn eval_basis(degree: usize, geom: &ElementGeometry, bary: &[f64; 3]) -> BasisEval {
    let g = &geom.grad_lambda;
    let mut e = BasisEval {
        len: 0,
        values: [0.0; 6],
        grads: [[0.0; 2]; 6],
    };
    match degree {
        1 => {
            e.len = 3;
            e.values[..3].copy_from_slice(bary);
            e.grads[..3].copy_from_slice(g);
        }
        2 => {
            e.len = 6;
            for i in 0..3 {
                let l = bary[i];
                e.values[i] = l * (2.0 * l - 1.0);
                let s = 4.0 * l - 1.0;
                e.grads[i] = [s * g[i][0], s * g[i][1]];
            }
            for (k, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                e.values[3 + k] = 4.0 * bary[i] * bary[j];
                e.grads[3 + k] = [
                    4.0 * (bary[j] * g[i][0] + bary[i] * g[j][0]),
                    4.0 * (bary[j] * g[i][1] + bary[i] * g[j][1]),
                ];
            }
        }
        _ => unreachable!("unsupported degree {degree}"),
    }
    e
}

#[derive(Debug, Clone)]
pub struct FunctionSpace {
    kind: SpaceKind,
    mesh: Arc<Mesh>,
    nodes: Vec<NodeSupport>,
    coords: Vec<[f64; 2]>,
    element_nodes: Vec<[usize; 6]>,
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>, kind: SpaceKind) -> Self {
        let mut nodes: Vec<NodeSupport> =
            (0..mesh.num_vertices()).map(NodeSupport::Vertex).collect();
        let nv = nodes.len();
        if kind.degree() == 2 {
            nodes.extend(mesh.edges().iter().map(|&e| NodeSupport::EdgeMidpoint(e)));
        }
        let coords = nodes
            .iter()
            .map(|n| match *n {
                NodeSupport::Vertex(v) => mesh.vertices()[v],
                NodeSupport::EdgeMidpoint([a, b]) => {
                    let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
                    [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
                }
            })
            .collect();
        let element_nodes = mesh
            .triangles()
            .iter()
            .zip(mesh.triangle_edges())
            .map(|(t, e)| {
                let mut n = [usize::MAX; 6];
                n[..3].copy_from_slice(t);
                if kind.degree() == 2 {
                    for k in 0..3 {
                        n[3 + k] = nv + e[k];
                    }
                }
                n
            })
            .collect();
        Self {
            kind,
            mesh,
            nodes,
            coords,
            element_nodes,
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.kind.degree()
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.nodes.len() * self.components()
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn node_support(&self, node: usize) -> NodeSupport {
        self.nodes[node]
    }

    /// Local-to-global node indices of triangle `t`.
    pub fn element_nodes(&self, t: usize) -> &[usize] {
        &self.element_nodes[t][..3 * self.degree()]
    }

    pub fn dof(&self, node: usize, component: usize) -> usize {
        node * self.components() + component
    }

    /// Nodes lying on the closed boundary edge `(a, b)`.
    pub fn edge_nodes(&self, a: usize, b: usize) -> Vec<usize> {
        let mut out = vec![a, b];
        if self.degree() == 2 {
            let e = self.mesh.edge_id(a, b).expect("boundary edge exists");
            out.push(self.mesh.num_vertices() + e);
        }
        out
    }

    pub fn same_mesh(&self, other: &FunctionSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    fn node_location_weights(&self, node: usize) -> ([(usize, f64); 2], usize) {
        match self.nodes[node] {
            NodeSupport::Vertex(v) => ([(v, 1.0), (v, 0.0)], 1),
            NodeSupport::EdgeMidpoint([a, b]) => ([(a, 0.5), (b, 0.5)], 2),
        }
    }

    /// Evaluates `f` at node `node` with the node's vertex representation.
    pub fn with_node_location<R>(&self, node: usize, f: impl FnOnce(&Location<'_>) -> R) -> R {
        let (w, n) = self.node_location_weights(node);
        f(&Location {
            x: self.coords[node],
            vertices: &w[..n],
        })
    }

    fn expect_components(&self, c: usize) -> Result<()> {
        if self.components() != c {
            return Err(invalid(format!(
                "{} has {} components, expected {c}",
                self.kind.name(),
                self.components()
            )));
        }
        Ok(())
    }

    pub fn interpolate_scalar(&self, field: &ScalarField, t: f64) -> Result<Vec<f64>> {
        self.expect_components(1)?;
        Ok((0..self.num_nodes())
            .map(|n| self.with_node_location(n, |loc| field.eval(loc, t)))
            .collect())
    }

    pub fn interpolate_vector(&self, field: &VectorField, t: f64) -> Result<Vec<f64>> {
        self.expect_components(2)?;
        let mut out = vec![0.0; self.num_dofs()];
        for n in 0..self.num_nodes() {
            let v = self.with_node_location(n, |loc| field.eval(loc, t));
            out[2 * n] = v[0];
            out[2 * n + 1] = v[1];
        }
        Ok(out)
    }

    /// Value of the discrete field `dofs` (all components) at `bary` in triangle `t`.
    pub fn evaluate(&self, dofs: &[f64], t: usize, bary: &[f64; 3]) -> [f64; 2] {
        let geom = ElementGeometry::new(&self.mesh, t);
        let basis = eval_basis(self.degree(), &geom, bary);
        let nodes = self.element_nodes(t);
        let nc = self.components();
        let mut out = [0.0; 2];
        for (a, &node) in nodes.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate().take(nc) {
                *o += basis.values[a] * dofs[node * nc + c];
            }
        }
        out
    }

    /// L2 distance between the discrete field `dofs` and `exact`, using a
    /// quadrature rule exact for degree 10.
    pub fn l2_error(&self, dofs: &[f64], exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
        assert_eq!(dofs.len(), self.num_dofs());
        let rule = QuadratureRule::collapsed_gauss(6);
        let nc = self.components();
        let mut total = 0.0;
        for t in 0..self.mesh.num_triangles() {
            let geom = ElementGeometry::new(&self.mesh, t);
            let nodes = self.element_nodes(t);
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let basis = eval_basis(self.degree(), &geom, bary);
                let mut uh = [0.0; 2];
                for (a, &node) in nodes.iter().enumerate() {
                    for (c, u) in uh.iter_mut().enumerate().take(nc) {
                        *u += basis.values[a] * dofs[node * nc + c];
                    }
                }
                let ex = exact(geom.point(bary));
                let err2: f64 = (0..nc).map(|c| (uh[c] - ex[c]).powi(2)).sum();
                total += 2.0 * geom.area * w * err2;
            }
        }
        total.sqrt()
    }
}
