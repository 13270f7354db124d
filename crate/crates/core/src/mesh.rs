//! Structured triangular meshes of the benchmark domains.
//!
//! Every grid cell is split along its bottom-left to top-right diagonal.
//! Boundary edges carry a [`BoundaryTag`] assigned by midpoint membership.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Named boundary segments.
///
/// Rectangular domains use the four sides; the L-shaped domain uses
/// `Gamma1..Gamma6`:
///
/// * `Gamma1 = {0} x [0,1]`
/// * `Gamma2 = [0,1] x {0}`
/// * `Gamma3 = {1} x [0,0.5]`
/// * `Gamma4 = [0.5,1] x {0.5}`
/// * `Gamma5 = {0.5} x [0.5,1]`
/// * `Gamma6 = (0,0.5) x {1}`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    Bottom,
    Right,
    Top,
    Left,
    Gamma1,
    Gamma2,
    Gamma3,
    Gamma4,
    Gamma5,
    Gamma6,
}

impl BoundaryTag {
    pub const RECTANGLE: [BoundaryTag; 4] = [Self::Bottom, Self::Right, Self::Top, Self::Left];
    pub const L_SHAPE: [BoundaryTag; 6] = [
        Self::Gamma1,
        Self::Gamma2,
        Self::Gamma3,
        Self::Gamma4,
        Self::Gamma5,
        Self::Gamma6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bottom => "bottom",
            Self::Right => "right",
            Self::Top => "top",
            Self::Left => "left",
            Self::Gamma1 => "gamma1",
            Self::Gamma2 => "gamma2",
            Self::Gamma3 => "gamma3",
            Self::Gamma4 => "gamma4",
            Self::Gamma5 => "gamma5",
            Self::Gamma6 => "gamma6",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    UnitSquare,
    LShape,
    Rectangle { width: f64, height: f64 },
}

impl DomainKind {
    pub fn area(&self) -> f64 {
        match *self {
            DomainKind::UnitSquare => 1.0,
            DomainKind::LShape => 0.75,
            DomainKind::Rectangle { width, height } => width * height,
        }
    }

    /// Boundary segments of this domain, in a fixed order.
    pub fn tags(&self) -> &'static [BoundaryTag] {
        match self {
            DomainKind::LShape => &BoundaryTag::L_SHAPE,
            _ => &BoundaryTag::RECTANGLE,
        }
    }

    fn extent(&self) -> (f64, f64) {
        match *self {
            DomainKind::UnitSquare | DomainKind::LShape => (1.0, 1.0),
            DomainKind::Rectangle { width, height } => (width, height),
        }
    }

    /// Tag of the boundary segment containing `p`, if any.
    pub fn classify(&self, p: [f64; 2]) -> Option<BoundaryTag> {
        let (w, h) = self.extent();
        let tol = 1e-12 * w.max(h);
        let near = |a: f64, b: f64| (a - b).abs() <= tol;
        let within = |v: f64, lo: f64, hi: f64| v >= lo - tol && v <= hi + tol;
        let [x, y] = p;
        match self {
            DomainKind::LShape => {
                if near(x, 0.0) && within(y, 0.0, 1.0) {
                    Some(BoundaryTag::Gamma1)
                } else if near(y, 0.0) && within(x, 0.0, 1.0) {
                    Some(BoundaryTag::Gamma2)
                } else if near(x, 1.0) && within(y, 0.0, 0.5) {
                    Some(BoundaryTag::Gamma3)
                } else if near(y, 0.5) && within(x, 0.5, 1.0) {
                    Some(BoundaryTag::Gamma4)
                } else if near(x, 0.5) && within(y, 0.5, 1.0) {
                    Some(BoundaryTag::Gamma5)
                } else if near(y, 1.0) && within(x, 0.0, 0.5) {
                    Some(BoundaryTag::Gamma6)
                } else {
                    None
                }
            }
            _ => {
                if near(y, 0.0) {
                    Some(BoundaryTag::Bottom)
                } else if near(x, w) {
                    Some(BoundaryTag::Right)
                } else if near(y, h) {
                    Some(BoundaryTag::Top)
                } else if near(x, 0.0) {
                    Some(BoundaryTag::Left)
                } else {
                    None
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// Immutable triangulation with edge connectivity.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    domain: DomainKind,
    /// All edges as (min, max) vertex pairs, sorted lexicographically.
    edges: Vec<[usize; 2]>,
    /// Per triangle, the global ids of local edges (v0,v1), (v1,v2), (v2,v0).
    triangle_edges: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStatistics {
    pub num_vertices: usize,
    pub num_triangles: usize,
    pub num_edges: usize,
    pub max_edge_length: f64,
    pub total_area: f64,
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds a mesh from raw parts, computing edges and tagging the boundary.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        domain: DomainKind,
    ) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(invalid(format!("triangle {t} references a missing vertex")));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area <= 0.0 {
                return Err(invalid(format!("triangle {t} has nonpositive area {area:e}")));
            }
        }

        let mut edge_count: HashMap<[usize; 2], usize> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edge_count.entry([a.min(b), a.max(b)]).or_default() += 1;
            }
        }
        let mut edges: Vec<[usize; 2]> = edge_count.keys().copied().collect();
        edges.sort_unstable();
        let edge_index: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();

        let triangle_edges = triangles
            .iter()
            .map(|tri| {
                let mut ids = [0; 3];
                for (k, id) in ids.iter_mut().enumerate() {
                    let (a, b) = (tri[k], tri[(k + 1) % 3]);
                    *id = edge_index[&[a.min(b), a.max(b)]];
                }
                ids
            })
            .collect();

        let mut boundary_edges = Vec::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                match edge_count[&[a.min(b), a.max(b)]] {
                    1 => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                        let tag = domain.classify(mid).ok_or_else(|| {
                            invalid(format!("boundary edge ({a},{b}) lies on no named segment"))
                        })?;
                        boundary_edges.push(BoundaryEdge {
                            vertices: [a, b],
                            tag,
                        });
                    }
                    2 => {}
                    n => return Err(invalid(format!("edge ({a},{b}) shared by {n} triangles"))),
                }
            }
        }
        boundary_edges.sort_by_key(|e| (e.tag, e.vertices[0].min(e.vertices[1])));

        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            domain,
            edges,
            triangle_edges,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Edge id of the (unordered) vertex pair.
    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&[a.min(b), a.max(b)]).ok()
    }

    pub fn statistics(&self) -> MeshStatistics {
        let max_edge_length = self
            .edges
            .iter()
            .map(|&[a, b]| {
                let (p, q) = (self.vertices[a], self.vertices[b]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            })
            .fold(0.0, f64::max);
        let total_area = (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum();
        MeshStatistics {
            num_vertices: self.vertices.len(),
            num_triangles: self.triangles.len(),
            num_edges: self.edges.len(),
            max_edge_length,
            total_area,
        }
    }

    /// Writes vertices, triangles and tagged boundary edges as plain text,
    /// one record per line with 0-based indices.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "vertices {}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(out, "{:e} {:e}", v[0], v[1])?;
        }
        writeln!(out, "triangles {}", self.triangles.len())?;
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(out, "boundary_edges {}", self.boundary_edges.len())?;
        for e in &self.boundary_edges {
            writeln!(out, "{} {} {}", e.vertices[0], e.vertices[1], e.tag)?;
        }
        Ok(())
    }
}

fn grid_triangles(nx: usize, ny: usize, keep: impl Fn(usize, usize) -> bool) -> Vec<[usize; 3]> {
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            if !keep(i, j) {
                continue;
            }
            let n00 = j * (nx + 1) + i;
            let n10 = n00 + 1;
            let n01 = n00 + nx + 1;
            let n11 = n01 + 1;
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }
    triangles
}

fn grid_vertices(width: f64, height: f64, nx: usize, ny: usize) -> Vec<[f64; 2]> {
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([
                width * i as f64 / nx as f64,
                height * j as f64 / ny as f64,
            ]);
        }
    }
    vertices
}

/// Uniform `nx` by `ny` grid on `[0,width] x [0,height]`.
pub fn build_rectangle_mesh(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0) {
        return Err(invalid(format!(
            "rectangle dimensions must be positive, got {width} x {height}"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(invalid("rectangle mesh needs at least one cell per direction"));
    }
    let domain = if width == 1.0 && height == 1.0 {
        DomainKind::UnitSquare
    } else {
        DomainKind::Rectangle { width, height }
    };
    Mesh::from_parts(
        grid_vertices(width, height, nx, ny),
        grid_triangles(nx, ny, |_, _| true),
        domain,
    )
}

pub fn build_unit_square_mesh(n: usize) -> Result<Mesh> {
    build_rectangle_mesh(1.0, 1.0, n, n)
}

/// Unit square grid with the quadrant `(0.5,1) x (0.5,1)` removed.
pub fn build_l_shape_mesh(n: usize) -> Result<Mesh> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(invalid(format!("L-shape mesh needs an even n >= 2, got {n}")));
    }
    let half = n / 2;
    let all_vertices = grid_vertices(1.0, 1.0, n, n);
    let triangles = grid_triangles(n, n, |i, j| !(i >= half && j >= half));

    let mut used = vec![false; all_vertices.len()];
    for t in &triangles {
        for &v in t {
            used[v] = true;
        }
    }
    let mut renumber = vec![usize::MAX; all_vertices.len()];
    let mut vertices = Vec::new();
    for (old, p) in all_vertices.iter().enumerate() {
        if used[old] {
            renumber[old] = vertices.len();
            vertices.push(*p);
        }
    }
    let triangles = triangles
        .into_iter()
        .map(|t| [renumber[t[0]], renumber[t[1]], renumber[t[2]]])
        .collect();
    Mesh::from_parts(vertices, triangles, DomainKind::LShape)
}
