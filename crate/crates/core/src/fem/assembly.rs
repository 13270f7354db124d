//! Assembly of the bilinear forms and load vectors of the two-field Biot
//! discretization. All element integrals use [`QuadratureRule::seven_point`].

use super::field::{Location, ScalarField, VectorField};
use super::quadrature::QuadratureRule;
use super::space::{eval_basis, ElementGeometry, FunctionSpace};
use crate::error::{invalid, Result};
use crate::sparse::{CsrMatrix, TripletBuilder};

fn rule() -> QuadratureRule {
    QuadratureRule::seven_point()
}

/// `2μ ⟨ε(u), ε(v)⟩ + λ ⟨∇·u, ∇·v⟩` on a vector space.
pub fn assemble_elasticity(space: &FunctionSpace, mu: f64, lambda: f64) -> Result<CsrMatrix> {
    if space.components() != 2 {
        return Err(invalid(format!(
            "elasticity needs a vector space, got {}",
            space.kind().name()
        )));
    }
    let mesh = space.mesh();
    let q = rule();
    let nloc = 3 * space.degree();
    let mut trip = TripletBuilder::with_capacity(
        space.num_dofs(),
        space.num_dofs(),
        mesh.num_triangles() * 4 * nloc * nloc,
    );
    let mut ke = vec![0.0; 4 * nloc * nloc];
    for t in 0..mesh.num_triangles() {
        let geom = ElementGeometry::new(mesh, t);
        ke.iter_mut().for_each(|v| *v = 0.0);
        for (bary, w) in q.points.iter().zip(&q.weights) {
            let jw = 2.0 * geom.area * w;
            let e = eval_basis(space.degree(), &geom, bary);
            for a in 0..nloc {
                for b in 0..nloc {
                    let (ga, gb) = (e.grads[a], e.grads[b]);
                    let dot = ga[0] * gb[0] + ga[1] * gb[1];
                    for c in 0..2 {
                        for d in 0..2 {
                            let mut v = mu * ga[d] * gb[c] + lambda * ga[c] * gb[d];
                            if c == d {
                                v += mu * dot;
                            }
                            ke[(2 * a + c) * 2 * nloc + 2 * b + d] += jw * v;
                        }
                    }
                }
            }
        }
        let nodes = space.element_nodes(t);
        for a in 0..nloc {
            for c in 0..2 {
                let row = 2 * nodes[a] + c;
                for b in 0..nloc {
                    for d in 0..2 {
                        trip.push(row, 2 * nodes[b] + d, ke[(2 * a + c) * 2 * nloc + 2 * b + d]);
                    }
                }
            }
        }
    }
    Ok(trip.build())
}

/// `D[j, k] = ∫ (∇·φ_k) ψ_j`, rows indexed by pressure dofs.
pub fn assemble_coupling(u_space: &FunctionSpace, p_space: &FunctionSpace) -> Result<CsrMatrix> {
    if !u_space.same_mesh(p_space) {
        return Err(invalid("coupling spaces live on different meshes"));
    }
    if u_space.components() != 2 || p_space.components() != 1 {
        return Err(invalid("coupling needs a vector displacement and a scalar pressure space"));
    }
    let mesh = u_space.mesh();
    let q = rule();
    let (nu, np) = (3 * u_space.degree(), 3 * p_space.degree());
    let mut trip = TripletBuilder::new(p_space.num_dofs(), u_space.num_dofs());
    for t in 0..mesh.num_triangles() {
        let geom = ElementGeometry::new(mesh, t);
        let un = u_space.element_nodes(t);
        let pn = p_space.element_nodes(t);
        let mut de = [[0.0; 12]; 6];
        for (bary, w) in q.points.iter().zip(&q.weights) {
            let jw = 2.0 * geom.area * w;
            let eu = eval_basis(u_space.degree(), &geom, bary);
            let ep = eval_basis(p_space.degree(), &geom, bary);
            for j in 0..np {
                for b in 0..nu {
                    for d in 0..2 {
                        de[j][2 * b + d] += jw * ep.values[j] * eu.grads[b][d];
                    }
                }
            }
        }
        for j in 0..np {
            for b in 0..nu {
                for d in 0..2 {
                    trip.push(pn[j], 2 * un[b] + d, de[j][2 * b + d]);
                }
            }
        }
    }
    Ok(trip.build())
}

fn scalar_form(
    space: &FunctionSpace,
    kernel: impl Fn(&super::space::BasisEval, usize, usize) -> f64,
) -> Result<CsrMatrix> {
    if space.components() != 1 {
        return Err(invalid(format!(
            "expected a scalar space, got {}",
            space.kind().name()
        )));
    }
    let mesh = space.mesh();
    let q = rule();
    let n = 3 * space.degree();
    let mut trip = TripletBuilder::new(space.num_dofs(), space.num_dofs());
    for t in 0..mesh.num_triangles() {
        let geom = ElementGeometry::new(mesh, t);
        let nodes = space.element_nodes(t);
        let mut me = [[0.0; 6]; 6];
        for (bary, w) in q.points.iter().zip(&q.weights) {
            let jw = 2.0 * geom.area * w;
            let e = eval_basis(space.degree(), &geom, bary);
            for (a, row) in me.iter_mut().enumerate().take(n) {
                for (b, v) in row.iter_mut().enumerate().take(n) {
                    *v += jw * kernel(&e, a, b);
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                trip.push(nodes[a], nodes[b], me[a][b]);
            }
        }
    }
    Ok(trip.build())
}

/// `Mp[j, k] = ∫ ψ_k ψ_j`.
pub fn assemble_pressure_mass(p_space: &FunctionSpace) -> Result<CsrMatrix> {
    scalar_form(p_space, |e, a, b| e.values[a] * e.values[b])
}

/// `Kp[j, k] = κ ∫ ∇ψ_k · ∇ψ_j`.
pub fn assemble_pressure_stiffness(p_space: &FunctionSpace, kappa: f64) -> Result<CsrMatrix> {
    if !(kappa > 0.0) {
        return Err(invalid(format!("permeability must be positive, got {kappa}")));
    }
    scalar_form(p_space, |e, a, b| {
        kappa * (e.grads[a][0] * e.grads[b][0] + e.grads[a][1] * e.grads[b][1])
    })
}

/// Load vectors at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Loads {
    /// `∫ f · φ_j`
    pub body: Vec<f64>,
    /// `∫ S_f ψ_j`
    pub source: Vec<f64>,
    /// `∫ κ g ρ · ∇ψ_j`
    pub gravity: Vec<f64>,
}

pub fn assemble_loads(
    u_space: &FunctionSpace,
    p_space: &FunctionSpace,
    body_force: &VectorField,
    fluid_source: &ScalarField,
    g_rho: [f64; 2],
    kappa: f64,
    t: f64,
) -> Result<Loads> {
    if !u_space.same_mesh(p_space) {
        return Err(invalid("load spaces live on different meshes"));
    }
    let mesh = u_space.mesh();
    let q = rule();
    let mut body = vec![0.0; u_space.num_dofs()];
    let mut source = vec![0.0; p_space.num_dofs()];
    let mut gravity = vec![0.0; p_space.num_dofs()];
    let has_gravity = g_rho != [0.0, 0.0];
    for tri in 0..mesh.num_triangles() {
        let geom = ElementGeometry::new(mesh, tri);
        let un = u_space.element_nodes(tri);
        let pn = p_space.element_nodes(tri);
        for (bary, w) in q.points.iter().zip(&q.weights) {
            let jw = 2.0 * geom.area * w;
            let weights = geom.vertex_weights(bary);
            let loc = Location {
                x: geom.point(bary),
                vertices: &weights,
            };
            if !body_force.is_zero() {
                let f = body_force.eval(&loc, t);
                let eu = eval_basis(u_space.degree(), &geom, bary);
                for (a, &node) in un.iter().enumerate() {
                    body[2 * node] += jw * f[0] * eu.values[a];
                    body[2 * node + 1] += jw * f[1] * eu.values[a];
                }
            }
            if !fluid_source.is_zero() || has_gravity {
                let ep = eval_basis(p_space.degree(), &geom, bary);
                let s = fluid_source.eval(&loc, t);
                for (a, &node) in pn.iter().enumerate() {
                    source[node] += jw * s * ep.values[a];
                    gravity[node] +=
                        jw * kappa * (g_rho[0] * ep.grads[a][0] + g_rho[1] * ep.grads[a][1]);
                }
            }
        }
    }
    Ok(Loads {
        body,
        source,
        gravity,
    })
}

/// The time-independent matrices of the discrete Biot system. The Biot
/// coefficient and time step are applied by the solvers, so one set of
/// operators serves sweeps over `α` and `τ`.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    /// Elasticity matrix.
    pub a: CsrMatrix,
    /// Divergence coupling, pressure rows by displacement columns.
    pub d: CsrMatrix,
    /// Pressure mass matrix.
    pub mp: CsrMatrix,
    /// Pressure stiffness scaled by κ.
    pub kp: CsrMatrix,
}

impl AssembledOperators {
    pub fn assemble(
        u_space: &FunctionSpace,
        p_space: &FunctionSpace,
        mu: f64,
        lambda: f64,
        kappa: f64,
    ) -> Result<Self> {
        if !(mu > 0.0 && lambda > 0.0) {
            return Err(invalid(format!(
                "Lamé parameters must be positive, got mu={mu}, lambda={lambda}"
            )));
        }
        Ok(Self {
            a: assemble_elasticity(u_space, mu, lambda)?,
            d: assemble_coupling(u_space, p_space)?,
            mp: assemble_pressure_mass(p_space)?,
            kp: assemble_pressure_stiffness(p_space, kappa)?,
        })
    }
}
