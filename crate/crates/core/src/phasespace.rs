//! The discrete locally Hamiltonian gauge space: symplectic pairing, gauge
//! action, momentum map and its split into a bulk constraint and a boundary
//! flux.
//!
//! Every model exposes a vertex density `G(φ)` with
//! `⟨H(φ), ξ⟩ = −Σ_v ⟨G_v, ξ_v⟩`. Interior vertices carry the constraint
//! density `−G_v`, boundary vertices carry the flux density `s_b G_b`, and
//! `flux(ξ) = −Σ_b s_b ⟨flux_b, ξ_b⟩`. The decomposition
//! `total = bulk + flux` is then a plain regrouping of one sum.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::complex::CellComplex;
use crate::error::{Error, Result};
use crate::liealg::{dot, LieAlgebra};
use crate::rng::SampleRng;

/// A phase-space point: the coordinates of `(A, E)` (or `A` alone) as one
/// flat vector in the layout of its model.
pub type PhasePoint = Vec<f64>;
/// A tangent vector in the same layout.
pub type TangentVector = Vec<f64>;

/// A discrete gauge theory with constant symplectic form.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;
    fn complex(&self) -> &CellComplex;
    fn algebra(&self) -> &LieAlgebra;
    fn phase_dim(&self) -> usize;

    fn gauge_dim(&self) -> usize {
        self.complex().n_vertices() * self.algebra().dim()
    }

    /// Matrix `Ω` with `ω(v, w) = vᵀ Ω w`.
    fn omega_matrix(&self) -> DMatrix<f64>;

    /// Fundamental vector field `ρ(ξ)` at `φ`.
    fn rho(&self, phi: &[f64], xi: &[f64]) -> TangentVector;

    /// Vertex density `G(φ)`, one dual vector per vertex.
    fn vertex_density(&self, phi: &[f64]) -> Vec<f64>;

    /// Analytic gradient of `φ ↦ ⟨H(φ), ξ⟩`.
    fn momentum_gradient(&self, phi: &[f64], xi: &[f64]) -> Vec<f64>;

    /// Jacobian of the vertex density (rows vertex×d, columns phase).
    fn density_jacobian(&self, phi: &[f64]) -> DMatrix<f64>;

    /// Coordinates in which the constraint is linear once the others are
    /// fixed (E for Yang–Mills, all of A for Chern–Simons).
    fn linear_block(&self) -> Range<usize>;

    /// Reference configuration `φ•` with vanishing constraint.
    fn reference(&self) -> PhasePoint {
        vec![0.0; self.phase_dim()]
    }

    /// Random point, not necessarily on-shell.
    fn random_point(&self, rng: &mut SampleRng, scale: f64) -> PhasePoint {
        (0..self.phase_dim())
            .map(|_| scale * (2.0 * rng.gen::<f64>() - 1.0))
            .collect()
    }

    /// Finite gauge transformation `φ ◁ exp(λ)`.
    fn act(&self, phi: &[f64], lambda: &[f64]) -> Result<PhasePoint>;

    fn rho_matrix(&self, phi: &[f64]) -> DMatrix<f64> {
        let n = self.gauge_dim();
        let mut m = DMatrix::zeros(self.phase_dim(), n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.rho(phi, &e);
            m.set_column(j, &DVector::from_vec(col));
            e[j] = 0.0;
        }
        m
    }
}

/// Momentum split at one point and one gauge parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentumEval {
    pub total: f64,
    pub bulk: f64,
    pub flux: f64,
    /// Constraint density per interior vertex.
    pub bulk_density: Vec<f64>,
    /// Flux density per boundary vertex.
    pub flux_density: Vec<f64>,
}

/// Constraint density at interior vertices.
pub fn bulk_density(model: &dyn Model, phi: &[f64]) -> Vec<f64> {
    let g = model.vertex_density(phi);
    split_density(model, &g).0
}

/// Flux density at boundary vertices.
pub fn flux_density(model: &dyn Model, phi: &[f64]) -> Vec<f64> {
    let g = model.vertex_density(phi);
    split_density(model, &g).1
}

fn split_density(model: &dyn Model, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let cx = model.complex();
    let d = model.algebra().dim();
    let mut bulk = Vec::with_capacity(cx.interior_vertices().len() * d);
    for &v in cx.interior_vertices() {
        bulk.extend(g[v * d..(v + 1) * d].iter().map(|x| -x));
    }
    let mut flux = Vec::with_capacity(cx.boundary_vertices().len() * d);
    for &v in cx.boundary_vertices() {
        let s = cx.flux_sign(v);
        flux.extend(g[v * d..(v + 1) * d].iter().map(|x| s * x));
    }
    (bulk, flux)
}

/// `ξ` restricted to interior vertices.
pub fn interior_part(cx: &CellComplex, d: usize, xi: &[f64]) -> Vec<f64> {
    cx.interior_vertices()
        .iter()
        .flat_map(|&v| xi[v * d..(v + 1) * d].iter().copied())
        .collect()
}

/// `ξ` restricted to boundary vertices.
pub fn boundary_part(cx: &CellComplex, d: usize, xi: &[f64]) -> Vec<f64> {
    cx.boundary_vertices()
        .iter()
        .flat_map(|&v| xi[v * d..(v + 1) * d].iter().copied())
        .collect()
}

/// Pairs a flux density with boundary values of `ξ`: `−Σ_b s_b ⟨f_b, ξ_b⟩`.
pub fn pair_flux(cx: &CellComplex, d: usize, flux: &[f64], xi: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, &v) in cx.boundary_vertices().iter().enumerate() {
        s -= cx.flux_sign(v) * dot(&flux[i * d..(i + 1) * d], &xi[v * d..(v + 1) * d]);
    }
    s
}

pub fn momentum(model: &dyn Model, phi: &[f64], xi: &[f64]) -> MomentumEval {
    let cx = model.complex();
    let d = model.algebra().dim();
    let g = model.vertex_density(phi);
    let mut total = 0.0;
    for v in 0..cx.n_vertices() {
        total -= dot(&g[v * d..(v + 1) * d], &xi[v * d..(v + 1) * d]);
    }
    let (bulk_density, flux_density) = split_density(model, &g);
    let bulk = dot(&bulk_density, &interior_part(cx, d, xi));
    let flux = pair_flux(cx, d, &flux_density, xi);
    MomentumEval {
        total,
        bulk,
        flux,
        bulk_density,
        flux_density,
    }
}

pub fn omega(model: &dyn Model, v: &[f64], w: &[f64]) -> Result<f64> {
    let n = model.phase_dim();
    if v.len() != n || w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len().min(w.len()),
        });
    }
    let om = model.omega_matrix();
    let w = DVector::from_column_slice(w);
    Ok(dot(v, (om * w).as_slice()))
}

/// `ω(ρ(ξ), v) − D_v⟨H, ξ⟩`.
pub fn flow_residual(model: &dyn Model, phi: &[f64], xi: &[f64], v: &[f64]) -> f64 {
    let om = model.omega_matrix();
    flow_residual_with(model, &om, phi, xi, v)
}

/// Same as [`flow_residual`] with a precomputed `Ω`.
pub fn flow_residual_with(
    model: &dyn Model,
    om: &DMatrix<f64>,
    phi: &[f64],
    xi: &[f64],
    v: &[f64],
) -> f64 {
    let r = DVector::from_vec(model.rho(phi, xi));
    let lhs = (r.transpose() * om * DVector::from_column_slice(v))[(0, 0)];
    let rhs = dot(&model.momentum_gradient(phi, xi), v);
    lhs - rhs
}

/// `flux(φ)(ξ) − flux(φ•)(ξ)`.
pub fn adjusted_flux(model: &dyn Model, phi: &[f64], xi: &[f64], reference: &[f64]) -> f64 {
    let cx = model.complex();
    let d = model.algebra().dim();
    let f = flux_density(model, phi);
    let f0 = flux_density(model, reference);
    pair_flux(cx, d, &f, xi) - pair_flux(cx, d, &f0, xi)
}

/// Directional derivative of the flux functional at `φ` along `v`,
/// evaluated on `η`.
pub fn flux_derivative(model: &dyn Model, phi: &[f64], v: &[f64], eta: &[f64]) -> f64 {
    let cx = model.complex();
    let d = model.algebra().dim();
    let jac = model.density_jacobian(phi);
    let dg = jac * DVector::from_column_slice(v);
    let (_, df) = split_density(model, dg.as_slice());
    pair_flux(cx, d, &df, eta)
}

/// `k(ξ, η) = ⟨L_{ρ(ξ)} h•, η⟩ − ⟨h•, [ξ, η]⟩` at `φ`.
pub fn algebra_cocycle_k_at(model: &dyn Model, phi: &[f64], xi: &[f64], eta: &[f64]) -> f64 {
    let alg = model.algebra();
    let d = alg.dim();
    let rho = model.rho(phi, xi);
    let lie = flux_derivative(model, phi, &rho, eta);
    let mut br = vec![0.0; xi.len()];
    for v in 0..xi.len() / d {
        alg.bracket_acc(&xi[v * d..(v + 1) * d], &eta[v * d..(v + 1) * d], 1.0, &mut br[v * d..(v + 1) * d]);
    }
    lie - adjusted_flux(model, phi, &br, &model.reference())
}

/// Result of evaluating the flux cocycle over several points.
#[derive(Clone, Debug, Serialize)]
pub struct CocycleEval {
    pub value: f64,
    /// Largest deviation across the sample points (φ-independence).
    pub spread: f64,
    pub weakly_equivariant: bool,
}

/// `k(ξ, η)` at the reference point, with a φ-independence check over
/// `samples`.
pub fn algebra_cocycle_k(
    model: &dyn Model,
    xi: &[f64],
    eta: &[f64],
    samples: &[PhasePoint],
    tol: f64,
) -> CocycleEval {
    let value = algebra_cocycle_k_at(model, &model.reference(), xi, eta);
    let spread = samples
        .iter()
        .map(|p| (algebra_cocycle_k_at(model, p, xi, eta) - value).abs())
        .fold(0.0, f64::max);
    CocycleEval {
        value,
        spread,
        weakly_equivariant: spread <= tol * (1.0 + value.abs()),
    }
}

/// Matrix of `k` on the gauge algebra at `φ`.
pub fn cocycle_matrix(model: &dyn Model, phi: &[f64]) -> DMatrix<f64> {
    let n = model.gauge_dim();
    let mut m = DMatrix::zeros(n, n);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        a[i] = 1.0;
        for j in 0..n {
            b[j] = 1.0;
            m[(i, j)] = algebra_cocycle_k_at(model, phi, &a, &b);
            b[j] = 0.0;
        }
        a[i] = 0.0;
    }
    m
}

/// `C(g)`: the functional `ξ ↦ adjusted_flux(φ• ◁ g, ξ, φ•)` as a vector
/// over the gauge algebra, for `g = exp(λ)`.
pub fn group_cocycle_c(model: &dyn Model, lambda: &[f64]) -> Result<Vec<f64>> {
    let r = model.reference();
    let moved = model.act(&r, lambda)?;
    let n = model.gauge_dim();
    let mut out = vec![0.0; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        out[j] = adjusted_flux(model, &moved, &e, &r);
        e[j] = 0.0;
    }
    Ok(out)
}

/// Constraint residual: the bulk density at interior vertices.
pub fn constraint_residual(model: &dyn Model, phi: &[f64]) -> Vec<f64> {
    bulk_density(model, phi)
}

pub fn constraint_norm(model: &dyn Model, phi: &[f64]) -> f64 {
    constraint_residual(model, phi)
        .iter()
        .fold(0.0, |m, x| m.max(x.abs()))
}

/// Jacobian of the constraint (interior rows of `−∂G`).
pub fn constraint_jacobian(model: &dyn Model, phi: &[f64]) -> DMatrix<f64> {
    let cx = model.complex();
    let d = model.algebra().dim();
    let j = model.density_jacobian(phi);
    let mut rows = vec![];
    for &v in cx.interior_vertices() {
        for k in 0..d {
            rows.push(v * d + k);
        }
    }
    -crate::linalg::select_rows(&j, &rows)
}

/// Jacobian of the flux density (boundary rows of `s_b ∂G`).
pub fn flux_jacobian(model: &dyn Model, phi: &[f64]) -> DMatrix<f64> {
    let cx = model.complex();
    let d = model.algebra().dim();
    let j = model.density_jacobian(phi);
    let mut m = DMatrix::zeros(cx.boundary_vertices().len() * d, j.ncols());
    for (i, &v) in cx.boundary_vertices().iter().enumerate() {
        let s = cx.flux_sign(v);
        for k in 0..d {
            m.set_row(i * d + k, &(j.row(v * d + k) * s));
        }
    }
    m
}

/// Gauge-parameter rows acting only through interior vertices: matrix whose
/// columns embed interior `ξ` into the full gauge algebra.
pub fn interior_embedding(cx: &CellComplex, d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(cx.n_vertices() * d, cx.interior_vertices().len() * d);
    for (i, &v) in cx.interior_vertices().iter().enumerate() {
        for k in 0..d {
            m[(v * d + k, i * d + k)] = 1.0;
        }
    }
    m
}

pub fn boundary_embedding(cx: &CellComplex, d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(cx.n_vertices() * d, cx.boundary_vertices().len() * d);
    for (i, &v) in cx.boundary_vertices().iter().enumerate() {
        for k in 0..d {
            m[(v * d + k, i * d + k)] = 1.0;
        }
    }
    m
}

/// A reference configuration, validated to be on-shell.
#[derive(Clone, Debug)]
pub struct ReferencePoint {
    pub phi: PhasePoint,
}

impl ReferencePoint {
    pub fn new(model: &dyn Model, phi: PhasePoint, tol: f64) -> Result<Self> {
        let r = constraint_norm(model, &phi);
        if r > tol {
            return Err(Error::OffShell(r));
        }
        Ok(ReferencePoint { phi })
    }
}

/// Pointwise `[ξ, η]` on vertex fields.
pub fn bracket_fields(alg: &LieAlgebra, xi: &[f64], eta: &[f64]) -> Vec<f64> {
    let d = alg.dim();
    let mut out = vec![0.0; xi.len()];
    for v in 0..xi.len() / d {
        alg.bracket_acc(&xi[v * d..(v + 1) * d], &eta[v * d..(v + 1) * d], 1.0, &mut out[v * d..(v + 1) * d]);
    }
    out
}

/// Pointwise `ad*(ξ) f` on vertex fields.
pub fn coadjoint_fields(alg: &LieAlgebra, xi: &[f64], f: &[f64]) -> Vec<f64> {
    let d = alg.dim();
    let mut out = vec![0.0; xi.len()];
    for v in 0..xi.len() / d {
        alg.coadjoint_acc(&xi[v * d..(v + 1) * d], &f[v * d..(v + 1) * d], 1.0, &mut out[v * d..(v + 1) * d]);
    }
    out
}
