//! Model presets: Maxwell / Yang–Mills (optionally θ-shifted), Abelian
//! Chern–Simons on a triangulated surface, and the helpers each example
//! needs (on-shell charts, isotropy, the θ check).

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::complex::{d_twisted_raw, vertex_divergence, CellComplex};
use crate::error::{Error, Result};
use crate::liealg::{dot, LieAlgebra};
use crate::linalg::{self, Subspace};
use crate::phasespace::{self as ps, Model, PhasePoint};

/// Top-level model description.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `maxwell`, `ym_su2`, `chern_simons_disk`, `theta_ym` or `bf_corner`.
    pub name: String,
    /// Algebra preset; defaults per model.
    #[serde(default)]
    pub algebra: Option<String>,
    /// Mesh builder: `interval`, `circle`, `disk`, `annulus`.
    pub mesh: String,
    /// Builder parameter (N or refinement).
    pub n: usize,
    #[serde(default)]
    pub theta: f64,
    /// RK4 steps for the finite non-Abelian action.
    #[serde(default = "default_steps")]
    pub flow_steps: usize,
}

fn default_steps() -> usize {
    64
}

impl ModelSpec {
    pub fn new(name: &str, mesh: &str, n: usize) -> Self {
        ModelSpec {
            name: name.into(),
            algebra: None,
            mesh: mesh.into(),
            n,
            theta: 0.0,
            flow_steps: default_steps(),
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_algebra(mut self, alg: &str) -> Self {
        self.algebra = Some(alg.into());
        self
    }

    pub fn algebra(&self) -> Result<LieAlgebra> {
        let default = match self.name.as_str() {
            "maxwell" | "chern_simons_disk" | "theta_ym" => "u1",
            "ym_su2" => "su2",
            "bf_corner" => "bf_su2",
            other => return Err(Error::UnknownModel(other.into())),
        };
        LieAlgebra::preset(self.algebra.as_deref().unwrap_or(default))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::Config("θ must be finite".into()));
        }
        if self.theta != 0.0 && self.name != "theta_ym" {
            return Err(Error::Unsupported {
                model: self.name.clone(),
                what: "a θ parameter".into(),
            });
        }
        self.algebra().map(|_| ())
    }
}

/// Builds the phase-space model. `bf_corner` has no bulk phase space and is
/// handled by the corner module.
pub fn instantiate(spec: &ModelSpec) -> Result<Box<dyn Model>> {
    spec.validate()?;
    let alg = spec.algebra()?;
    let cx = CellComplex::build(&spec.mesh, spec.n)?;
    match spec.name.as_str() {
        "maxwell" | "ym_su2" => Ok(Box::new(YangMills::new(&spec.name, cx, alg, 0.0, spec.flow_steps)?)),
        "theta_ym" => Ok(Box::new(YangMills::new(&spec.name, cx, alg, spec.theta, spec.flow_steps)?)),
        "chern_simons_disk" => Ok(Box::new(ChernSimons::new(cx, alg)?)),
        "bf_corner" => Err(Error::Unsupported {
            model: spec.name.clone(),
            what: "a bulk phase space".into(),
        }),
        other => Err(Error::UnknownModel(other.into())),
    }
}

// ---------------------------------------------------------------------------
// Yang–Mills
// ---------------------------------------------------------------------------

/// Yang–Mills on edges: `φ = (A, E)` with `A` algebra-valued and `E` dual.
/// With `θ ≠ 0` (Abelian only) the momentum is evaluated on
/// `E^θ = E + θ g P D1ᵀ D1 A`, the curl of the curvature restricted to
/// interior edges, and `ω` is pulled back accordingly.
pub struct YangMills {
    name: String,
    cx: CellComplex,
    alg: LieAlgebra,
    theta: f64,
    steps: usize,
    ne: usize,
    /// `g ⊗ P D1ᵀ D1` on edge fields, present when `θ ≠ 0`.
    theta_map: Option<DMatrix<f64>>,
}

impl YangMills {
    pub fn new(name: &str, cx: CellComplex, alg: LieAlgebra, theta: f64, steps: usize) -> Result<Self> {
        let ne = cx.n_edges();
        let theta_map = if theta != 0.0 {
            if !alg.is_abelian() {
                return Err(Error::Unsupported {
                    model: name.into(),
                    what: "θ with a non-Abelian algebra (use the θ check report)".into(),
                });
            }
            Some(theta_operator(&cx, &alg))
        } else {
            None
        };
        Ok(YangMills {
            name: name.into(),
            cx,
            alg,
            theta,
            steps,
            ne,
            theta_map,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn d(&self) -> usize {
        self.alg.dim()
    }

    pub fn a_range(&self) -> Range<usize> {
        0..self.ne * self.d()
    }

    pub fn e_range(&self) -> Range<usize> {
        self.ne * self.d()..2 * self.ne * self.d()
    }

    /// `E^θ` (equal to `E` when θ = 0).
    pub fn e_theta(&self, phi: &[f64]) -> Vec<f64> {
        let e = &phi[self.e_range()];
        match &self.theta_map {
            None => e.to_vec(),
            Some(m) => {
                let shift = m * DVector::from_column_slice(&phi[self.a_range()]);
                e.iter()
                    .zip(shift.iter())
                    .map(|(x, s)| x + self.theta * s)
                    .collect()
            }
        }
    }

    /// Matrix of `E ↦ G(A, E)` at fixed `A`.
    pub fn e_jacobian(&self, a: &[f64]) -> DMatrix<f64> {
        let d = self.d();
        let mut m = DMatrix::zeros(self.cx.n_vertices() * d, self.ne * d);
        for (e, &(t, h)) in self.cx.edges().iter().enumerate() {
            let adt = self.alg.ad_matrix(&a[e * d..(e + 1) * d]).transpose();
            for j in 0..d {
                for k in 0..d {
                    let half = 0.5 * adt[(j, k)];
                    let id = if j == k { 1.0 } else { 0.0 };
                    m[(h * d + j, e * d + k)] += id + half;
                    m[(t * d + j, e * d + k)] += -id + half;
                }
            }
        }
        m
    }

    /// Finite action on `A` alone by RK4 integration of `dA/dt = d_A λ`.
    pub fn flow_a(&self, a: &[f64], lambda: &[f64], steps: usize) -> Vec<f64> {
        let n = a.len();
        let f = |x: &[f64]| {
            let mut out = vec![0.0; n];
            d_twisted_raw(&self.cx, &self.alg, x, lambda, &mut out);
            out
        };
        let h = 1.0 / steps as f64;
        let mut x = a.to_vec();
        let mut tmp = vec![0.0; n];
        for _ in 0..steps {
            let k1 = f(&x);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            let k2 = f(&tmp);
            for i in 0..n {
                tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            let k3 = f(&tmp);
            for i in 0..n {
                tmp[i] = x[i] + h * k3[i];
            }
            let k4 = f(&tmp);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        x
    }
}

/// `g ⊗ P D1ᵀ D1` with `P` the projector onto interior edges.
pub fn theta_operator(cx: &CellComplex, alg: &LieAlgebra) -> DMatrix<f64> {
    let d = alg.dim();
    let ne = cx.n_edges();
    if cx.dim() < 2 {
        return DMatrix::zeros(ne * d, ne * d);
    }
    let d1 = cx.d1_matrix();
    let mut k = d1.transpose() * &d1;
    for e in 0..ne {
        if cx.is_boundary_edge(e) {
            k.row_mut(e).fill(0.0);
        }
    }
    let g = alg.pairing();
    DMatrix::from_fn(ne * d, ne * d, |r, c| k[(r / d, c / d)] * g[(r % d, c % d)])
}

impl Model for YangMills {
    fn name(&self) -> &str {
        &self.name
    }
    fn complex(&self) -> &CellComplex {
        &self.cx
    }
    fn algebra(&self) -> &LieAlgebra {
        &self.alg
    }
    fn phase_dim(&self) -> usize {
        2 * self.ne * self.d()
    }

    fn omega_matrix(&self) -> DMatrix<f64> {
        let n = self.ne * self.d();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            m[(i, n + i)] = -1.0;
            m[(n + i, i)] = 1.0;
        }
        if let Some(k) = &self.theta_map {
            let extra = (k.transpose() - k) * self.theta;
            let mut blk = m.view_mut((0, 0), (n, n));
            blk += extra;
        }
        m
    }

    fn rho(&self, phi: &[f64], xi: &[f64]) -> Vec<f64> {
        let d = self.d();
        let n = self.ne * d;
        let mut out = vec![0.0; 2 * n];
        let a = &phi[..n];
        let e = &phi[n..];
        d_twisted_raw(&self.cx, &self.alg, a, xi, &mut out[..n]);
        if !self.alg.is_abelian() {
            let mut avg = vec![0.0; d];
            for (ei, &(t, h)) in self.cx.edges().iter().enumerate() {
                for k in 0..d {
                    avg[k] = 0.5 * (xi[t * d + k] + xi[h * d + k]);
                }
                self.alg
                    .coadjoint_acc(&avg, &e[ei * d..(ei + 1) * d], 1.0, &mut out[n + ei * d..n + (ei + 1) * d]);
            }
        }
        out
    }

    fn vertex_density(&self, phi: &[f64]) -> Vec<f64> {
        let et = self.e_theta(phi);
        vertex_divergence(&self.cx, &self.alg, &phi[self.a_range()], &et)
    }

    fn momentum_gradient(&self, phi: &[f64], xi: &[f64]) -> Vec<f64> {
        let d = self.d();
        let n = self.ne * d;
        let a = &phi[..n];
        let et = self.e_theta(phi);
        let mut da = vec![0.0; n];
        d_twisted_raw(&self.cx, &self.alg, a, xi, &mut da);
        let mut out = vec![0.0; 2 * n];
        // ∂/∂E = −d_A ξ
        for i in 0..n {
            out[n + i] = -da[i];
        }
        // ∂/∂A_e = ad*(ξ̄_e) E^θ_e − θ (Mᵀ d_A ξ)_e
        let mut avg = vec![0.0; d];
        for (ei, &(t, h)) in self.cx.edges().iter().enumerate() {
            for k in 0..d {
                avg[k] = 0.5 * (xi[t * d + k] + xi[h * d + k]);
            }
            self.alg
                .coadjoint_acc(&avg, &et[ei * d..(ei + 1) * d], 1.0, &mut out[ei * d..(ei + 1) * d]);
        }
        if let Some(m) = &self.theta_map {
            let corr = m.transpose() * DVector::from_vec(da);
            for i in 0..n {
                out[i] -= self.theta * corr[i];
            }
        }
        out
    }

    fn density_jacobian(&self, phi: &[f64]) -> DMatrix<f64> {
        let d = self.d();
        let n = self.ne * d;
        let a = &phi[..n];
        let et = self.e_theta(phi);
        let je = self.e_jacobian(a);
        let mut jac = DMatrix::zeros(self.cx.n_vertices() * d, 2 * n);
        jac.view_mut((0, n), (je.nrows(), n)).copy_from(&je);
        if !self.alg.is_abelian() {
            for (ei, &(t, h)) in self.cx.edges().iter().enumerate() {
                let ee = &et[ei * d..(ei + 1) * d];
                for j in 0..d {
                    for i in 0..d {
                        let v: f64 = (0..d).map(|k| ee[k] * self.alg.structure(k, i, j)).sum();
                        jac[(h * d + j, ei * d + i)] += 0.5 * v;
                        jac[(t * d + j, ei * d + i)] += 0.5 * v;
                    }
                }
            }
        }
        if let Some(m) = &self.theta_map {
            let extra = &je * m * self.theta;
            let mut blk = jac.view_mut((0, 0), (je.nrows(), n));
            blk += extra;
        }
        jac
    }

    fn linear_block(&self) -> Range<usize> {
        self.e_range()
    }

    fn act(&self, phi: &[f64], lambda: &[f64]) -> Result<PhasePoint> {
        let d = self.d();
        let n = self.ne * d;
        let mut out = phi.to_vec();
        if self.alg.is_abelian() {
            let mut da = vec![0.0; n];
            d_twisted_raw(&self.cx, &self.alg, &phi[..n], lambda, &mut da);
            for i in 0..n {
                out[i] += da[i];
            }
            return Ok(out);
        }
        let a = self.flow_a(&phi[..n], lambda, self.steps);
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::FlowFailure {
                steps: self.steps,
                reason: "non-finite connection".into(),
            });
        }
        out[..n].copy_from_slice(&a);
        for (ei, &(t, h)) in self.cx.edges().iter().enumerate() {
            let avg: Vec<f64> = (0..d).map(|k| 0.5 * (lambda[t * d + k] + lambda[h * d + k])).collect();
            let g = self.alg.ad_matrix(&avg).transpose().exp();
            let e = DVector::from_column_slice(&phi[n + ei * d..n + (ei + 1) * d]);
            let moved = g * e;
            out[n + ei * d..n + (ei + 1) * d].copy_from_slice(moved.as_slice());
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Chern–Simons
// ---------------------------------------------------------------------------

/// Abelian Chern–Simons on a triangulated surface. `φ = A`,
/// `ω(a, b) = ½ Σ_f (b∪a − a∪b)[f]` (the discrete `∫ b∧a`) and
/// `⟨H(A), ξ⟩ = ω(dξ, A)`, so the bulk part is the curvature smeared
/// against `ξ` and the flux is `−Σ_∂ ξ̄ A`.
pub struct ChernSimons {
    cx: CellComplex,
    alg: LieAlgebra,
    omega: DMatrix<f64>,
    density: DMatrix<f64>,
}

/// Scalar antisymmetrized cup-product matrix on edges:
/// `ω(a, b) = ½ Σ_f (a∪b − b∪a)[f]`, `(a∪b)[012] = a(01) b(12)`.
pub fn cup_form(cx: &CellComplex) -> DMatrix<f64> {
    let ne = cx.n_edges();
    let mut c = DMatrix::zeros(ne, ne);
    for f in cx.faces() {
        let (e01, s01) = f.edges[0];
        let (e12, s12) = f.edges[1];
        let w = 0.5 * (s01 as f64) * (s12 as f64);
        c[(e01, e12)] += w;
        c[(e12, e01)] -= w;
    }
    c
}

impl ChernSimons {
    pub fn new(cx: CellComplex, alg: LieAlgebra) -> Result<Self> {
        if cx.dim() != 2 {
            return Err(Error::Unsupported {
                model: "chern_simons_disk".into(),
                what: "a one-dimensional mesh".into(),
            });
        }
        if !alg.is_abelian() {
            return Err(Error::Unsupported {
                model: "chern_simons_disk".into(),
                what: "a non-Abelian bulk phase space (use the on-shell chart or the loop corner model)".into(),
            });
        }
        let d = alg.dim();
        let c = cup_form(&cx);
        let g = alg.pairing();
        let ne = cx.n_edges();
        let omega = DMatrix::from_fn(ne * d, ne * d, |r, s| -c[(r / d, s / d)] * g[(r % d, s % d)]);
        let d0 = cx.d0_matrix();
        let d0k = DMatrix::from_fn(ne * d, cx.n_vertices() * d, |r, s| {
            if r % d == s % d {
                d0[(r / d, s / d)]
            } else {
                0.0
            }
        });
        let density = -(d0k.transpose() * &omega);
        Ok(ChernSimons {
            cx,
            alg,
            omega,
            density,
        })
    }

    /// Discrete curvature `D1 A` per face.
    pub fn curvature(&self, a: &[f64]) -> Vec<f64> {
        face_curvature(&self.cx, &self.alg, a)
    }
}

impl Model for ChernSimons {
    fn name(&self) -> &str {
        "chern_simons_disk"
    }
    fn complex(&self) -> &CellComplex {
        &self.cx
    }
    fn algebra(&self) -> &LieAlgebra {
        &self.alg
    }
    fn phase_dim(&self) -> usize {
        self.cx.n_edges() * self.alg.dim()
    }
    fn omega_matrix(&self) -> DMatrix<f64> {
        self.omega.clone()
    }
    fn rho(&self, _phi: &[f64], xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.phase_dim()];
        d_twisted_raw(&self.cx, &self.alg, &vec![0.0; self.phase_dim()], xi, &mut out);
        out
    }
    fn vertex_density(&self, phi: &[f64]) -> Vec<f64> {
        (&self.density * DVector::from_column_slice(phi)).as_slice().to_vec()
    }
    fn momentum_gradient(&self, _phi: &[f64], xi: &[f64]) -> Vec<f64> {
        let dxi = DVector::from_vec(self.rho(&[], xi));
        (self.omega.transpose() * dxi).as_slice().to_vec()
    }
    fn density_jacobian(&self, _phi: &[f64]) -> DMatrix<f64> {
        self.density.clone()
    }
    fn linear_block(&self) -> Range<usize> {
        0..self.phase_dim()
    }
    fn act(&self, phi: &[f64], lambda: &[f64]) -> Result<PhasePoint> {
        let r = self.rho(phi, lambda);
        Ok(phi.iter().zip(r).map(|(a, b)| a + b).collect())
    }
}

/// Per-face curvature `F = D1 A + ½[A(01), A(12)]` with the face's own
/// orientation (the bracket term vanishes for Abelian algebras).
pub fn face_curvature(cx: &CellComplex, alg: &LieAlgebra, a: &[f64]) -> Vec<f64> {
    let d = alg.dim();
    let mut f = vec![0.0; cx.n_faces() * d];
    for (fi, face) in cx.faces().iter().enumerate() {
        let out = &mut f[fi * d..(fi + 1) * d];
        for &(e, s) in &face.edges {
            for k in 0..d {
                out[k] += s as f64 * a[e * d + k];
            }
        }
        if !alg.is_abelian() {
            let (e01, s01) = face.edges[0];
            let (e12, s12) = face.edges[1];
            let x: Vec<f64> = a[e01 * d..(e01 + 1) * d].iter().map(|v| v * s01 as f64).collect();
            let y: Vec<f64> = a[e12 * d..(e12 + 1) * d].iter().map(|v| v * s12 as f64).collect();
            alg.bracket_acc(&x, &y, 0.5, out);
        }
    }
    f
}

// ---------------------------------------------------------------------------
// On-shell chart for Chern–Simons
// ---------------------------------------------------------------------------

/// Principal logarithm of a representation matrix, for `u1`, `rN` and `su2`.
/// Rejects rotation angles at or beyond `π`.
pub fn principal_log(alg: &LieAlgebra, u: &DMatrix<f64>) -> Result<Vec<f64>> {
    match alg.name() {
        "u1" => {
            let t = u[(1, 0)].atan2(u[(0, 0)]);
            if t.abs() >= std::f64::consts::PI - 1e-12 {
                return Err(Error::LogBranch(t));
            }
            Ok(vec![t])
        }
        "su2" => {
            let c = u.trace() / 4.0;
            let w = alg
                .decompose(&((u - u.transpose()) * 0.5))
                .ok_or_else(|| Error::InvalidAlgebra("su2 without representation".into()))?;
            let s = dot(&w, &w).sqrt() / 2.0;
            let half = s.atan2(c);
            let angle = 2.0 * half;
            if angle >= std::f64::consts::PI {
                return Err(Error::LogBranch(angle));
            }
            if s == 0.0 {
                return Ok(vec![0.0; 3]);
            }
            Ok(w.iter().map(|x| angle * x / (2.0 * s)).collect())
        }
        _ if alg.is_abelian() => {
            let n = alg.dim();
            (0..n)
                .map(|i| {
                    let v = u[(i, i)];
                    if v > 0.0 {
                        Ok(v.ln())
                    } else {
                        Err(Error::LogBranch(v))
                    }
                })
                .collect()
        }
        other => Err(Error::Unsupported {
            model: other.into(),
            what: "a principal logarithm".into(),
        }),
    }
}

/// `A_e = log(u_tail⁻¹ u_head)` from a vertex field of group elements.
pub fn cs_onshell_chart(cx: &CellComplex, alg: &LieAlgebra, u: &[DMatrix<f64>]) -> Result<PhasePoint> {
    let d = alg.dim();
    let mut a = vec![0.0; cx.n_edges() * d];
    for (e, &(t, h)) in cx.edges().iter().enumerate() {
        let ut_inv = u[t]
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidAlgebra("singular group element".into()))?;
        let l = principal_log(alg, &(ut_inv * &u[h]))?;
        a[e * d..(e + 1) * d].copy_from_slice(&l);
    }
    Ok(a)
}

/// Vertex group field `u_v = exp(λ_v)`.
pub fn exp_field(alg: &LieAlgebra, lambda: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let d = alg.dim();
    (0..lambda.len() / d)
        .map(|v| {
            alg.exp_action(&crate::liealg::AlgebraElement(lambda[v * d..(v + 1) * d].to_vec()), 1.0)?
                .rep
                .ok_or_else(|| Error::InvalidAlgebra("no representation".into()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Isotropy and the θ check
// ---------------------------------------------------------------------------

/// Kernel of `ξ ↦ ρ(ξ)` at `φ`.
pub fn isotropy(model: &dyn Model, phi: &[f64]) -> Subspace {
    Subspace::kernel_of(&model.rho_matrix(phi))
}

#[derive(Clone, Debug, Serialize)]
pub struct ElLocusReport {
    pub source_norm: f64,
    pub constraint_norm: f64,
    pub on_el_locus: bool,
    pub on_shell: bool,
    pub in_isotropy: bool,
    pub agree: bool,
}

/// Compares the Euler–Lagrange locus of `(φ, ξ) ↦ ⟨H(φ), ξ⟩` (vanishing
/// φ-gradient and vanishing bulk density) with `φ ∈ C, ξ ∈ ker ρ_φ`.
pub fn el_locus_check(model: &dyn Model, phi: &[f64], xi: &[f64], tol: f64) -> ElLocusReport {
    let grad = model.momentum_gradient(phi, xi);
    let source_norm = grad.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    let constraint_norm = ps::constraint_norm(model, phi);
    let on_el_locus = source_norm <= tol && constraint_norm <= tol;
    let iso = isotropy(model, phi);
    let xn = dot(xi, xi).sqrt();
    let in_isotropy = xn == 0.0 || iso.distance(&DVector::from_column_slice(xi)) <= tol;
    let on_shell = constraint_norm <= tol;
    ElLocusReport {
        source_norm,
        constraint_norm,
        on_el_locus,
        on_shell,
        in_isotropy,
        agree: on_el_locus == (on_shell && in_isotropy),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThetaReport {
    pub theta: f64,
    pub abelian: bool,
    /// Largest difference of the constraint residuals of `(A,E)` and `(A,E^θ)`.
    pub constraint_difference: f64,
    /// Flux shift per boundary vertex.
    pub flux_shift: Vec<f64>,
    /// Shift predicted from the curvature of boundary-adjacent faces.
    pub flux_shift_oracle: Vec<f64>,
    pub oracle_mismatch: f64,
    pub label_shift: f64,
    /// Non-Abelian only: the Bianchi defect carried into the constraint.
    pub bianchi_defect: f64,
}

/// Compares standard Yang–Mills at `(A, E)` with the θ-shifted momentum.
pub fn theta_invariance_check(cx: &CellComplex, alg: &LieAlgebra, theta: f64, phi: &[f64]) -> Result<ThetaReport> {
    let d = alg.dim();
    let ne = cx.n_edges();
    let a = &phi[..ne * d];
    let e = &phi[ne * d..];
    // E^θ = E + θ g P D1ᵀ F_A with the bracket-corrected curvature
    let f = face_curvature(cx, alg, a);
    let mut shift = vec![0.0; ne * d];
    if cx.dim() == 2 {
        for (fi, face) in cx.faces().iter().enumerate() {
            for &(ei, s) in &face.edges {
                if cx.is_boundary_edge(ei) {
                    continue;
                }
                let gf = alg.flat(&f[fi * d..(fi + 1) * d]);
                for k in 0..d {
                    shift[ei * d + k] += s as f64 * gf[k];
                }
            }
        }
    }
    let et: Vec<f64> = e.iter().zip(&shift).map(|(x, s)| x + theta * s).collect();
    let base = YangMills::new("ym", cx.clone(), alg.clone(), 0.0, 64)?;
    let mut phi_t = phi.to_vec();
    phi_t[ne * d..].copy_from_slice(&et);
    let r0 = ps::constraint_residual(&base, phi);
    let r1 = ps::constraint_residual(&base, &phi_t);
    let constraint_difference = r0.iter().zip(&r1).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
    let f0 = ps::flux_density(&base, phi);
    let f1 = ps::flux_density(&base, &phi_t);
    let flux_shift: Vec<f64> = f1.iter().zip(&f0).map(|(x, y)| x - y).collect();
    // oracle: only boundary edges see the face curvature, with opposite sign
    let mut oracle = vec![0.0; cx.boundary_vertices().len() * d];
    if cx.dim() == 2 {
        for (fi, face) in cx.faces().iter().enumerate() {
            for &(ei, s) in &face.edges {
                if !cx.is_boundary_edge(ei) {
                    continue;
                }
                let gf = alg.flat(&f[fi * d..(fi + 1) * d]);
                let (t, h) = cx.edges()[ei];
                for (v, o) in [(h, 1.0), (t, -1.0)] {
                    let b = cx.boundary_index(v).unwrap();
                    for k in 0..d {
                        oracle[b * d + k] -= theta * o * s as f64 * gf[k];
                    }
                }
            }
        }
    }
    let oracle_mismatch = if alg.is_abelian() {
        flux_shift.iter().zip(&oracle).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
    } else {
        f64::NAN
    };
    let l0: Vec<f64> = (0..f0.len() / d).flat_map(|b| alg.casimirs_raw(&f0[b * d..(b + 1) * d])).collect();
    let l1: Vec<f64> = (0..f1.len() / d).flat_map(|b| alg.casimirs_raw(&f1[b * d..(b + 1) * d])).collect();
    let label_shift = l0.iter().zip(&l1).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
    Ok(ThetaReport {
        theta,
        abelian: alg.is_abelian(),
        constraint_difference,
        flux_shift,
        flux_shift_oracle: oracle,
        oracle_mismatch,
        label_shift,
        bianchi_defect: if alg.is_abelian() { 0.0 } else { constraint_difference },
    })
}

/// On-shell chart data: a background and a basis of the solution space of
/// the constraint in the model's linear block.
#[derive(Clone, Debug)]
pub struct OnShellChart {
    pub background: PhasePoint,
    pub basis: DMatrix<f64>,
    pub block: Range<usize>,
}

impl OnShellChart {
    /// Builds the chart through `background` (its linear block is ignored).
    pub fn at(model: &dyn Model, background: &[f64]) -> Self {
        let block = model.linear_block();
        let mut bg = background.to_vec();
        for i in block.clone() {
            bg[i] = 0.0;
        }
        let jac = ps::constraint_jacobian(model, &bg);
        let cols: Vec<usize> = block.clone().collect();
        let jb = linalg::select_cols(&jac, &cols);
        OnShellChart {
            background: bg,
            basis: linalg::kernel(&jb),
            block,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Point with linear-block coordinates `basis · c`.
    pub fn point(&self, c: &[f64]) -> PhasePoint {
        let v = &self.basis * DVector::from_column_slice(c);
        let mut p = self.background.clone();
        for (k, i) in self.block.clone().enumerate() {
            p[i] = v[k];
        }
        p
    }

    /// Embeds a linear-block vector into the phase space (zero elsewhere).
    pub fn embed(&self, phase_dim: usize, v: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; phase_dim];
        for (k, i) in self.block.clone().enumerate() {
            p[i] = v[k];
        }
        p
    }

    /// Largest constraint residual over the basis points.
    pub fn residual(&self, model: &dyn Model) -> f64 {
        (0..self.dim())
            .map(|j| {
                let mut c = vec![0.0; self.dim()];
                c[j] = 1.0;
                ps::constraint_norm(model, &self.point(&c))
            })
            .fold(0.0, f64::max)
    }
}
