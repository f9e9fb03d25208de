//! Reduction by stages: flux annihilators, the constraint ideal and its
//! momentum map, the characteristic kernel of `ω` on the constraint surface,
//! the first-stage reduced form, and the second stage (KKS brackets, sector
//! labels, sector forms, the space of superselections).
//!
//! Flux data is handled through the boundary momentum
//! `μ_b = −s_b (flux_b(φ) − flux_b(φ•))`, so that the adjusted flux is the
//! plain pairing `Σ_b ⟨μ_b, ξ_b⟩` and equivariance reads
//! `D_{ρ(ξ)} μ = ad*(ξ) μ + k(ξ, ·)`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::liealg::{dot, Cocycle2, LieAlgebra};
use crate::linalg::{self, Subspace};
use crate::models::OnShellChart;
use crate::phasespace::{self as ps, Model, PhasePoint};
use crate::rng::{self, SampleRng};

// ---------------------------------------------------------------------------
// Boundary momentum
// ---------------------------------------------------------------------------

/// Adjusted boundary momentum `μ(φ)`, one dual vector per boundary vertex.
pub fn boundary_momentum(model: &dyn Model, phi: &[f64]) -> Vec<f64> {
    let cx = model.complex();
    let d = model.algebra().dim();
    let f = ps::flux_density(model, phi);
    let f0 = ps::flux_density(model, &model.reference());
    let mut mu = vec![0.0; f.len()];
    for (i, &v) in cx.boundary_vertices().iter().enumerate() {
        let s = cx.flux_sign(v);
        for k in 0..d {
            mu[i * d + k] = -s * (f[i * d + k] - f0[i * d + k]);
        }
    }
    mu
}

/// Jacobian of `μ` with respect to the phase-space coordinates.
pub fn boundary_momentum_jacobian(model: &dyn Model, phi: &[f64]) -> DMatrix<f64> {
    let cx = model.complex();
    let d = model.algebra().dim();
    let mut j = ps::flux_jacobian(model, phi);
    for (i, &v) in cx.boundary_vertices().iter().enumerate() {
        let s = cx.flux_sign(v);
        for k in 0..d {
            j.row_mut(i * d + k).scale_mut(-s);
        }
    }
    j
}

/// Gauge-algebra indices of boundary vertices, in boundary order.
pub fn boundary_indices(model: &dyn Model) -> Vec<usize> {
    let d = model.algebra().dim();
    model
        .complex()
        .boundary_vertices()
        .iter()
        .flat_map(|&v| (v * d..(v + 1) * d).collect::<Vec<_>>())
        .collect()
}

/// Gauge-algebra indices of interior vertices.
pub fn interior_indices(model: &dyn Model) -> Vec<usize> {
    let d = model.algebra().dim();
    model
        .complex()
        .interior_vertices()
        .iter()
        .flat_map(|&v| (v * d..(v + 1) * d).collect::<Vec<_>>())
        .collect()
}

/// Boundary cocycle `k` as a dense matrix on the boundary gauge algebra.
pub fn boundary_cocycle(model: &dyn Model) -> DMatrix<f64> {
    let full = ps::cocycle_matrix(model, &model.reference());
    let b = boundary_indices(model);
    linalg::select_cols(&linalg::select_rows(&full, &b), &b)
}

// ---------------------------------------------------------------------------
// Annihilators
// ---------------------------------------------------------------------------

/// Off-shell flux annihilator: `ξ` with `D_v⟨μ, ξ⟩ = 0` for every `v`, at
/// every sample point.
pub fn annihilator_offshell(model: &dyn Model, samples: &[PhasePoint]) -> Subspace {
    let n = model.gauge_dim();
    let b = boundary_indices(model);
    let mut rows: Vec<DMatrix<f64>> = vec![];
    let reference = model.reference();
    for p in std::iter::once(&reference).chain(samples) {
        let jm = boundary_momentum_jacobian(model, p);
        // functional ξ ↦ (μ-derivative)ᵀ ξ_∂
        let mut m = DMatrix::zeros(jm.ncols(), n);
        for (i, &k) in b.iter().enumerate() {
            m.set_column(k, &jm.row(i).transpose());
        }
        rows.push(m);
    }
    Subspace::kernel_of(&stack(&rows, n))
}

/// On-shell flux annihilator: `ξ` pairing to zero with `μ(φ)` for all `φ` in
/// the on-shell charts through the given backgrounds.
pub fn annihilator_onshell(model: &dyn Model, backgrounds: &[PhasePoint]) -> Result<Subspace> {
    if backgrounds.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = model.gauge_dim();
    let b = boundary_indices(model);
    let mut rows = vec![];
    for bg in backgrounds {
        let chart = OnShellChart::at(model, bg);
        let mut pts = vec![chart.background.clone()];
        for j in 0..chart.dim() {
            let mut c = vec![0.0; chart.dim()];
            c[j] = 1.0;
            pts.push(chart.point(&c));
        }
        let mut m = DMatrix::zeros(pts.len(), n);
        for (r, p) in pts.iter().enumerate() {
            let mu = boundary_momentum(model, p);
            for (i, &k) in b.iter().enumerate() {
                m[(r, k)] = mu[i];
            }
        }
        rows.push(m);
    }
    Ok(Subspace::kernel_of(&stack(&rows, n)))
}

fn stack(blocks: &[DMatrix<f64>], n: usize) -> DMatrix<f64> {
    let total: usize = blocks.iter().map(|m| m.nrows()).sum();
    let mut out = DMatrix::zeros(total, n);
    let mut r = 0;
    for m in blocks {
        out.view_mut((r, 0), (m.nrows(), n)).copy_from(m);
        r += m.nrows();
    }
    out
}

/// Largest relative distance of `[basis, ξ]` from the subspace, over the
/// given probe fields.
pub fn ideal_residual(alg: &LieAlgebra, ideal: &Subspace, probes: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..ideal.dim() {
        let x: Vec<f64> = ideal.basis.column(c).iter().copied().collect();
        for p in probes {
            let br = ps::bracket_fields(alg, &x, p);
            let v = DVector::from_vec(br);
            if v.norm() > 0.0 {
                worst = worst.max(ideal.distance(&v) * v.norm() / (1.0 + v.norm()));
            }
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct AnnihilatorReport {
    pub dim_offshell: usize,
    pub dim_onshell: usize,
    pub gap: usize,
    pub offshell_in_onshell: f64,
    pub ideal_residual_offshell: f64,
    pub ideal_residual_onshell: f64,
    /// `𝔑 ⊆ ker c•(g)` over sampled `g`.
    pub group_cocycle_defect: f64,
    /// `ker c•(g) ⊆ ker k•(ξ, ·)` tested as `𝔑 ⊥ k(ξ, ·)` over sampled `ξ`.
    pub algebra_cocycle_defect: f64,
    pub offshell_is_boundary_vanishing: bool,
}

/// Computes both annihilators and the containment chain.
pub fn annihilator_report(
    model: &dyn Model,
    samples: &[PhasePoint],
    backgrounds: &[PhasePoint],
    probes: &[Vec<f64>],
) -> Result<(Subspace, Subspace, AnnihilatorReport)> {
    let off = annihilator_offshell(model, samples);
    let on = annihilator_onshell(model, backgrounds)?;
    let alg = model.algebra();
    let mut group_defect: f64 = 0.0;
    let mut alg_defect: f64 = 0.0;
    let kmat = ps::cocycle_matrix(model, &model.reference());
    for p in probes {
        let c = ps::group_cocycle_c(model, p)?;
        let cv = DVector::from_vec(c);
        let proj = on.basis.transpose() * &cv;
        group_defect = group_defect.max(proj.amax());
        let kx = kmat.transpose() * DVector::from_column_slice(p);
        alg_defect = alg_defect.max((on.basis.transpose() * kx).amax());
    }
    let b = boundary_indices(model);
    let boundary_vanishing = (0..off.dim()).all(|c| b.iter().all(|&k| off.basis[(k, c)].abs() < 1e-10))
        && off.dim() == interior_indices(model).len();
    let report = AnnihilatorReport {
        dim_offshell: off.dim(),
        dim_onshell: on.dim(),
        gap: on.dim().saturating_sub(off.dim()),
        offshell_in_onshell: on.containment_defect(&off.basis),
        ideal_residual_offshell: ideal_residual(alg, &off, probes),
        ideal_residual_onshell: ideal_residual(alg, &on, probes),
        group_cocycle_defect: group_defect,
        algebra_cocycle_defect: alg_defect,
        offshell_is_boundary_vanishing: boundary_vanishing,
    };
    Ok((off, on, report))
}

// ---------------------------------------------------------------------------
// Constraint ideal and justness
// ---------------------------------------------------------------------------

/// `J₀(φ)(ξ₀) = bulk(ξ₀) + adjusted_flux(ξ₀)` for `ξ₀` in the ideal.
pub fn constraint_momentum_j0(model: &dyn Model, ideal: &Subspace, phi: &[f64], xi0: &[f64], tol: f64) -> Result<f64> {
    let dist = ideal.distance(&DVector::from_column_slice(xi0));
    if dist > tol {
        return Err(Error::OutsideIdeal(dist));
    }
    let ev = ps::momentum(model, phi, xi0);
    Ok(ev.bulk + ps::adjusted_flux(model, phi, xi0, &model.reference()))
}

#[derive(Clone, Debug, Serialize)]
pub struct JustnessReport {
    pub rank_j0: usize,
    pub rank_constraint: usize,
    pub rank_joint: usize,
    pub two_sided: bool,
    /// Largest `|J₀|` over on-shell samples.
    pub onshell_max: f64,
    /// Smallest over off-shell probes of the largest `|J₀|` (must be > 0).
    pub offshell_min_detect: f64,
    pub equivariance_defect: f64,
}

/// Two-sided rank check that `J₀ = 0` cuts out exactly the constraint
/// surface, per background (affine maps in the linear block).
pub fn justness_check(
    model: &dyn Model,
    ideal: &Subspace,
    backgrounds: &[PhasePoint],
    probes: &[Vec<f64>],
    tol: f64,
) -> Result<JustnessReport> {
    let block = model.linear_block();
    let cols: Vec<usize> = block.clone().collect();
    let mut ranks = (0, 0, 0);
    let mut two_sided = true;
    let mut onshell_max: f64 = 0.0;
    let mut detect = f64::INFINITY;
    let mut equiv: f64 = 0.0;
    for (bi, bg) in backgrounds.iter().enumerate() {
        let mut base = bg.clone();
        for i in block.clone() {
            base[i] = 0.0;
        }
        // J₀ rows: −ξ₀ᵀ ∂G restricted to the block, with the affine offset
        let jg = model.density_jacobian(&base);
        let jgb = linalg::select_cols(&jg, &cols);
        let k = ideal.dim();
        let nb = cols.len();
        let mut jm = DMatrix::zeros(k, nb + 1);
        for c in 0..k {
            let x: Vec<f64> = ideal.basis.column(c).iter().copied().collect();
            let row = -(jgb.transpose() * DVector::from_column_slice(&x));
            jm.view_mut((c, 0), (1, nb)).copy_from(&row.transpose());
            jm[(c, nb)] = constraint_momentum_j0(model, ideal, &base, &x, 1e-8)?;
        }
        let cj = linalg::select_cols(&ps::constraint_jacobian(model, &base), &cols);
        let c0 = ps::constraint_residual(model, &base);
        let mut cm = DMatrix::zeros(cj.nrows(), nb + 1);
        cm.view_mut((0, 0), (cj.nrows(), nb)).copy_from(&cj);
        for (r, v) in c0.iter().enumerate() {
            cm[(r, nb)] = *v;
        }
        let (rj, rc) = (linalg::rank(&jm), linalg::rank(&cm));
        let mut joint = DMatrix::zeros(k + cm.nrows(), nb + 1);
        joint.view_mut((0, 0), (k, nb + 1)).copy_from(&jm);
        joint.view_mut((k, 0), (cm.nrows(), nb + 1)).copy_from(&cm);
        let rjt = linalg::rank(&joint);
        two_sided &= rj == rc && rc == rjt;
        if bi == 0 {
            ranks = (rj, rc, rjt);
        }
        // forward direction on sampled on-shell points
        let chart = OnShellChart::at(model, bg);
        for p in probes.iter().take(3) {
            let c: Vec<f64> = (0..chart.dim()).map(|i| p[i % p.len()]).collect();
            let phi = chart.point(&c);
            for col in 0..k {
                let x: Vec<f64> = ideal.basis.column(col).iter().copied().collect();
                onshell_max = onshell_max.max(constraint_momentum_j0(model, ideal, &phi, &x, 1e-8)?.abs());
            }
            // equivariance under an Abelian gauge transformation: J₀ is invariant
            if model.algebra().is_abelian() {
                let moved = model.act(&phi, p)?;
                let offp: Vec<f64> = phi.iter().enumerate().map(|(i, v)| v + 1e-1 * ((i % 7) as f64 - 3.0)).collect();
                let movedp = model.act(&offp, p)?;
                for col in 0..k {
                    let x: Vec<f64> = ideal.basis.column(col).iter().copied().collect();
                    let a = constraint_momentum_j0(model, ideal, &phi, &x, 1e-8)?;
                    let b = constraint_momentum_j0(model, ideal, &moved, &x, 1e-8)?;
                    let a2 = constraint_momentum_j0(model, ideal, &offp, &x, 1e-8)?;
                    let b2 = constraint_momentum_j0(model, ideal, &movedp, &x, 1e-8)?;
                    equiv = equiv.max((a - b).abs()).max((a2 - b2).abs());
                }
            }
        }
        // reverse direction: unit-divergence probes at each interior vertex
        let jc = ps::constraint_jacobian(model, &base);
        let d = model.algebra().dim();
        for r in (0..jc.nrows()).step_by(d) {
            // a block direction that violates constraint row r
            let row = linalg::select_cols(&jc.rows(r, 1).into_owned(), &cols);
            let n = row.norm();
            if n == 0.0 {
                continue;
            }
            let dir: Vec<f64> = row.iter().map(|x| x / (n * n)).collect();
            let mut phi = base.clone();
            for (t, &i) in cols.iter().enumerate() {
                phi[i] += dir[t];
            }
            let worst = (0..k)
                .map(|col| {
                    let x: Vec<f64> = ideal.basis.column(col).iter().copied().collect();
                    constraint_momentum_j0(model, ideal, &phi, &x, 1e-8).map(f64::abs)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            detect = detect.min(worst);
        }
    }
    let _ = tol;
    Ok(JustnessReport {
        rank_j0: ranks.0,
        rank_constraint: ranks.1,
        rank_joint: ranks.2,
        two_sided,
        onshell_max,
        offshell_min_detect: if detect.is_finite() { detect } else { 0.0 },
        equivariance_defect: equiv,
    })
}

// ---------------------------------------------------------------------------
// First stage
// ---------------------------------------------------------------------------

/// Tangent space of the constraint surface at `φ`.
pub fn constraint_tangent(model: &dyn Model, phi: &[f64]) -> Subspace {
    let jc = ps::constraint_jacobian(model, phi);
    if jc.nrows() == 0 {
        return Subspace::full(model.phase_dim());
    }
    Subspace::kernel_of(&jc)
}

/// Span of `ρ(ξ)` for `ξ` in a subspace of the gauge algebra.
pub fn orbit_span(model: &dyn Model, phi: &[f64], ideal: &DMatrix<f64>) -> Subspace {
    let r = model.rho_matrix(phi);
    Subspace::span(&(r * ideal))
}

fn check_on_shell(model: &dyn Model, phi: &[f64], tol: f64) -> Result<()> {
    let r = ps::constraint_norm(model, phi);
    if r > tol {
        Err(Error::OffShell(r))
    } else {
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    /// `dim ker ω` on the full phase space.
    pub ambient_degeneracy: usize,
    /// Largest angle between the kernel and `V₀ + ker ω`.
    pub angle_mod_degeneracy: f64,
    pub dim_tangent: usize,
    pub dim_kernel: usize,
    pub dim_orbit: usize,
    pub dim_ideal: usize,
    pub isotropy_in_ideal: usize,
    pub max_angle: f64,
    pub dim_subideal_orbit: usize,
    pub strict_gap: usize,
    pub orbit_in_tangent: f64,
}

/// `ker(ω|_{TC})` compared with `V₀ = ρ(𝔤₀)`, plus the strict containment
/// for the subideal supported on all interior vertices but one.
pub fn characteristic_kernel(
    model: &dyn Model,
    phi: &[f64],
    ideal: &Subspace,
    tol: f64,
) -> Result<(Subspace, Subspace, KernelReport)> {
    check_on_shell(model, phi, tol)?;
    let tc = constraint_tangent(model, phi);
    let om = model.omega_matrix();
    let restricted = tc.basis.transpose() * &om * &tc.basis;
    let kc = linalg::kernel(&restricted);
    let kernel = Subspace::span(&(&tc.basis * kc));
    let v0 = orbit_span(model, phi, &ideal.basis);
    let iso = linalg::kernel(&(model.rho_matrix(phi) * &ideal.basis)).ncols();
    let angles = kernel.principal_angles(&v0);
    let max_angle = if kernel.dim() == v0.dim() {
        angles.into_iter().fold(0.0, f64::max)
    } else {
        std::f64::consts::FRAC_PI_2
    };
    // proper subideal: drop the first interior vertex
    let d = model.algebra().dim();
    let inner = interior_indices(model);
    let kept: Vec<usize> = inner.iter().copied().skip(d).collect();
    let mut sub = DMatrix::zeros(model.gauge_dim(), kept.len());
    for (c, &k) in kept.iter().enumerate() {
        sub[(k, c)] = 1.0;
    }
    let vj = orbit_span(model, phi, &sub);
    // a degenerate ambient ω puts ker ω inside the kernel as well
    let degenerate = linalg::kernel(&om);
    let mut both = DMatrix::zeros(om.nrows(), v0.dim() + degenerate.ncols());
    both.columns_mut(0, v0.dim()).copy_from(&v0.basis);
    both.columns_mut(v0.dim(), degenerate.ncols()).copy_from(&degenerate);
    let widened = Subspace::span(&both);
    let angle_mod_degeneracy = if kernel.dim() == widened.dim() {
        kernel.principal_angles(&widened).into_iter().fold(0.0, f64::max)
    } else {
        std::f64::consts::FRAC_PI_2
    };
    let report = KernelReport {
        ambient_degeneracy: degenerate.ncols(),
        angle_mod_degeneracy,
        dim_tangent: tc.dim(),
        dim_kernel: kernel.dim(),
        dim_orbit: v0.dim(),
        dim_ideal: ideal.dim(),
        isotropy_in_ideal: iso,
        max_angle,
        dim_subideal_orbit: vj.dim(),
        strict_gap: kernel.dim().saturating_sub(vj.dim()),
        orbit_in_tangent: tc.containment_defect(&v0.basis),
    };
    Ok((kernel, v0, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct ReducedForm {
    #[serde(skip)]
    pub basis: DMatrix<f64>,
    #[serde(skip)]
    pub omega: DMatrix<f64>,
    pub dim: usize,
    pub antisymmetry: f64,
    pub smallest_singular: f64,
    pub spectrum: Vec<f64>,
}

/// `ω` on an orthonormal complement of `V₀` in `T_φC`.
pub fn reduced_form(model: &dyn Model, phi: &[f64], ideal: &Subspace, tol: f64) -> Result<ReducedForm> {
    let (kernel, _, _) = characteristic_kernel(model, phi, ideal, tol)?;
    let tc = constraint_tangent(model, phi);
    let q = tc.complement_of(&kernel);
    let om = model.omega_matrix();
    let red = q.basis.transpose() * &om * &q.basis;
    let antisymmetry = (&red + red.transpose()).amax();
    let (sv, _) = linalg::full_svd(&red);
    Ok(ReducedForm {
        dim: q.dim(),
        antisymmetry,
        smallest_singular: sv.last().copied().unwrap_or(f64::INFINITY),
        spectrum: sv,
        basis: q.basis,
        omega: red,
    })
}

/// `max_q |ω(ρ(ξ), q) − D_q ⟨μ, ξ⟩|` over the quotient basis.
pub fn residual_flux_and_flow(model: &dyn Model, phi: &[f64], xi: &[f64], reduced: &ReducedForm) -> f64 {
    let om = model.omega_matrix();
    let rho = DVector::from_vec(model.rho(phi, xi));
    let lhs = rho.transpose() * &om * &reduced.basis;
    let jm = boundary_momentum_jacobian(model, phi);
    let xb: Vec<f64> = boundary_indices(model).iter().map(|&k| xi[k]).collect();
    let rhs = DVector::from_vec(xb).transpose() * jm * &reduced.basis;
    (lhs - rhs).amax()
}

/// Component of `ρ(ξ)` in the quotient chart.
pub fn projected_generator(model: &dyn Model, phi: &[f64], xi: &[f64], reduced: &ReducedForm) -> Vec<f64> {
    let rho = DVector::from_vec(model.rho(phi, xi));
    (reduced.basis.transpose() * rho).as_slice().to_vec()
}

// ---------------------------------------------------------------------------
// Second stage
// ---------------------------------------------------------------------------

/// Value of a Kirillov–Kostant–Souriau bracket of two linear functions.
#[derive(Clone, Debug, Serialize)]
pub struct KksValue {
    /// Dual field of the linear part (`g[ξ₁, ξ₂]` pointwise).
    pub linear: Vec<f64>,
    /// Central part `K(ξ₁, ξ₂)`.
    pub central: f64,
}

/// Bracket of the linear functions `α ↦ ⟨α, g⁻¹f₁⟩`, `α ↦ ⟨α, g⁻¹f₂⟩` on
/// boundary dual data.
pub fn kks_bracket(alg: &LieAlgebra, f1: &[f64], f2: &[f64], k: Option<&Cocycle2>) -> Result<KksValue> {
    let d = alg.dim();
    if f1.len() != f2.len() || f1.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: f1.len(),
            got: f2.len(),
        });
    }
    let x1 = sharp_fields(alg, f1);
    let x2 = sharp_fields(alg, f2);
    let br = ps::bracket_fields(alg, &x1, &x2);
    let central = match k {
        Some(k) => {
            if k.dim() != f1.len() {
                return Err(Error::DimensionMismatch {
                    expected: f1.len(),
                    got: k.dim(),
                });
            }
            k.eval(&x1, &x2)
        }
        None => 0.0,
    };
    Ok(KksValue {
        linear: flat_fields(alg, &br),
        central,
    })
}

fn sharp_fields(alg: &LieAlgebra, f: &[f64]) -> Vec<f64> {
    let d = alg.dim();
    f.chunks(d).flat_map(|c| alg.sharp(c)).collect()
}

fn flat_fields(alg: &LieAlgebra, x: &[f64]) -> Vec<f64> {
    let d = alg.dim();
    x.chunks(d).flat_map(|c| alg.flat(c)).collect()
}

/// Cyclic sum `{{f₁,f₂},f₃} + cyclic` of the bracket on linear functions,
/// returned as (linear part max, central part).
pub fn kks_jacobi(alg: &LieAlgebra, f: [&[f64]; 3], k: Option<&Cocycle2>) -> Result<f64> {
    let mut lin = vec![0.0; f[0].len()];
    let mut central = 0.0;
    for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let ab = kks_bracket(alg, f[a], f[b], k)?;
        let abc = kks_bracket(alg, &ab.linear, f[c], k)?;
        for (l, v) in lin.iter_mut().zip(&abc.linear) {
            *l += v;
        }
        central += abc.central;
    }
    Ok(lin.iter().fold(central.abs(), |m, x| m.max(x.abs())))
}

/// Label of a flux superselection sector.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SectorLabel {
    /// Orbit invariants of the boundary momentum.
    pub casimirs: Vec<f64>,
    /// Component index under the declared reachability convention.
    pub q: usize,
}

/// Data needed to label sectors of one model.
pub struct SectorContext {
    pub abelian: bool,
    pub d: usize,
    /// Boundary cocycle.
    pub k: DMatrix<f64>,
    /// Basis of `range(k)^⊥` (Abelian affine-orbit invariants).
    pub invariants: DMatrix<f64>,
}

impl SectorContext {
    pub fn new(model: &dyn Model) -> Self {
        let k = boundary_cocycle(model);
        let invariants = linalg::kernel(&k.transpose());
        SectorContext {
            abelian: model.algebra().is_abelian(),
            d: model.algebra().dim(),
            k,
            invariants,
        }
    }

    pub fn label_of(&self, alg: &LieAlgebra, mu: &[f64]) -> SectorLabel {
        let casimirs = if self.abelian {
            (self.invariants.transpose() * DVector::from_column_slice(mu)).as_slice().to_vec()
        } else {
            mu.chunks(self.d).flat_map(|c| alg.casimirs_raw(c)).collect()
        };
        SectorLabel { casimirs, q: 0 }
    }

    /// Tangent of the (affine) orbit at `μ`: columns `ad*(ζ)μ + k(ζ, ·)`.
    pub fn orbit_tangent(&self, alg: &LieAlgebra, mu: &[f64]) -> DMatrix<f64> {
        let n = mu.len();
        let mut x = DMatrix::zeros(n, n);
        for c in 0..n {
            let mut z = vec![0.0; n];
            z[c] = 1.0;
            let col = ps::coadjoint_fields(alg, &z, mu);
            for r in 0..n {
                x[(r, c)] = col[r] + self.k[(c, r)];
            }
        }
        x
    }

    /// Orbit form `Ω(X_ζ₁, X_ζ₂) = −(⟨μ,[ζ₁,ζ₂]⟩ + k(ζ₁,ζ₂))`.
    pub fn orbit_form(&self, alg: &LieAlgebra, mu: &[f64], z1: &[f64], z2: &[f64]) -> f64 {
        let br = ps::bracket_fields(alg, z1, z2);
        let kz = (DVector::from_column_slice(z1).transpose() * &self.k * DVector::from_column_slice(z2))[(0, 0)];
        -(dot(mu, &br) + kz)
    }
}

pub fn sector_label(model: &dyn Model, ctx: &SectorContext, phi: &[f64], tol: f64) -> Result<SectorLabel> {
    check_on_shell(model, phi, tol)?;
    Ok(ctx.label_of(model.algebra(), &boundary_momentum(model, phi)))
}

#[derive(Clone, Debug, Serialize)]
pub struct SectorForm {
    #[serde(skip)]
    pub tangent: DMatrix<f64>,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub dim_tangent: usize,
    pub rank: usize,
    /// `max |i_{ρ(ξ)} ω_[f](w)|` over the gauge basis and the tangent basis.
    pub basicness: f64,
    pub antisymmetry: f64,
}

/// `ω_[f] = ω − μ*Ω_f` on `T_φ S_[f]`, with the full basicness check.
pub fn sector_form(model: &dyn Model, ctx: &SectorContext, fbar: &[f64], phi: &[f64], tol: f64) -> Result<SectorForm> {
    check_on_shell(model, phi, tol)?;
    let alg = model.algebra();
    let mu = boundary_momentum(model, phi);
    let l1 = ctx.label_of(alg, &mu);
    let l2 = ctx.label_of(alg, fbar);
    let mismatch = l1
        .casimirs
        .iter()
        .zip(&l2.casimirs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if mismatch > 1e-8 {
        return Err(Error::NotOnOrbit(mismatch));
    }
    let tc = constraint_tangent(model, phi);
    let jm = boundary_momentum_jacobian(model, phi);
    let x = ctx.orbit_tangent(alg, &mu);
    let xr = Subspace::span(&x);
    let f = &jm * &tc.basis;
    let off_orbit = &f - xr.projector() * &f;
    let c = linalg::kernel(&off_orbit);
    let ts = Subspace::span(&(&tc.basis * c));
    // ζ for each tangent vector: least squares X ζ = Dμ(w)
    let zeta_of = |w: &DVector<f64>| -> Vec<f64> { linalg::lstsq(&x, &(&jm * w), 1e-12).as_slice().to_vec() };
    let om = model.omega_matrix();
    let n = ts.dim();
    let zetas: Vec<Vec<f64>> = (0..n).map(|j| zeta_of(&ts.basis.column(j).into_owned())).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let w1 = ts.basis.column(i);
            let w2 = ts.basis.column(j);
            m[(i, j)] = (w1.transpose() * &om * w2)[(0, 0)] - ctx.orbit_form(alg, &mu, &zetas[i], &zetas[j]);
        }
    }
    let antisymmetry = (&m + m.transpose()).amax();
    // basicness: ρ(ξ) against every tangent vector, for every basis ξ
    let b = boundary_indices(model);
    let mut basic: f64 = 0.0;
    let mut e = vec![0.0; model.gauge_dim()];
    for g in 0..model.gauge_dim() {
        e[g] = 1.0;
        let rho = DVector::from_vec(model.rho(phi, &e));
        let zr: Vec<f64> = b.iter().map(|&k| e[k]).collect();
        for j in 0..n {
            let w = ts.basis.column(j);
            let val = (rho.transpose() * &om * w)[(0, 0)] - ctx.orbit_form(alg, &mu, &zr, &zetas[j]);
            basic = basic.max(val.abs());
        }
        e[g] = 0.0;
    }
    Ok(SectorForm {
        dim_tangent: n,
        rank: linalg::rank(&m),
        basicness: basic,
        antisymmetry,
        tangent: ts.basis,
        matrix: m,
    })
}

// ---------------------------------------------------------------------------
// Space of superselections
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct SquareReport {
    pub samples: usize,
    /// Largest label difference between the two paths.
    pub label_mismatch: f64,
    /// Largest difference of `μ(φ◁g)` and `Ad*(g_∂)μ(φ) + C(g)`.
    pub flux_mismatch: f64,
    pub realized_labels: usize,
}

/// Pointwise transport of boundary momentum: `Ad*(exp λ_b) μ_b` plus the
/// group cocycle of the model.
pub fn transport_boundary(model: &dyn Model, mu: &[f64], lambda: &[f64]) -> Result<Vec<f64>> {
    let alg = model.algebra();
    let d = alg.dim();
    let b = boundary_indices(model);
    let mut out = vec![0.0; mu.len()];
    for (i, chunk) in mu.chunks(d).enumerate() {
        let lb: Vec<f64> = (0..d).map(|k| lambda[b[i * d + k]]).collect();
        let m = alg.exp_ad(&lb).transpose();
        let moved = m * DVector::from_column_slice(chunk);
        out[i * d..(i + 1) * d].copy_from_slice(moved.as_slice());
    }
    let c = ps::group_cocycle_c(model, lambda)?;
    for (i, &k) in b.iter().enumerate() {
        out[i] += c[k];
    }
    Ok(out)
}

/// Two-path check: act then restrict-and-label, versus restrict, act with
/// the boundary group and label.
pub fn superselection_square(
    model: &dyn Model,
    ctx: &SectorContext,
    points: &[PhasePoint],
    gauges: &[Vec<f64>],
    tol: f64,
) -> Result<SquareReport> {
    let alg = model.algebra();
    let mut label_mismatch: f64 = 0.0;
    let mut flux_mismatch: f64 = 0.0;
    let mut labels = BTreeSet::new();
    for (phi, lam) in points.iter().zip(gauges) {
        check_on_shell(model, phi, tol)?;
        let moved = model.act(phi, lam)?;
        let mu_a = boundary_momentum(model, &moved);
        let mu = boundary_momentum(model, phi);
        let mu_b = transport_boundary(model, &mu, lam)?;
        let la = ctx.label_of(alg, &mu_a);
        let lb = ctx.label_of(alg, &mu_b);
        let l0 = ctx.label_of(alg, &mu);
        for ((x, y), z) in la.casimirs.iter().zip(&lb.casimirs).zip(&l0.casimirs) {
            label_mismatch = label_mismatch.max((x - y).abs()).max((x - z).abs());
        }
        for (x, y) in mu_a.iter().zip(&mu_b) {
            flux_mismatch = flux_mismatch.max((x - y).abs());
        }
        labels.insert(label_key(&l0));
    }
    Ok(SquareReport {
        samples: points.len(),
        label_mismatch,
        flux_mismatch,
        realized_labels: labels.len(),
    })
}

/// Labels rounded to 1e-8 for set membership.
pub fn label_key(l: &SectorLabel) -> Vec<i64> {
    l.casimirs
        .iter()
        .map(|x| (x * 1e8).round() as i64)
        .chain(std::iter::once(l.q as i64))
        .collect()
}

// ---------------------------------------------------------------------------
// Sampling helpers, label connectivity, central extensions
// ---------------------------------------------------------------------------

/// Random on-shell point: a background (with the non-linear block zeroed
/// when `flat`) and a random point of the linear chart through it.
pub fn onshell_sample(model: &dyn Model, r: &mut SampleRng, scale: f64, flat: bool) -> PhasePoint {
    let mut bg = model.random_point(r, scale);
    if flat {
        let block = model.linear_block();
        for (i, x) in bg.iter_mut().enumerate() {
            if !block.contains(&i) {
                *x = 0.0;
            }
        }
    }
    let chart = OnShellChart::at(model, &bg);
    chart.point(&rng::uniform_vec(r, chart.dim(), scale))
}

/// Random gauge parameter that is one constant on boundary vertices and
/// their neighbours (so boundary fluxes transform pointwise exactly).
pub fn boundary_constant_gauge(model: &dyn Model, r: &mut SampleRng, scale: f64) -> Vec<f64> {
    let cx = model.complex();
    let d = model.algebra().dim();
    let mut lam = rng::uniform_vec(r, model.gauge_dim(), scale);
    let c = rng::uniform_vec(r, d, scale);
    let mut near = vec![false; cx.n_vertices()];
    for &b in cx.boundary_vertices() {
        near[b] = true;
    }
    for &(t, h) in cx.edges() {
        if cx.is_boundary_vertex(t) || cx.is_boundary_vertex(h) {
            near[t] = true;
            near[h] = true;
        }
    }
    for (v, &flag) in near.iter().enumerate() {
        if flag {
            lam[v * d..(v + 1) * d].copy_from_slice(&c);
        }
    }
    lam
}

/// Boundary gauge parameter moving `μ₁` to `μ₂` when their labels agree,
/// with the residual of the move. Abelian: least squares on the range of
/// `k`; su(2)-type: pointwise rotations.
pub fn connect_labels(model: &dyn Model, ctx: &SectorContext, mu1: &[f64], mu2: &[f64]) -> Result<(Vec<f64>, f64)> {
    let alg = model.algebra();
    let d = alg.dim();
    if ctx.abelian {
        let diff = DVector::from_iterator(mu1.len(), mu2.iter().zip(mu1).map(|(a, b)| a - b));
        // k(λ, ·) = kᵀ λ
        let kt = ctx.k.transpose();
        let lam = linalg::lstsq(&kt, &diff, 1e-12);
        let res = (&kt * &lam - &diff).amax();
        return Ok((lam.as_slice().to_vec(), res));
    }
    if d != 3 || alg.pairing() != &DMatrix::identity(3, 3) {
        return Err(Error::Unsupported {
            model: model.name().into(),
            what: "label connectivity for this algebra".into(),
        });
    }
    let mut lam = vec![0.0; mu1.len()];
    let mut res: f64 = 0.0;
    for b in 0..mu1.len() / d {
        let f1 = nalgebra::Vector3::from_column_slice(&mu1[b * d..(b + 1) * d]);
        let f2 = nalgebra::Vector3::from_column_slice(&mu2[b * d..(b + 1) * d]);
        let l = if f1.norm() < 1e-300 || f2.norm() < 1e-300 {
            nalgebra::Vector3::zeros()
        } else {
            let axis = f1.cross(&f2);
            let angle = axis.norm().atan2(f1.dot(&f2));
            let n = if axis.norm() > 1e-14 * f1.norm() * f2.norm() {
                axis.normalize()
            } else {
                // parallel or antiparallel: any axis orthogonal to f1
                let trial = if f1.x.abs() < 0.9 * f1.norm() { nalgebra::Vector3::x() } else { nalgebra::Vector3::y() };
                f1.cross(&trial).normalize()
            };
            // Ad*(exp λ) rotates by −|λ| about λ
            -angle * n
        };
        let moved = alg.exp_ad(l.as_slice()).transpose() * f1;
        res = res.max((moved - f2).amax());
        lam[b * d..(b + 1) * d].copy_from_slice(l.as_slice());
    }
    Ok((lam, res))
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionReport {
    pub samples: usize,
    /// Largest distance between the affine orbit point of `f` and the
    /// coadjoint orbit point of `(f, 1)` in the extension.
    pub orbit_defect: f64,
    /// Largest deviation of the central component from 1.
    pub center_defect: f64,
    pub extension_jacobi: f64,
}

/// Affine action of `exp(x)` on `f`: `e^{M} f + φ₁(M) K(x, ·)` with
/// `M = ad(x)ᵀ`, `φ₁` summed as a power series.
pub fn affine_group_action(alg: &LieAlgebra, k: &Cocycle2, x: &[f64], f: &[f64]) -> Vec<f64> {
    let m = alg.ad_matrix(x).transpose();
    let kx = DVector::from_vec(k.contract(x));
    let mut term = kx.clone();
    let mut phi = kx.clone();
    for j in 1..200 {
        term = &m * term / (j as f64 + 1.0);
        phi += &term;
        if term.amax() < 1e-18 * phi.amax().max(1.0) {
            break;
        }
    }
    let lin = alg.exp_ad(x).transpose() * DVector::from_column_slice(f);
    (lin + phi).as_slice().to_vec()
}

/// Compares affine orbits of `f` with coadjoint orbits of `(f, 1)` in the
/// central extension by `k`, over products of two sampled exponentials.
pub fn central_extension_check(alg: &LieAlgebra, k: &Cocycle2, samples: usize, seed: u64) -> Result<ExtensionReport> {
    let ext = alg.central_extend(k)?;
    let d = alg.dim();
    let rows = crate::par::map_indexed(samples, |i| {
        let mut r = rng::stream(seed, i as u64);
        let f = rng::uniform_vec(&mut r, d, 1.0);
        let x1 = rng::uniform_vec(&mut r, d, 1.0);
        let x2 = rng::uniform_vec(&mut r, d, 1.0);
        let aff = affine_group_action(alg, k, &x2, &affine_group_action(alg, k, &x1, &f));
        let mut fe = f.clone();
        fe.push(1.0);
        let mut y = DVector::from_vec(fe);
        for x in [&x1, &x2] {
            let mut xe = x.clone();
            xe.push(0.0);
            y = ext.exp_ad(&xe).transpose() * y;
        }
        let orbit = (0..d).fold(0.0f64, |m, j| m.max((y[j] - aff[j]).abs()));
        (orbit, (y[d] - 1.0).abs())
    });
    Ok(ExtensionReport {
        samples,
        orbit_defect: rows.iter().fold(0.0, |m, r| m.max(r.0)),
        center_defect: rows.iter().fold(0.0, |m, r| m.max(r.1)),
        extension_jacobi: ext.checks().jacobi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{instantiate, ModelSpec};
    use crate::rng;

    fn model(name: &str, mesh: &str, n: usize) -> Box<dyn Model> {
        instantiate(&ModelSpec::new(name, mesh, n)).unwrap()
    }

    fn backgrounds(m: &dyn Model, count: usize, scale: f64, seed: u64) -> Vec<PhasePoint> {
        (0..count)
            .map(|i| {
                let mut r = rng::stream(seed, i as u64);
                m.random_point(&mut r, scale)
            })
            .collect()
    }

    fn probes(m: &dyn Model, count: usize, seed: u64) -> Vec<Vec<f64>> {
        (0..count)
            .map(|i| rng::uniform_vec(&mut rng::stream(seed, 100 + i as u64), m.gauge_dim(), 1.0))
            .collect()
    }

    fn onshell(m: &dyn Model, bg: &[f64], seed: u64) -> PhasePoint {
        let chart = OnShellChart::at(m, bg);
        chart.point(&rng::uniform_vec(&mut rng::stream(seed, 7), chart.dim(), 1.0))
    }

    #[test]
    fn interval_offshell_annihilator_is_interior() {
        let m = model("maxwell", "interval", 4);
        let off = annihilator_offshell(m.as_ref(), &backgrounds(m.as_ref(), 2, 1.0, 1));
        assert_eq!(off.dim(), 3);
        let circle = model("maxwell", "circle", 5);
        assert_eq!(annihilator_offshell(circle.as_ref(), &[]).dim(), 5);
    }

    #[test]
    fn abelian_onshell_gap_is_constants() {
        for (mesh, n) in [("interval", 4), ("disk", 2), ("annulus", 1)] {
            let m = model("maxwell", mesh, n);
            let bgs = backgrounds(m.as_ref(), 2, 1.0, 2);
            let (off, on, rep) =
                annihilator_report(m.as_ref(), &bgs, &bgs, &probes(m.as_ref(), 3, 2)).unwrap();
            assert_eq!(rep.gap, 1, "{mesh}");
            assert!(rep.offshell_in_onshell < 1e-10);
            assert!(rep.offshell_is_boundary_vanishing);
            let ones = DVector::from_element(m.gauge_dim(), 1.0);
            assert!(on.distance(&ones) < 1e-10);
            assert!(off.distance(&ones) > 0.1);
        }
    }

    #[test]
    fn su2_annihilators_coincide() {
        let m = model("ym_su2", "disk", 1);
        let bgs = backgrounds(m.as_ref(), 2, 0.8, 3);
        let (_, _, rep) = annihilator_report(m.as_ref(), &bgs, &bgs, &probes(m.as_ref(), 3, 3)).unwrap();
        assert_eq!(rep.gap, 0);
        assert!(rep.ideal_residual_offshell < 1e-10 && rep.ideal_residual_onshell < 1e-10);
    }

    #[test]
    fn cs_annihilator_contains_constants_and_kills_cocycle() {
        let m = model("chern_simons_disk", "disk", 2);
        let bgs = backgrounds(m.as_ref(), 1, 1.0, 4);
        let pr = probes(m.as_ref(), 3, 4);
        let (_, on, rep) = annihilator_report(m.as_ref(), &bgs, &bgs, &pr).unwrap();
        assert_eq!(rep.gap, 1);
        assert!(rep.group_cocycle_defect < 1e-10 && rep.algebra_cocycle_defect < 1e-10);
        assert!(on.distance(&DVector::from_element(m.gauge_dim(), 1.0)) < 1e-10);
    }

    #[test]
    fn j0_rejects_parameters_outside_the_ideal() {
        let m = model("maxwell", "disk", 1);
        let off = annihilator_offshell(m.as_ref(), &[]);
        let xi = vec![1.0; m.gauge_dim()];
        let phi = m.reference();
        assert!(matches!(
            constraint_momentum_j0(m.as_ref(), &off, &phi, &xi, 1e-10),
            Err(Error::OutsideIdeal(_))
        ));
    }

    #[test]
    fn justness_is_two_sided() {
        for (name, mesh, n, scale) in [("maxwell", "disk", 2, 1.0), ("ym_su2", "disk", 1, 0.5), ("chern_simons_disk", "disk", 2, 1.0)] {
            let m = model(name, mesh, n);
            let bgs = backgrounds(m.as_ref(), 2, scale, 5);
            let on = annihilator_onshell(m.as_ref(), &bgs).unwrap();
            let rep = justness_check(m.as_ref(), &on, &bgs, &probes(m.as_ref(), 3, 5), 1e-10).unwrap();
            assert!(rep.two_sided, "{name}: {rep:?}");
            assert!(rep.onshell_max < 1e-10, "{name}");
            assert!(rep.offshell_min_detect > 1e-6, "{name}");
            assert!(rep.equivariance_defect < 1e-12, "{name}");
        }
    }

    #[test]
    fn kernel_identification_and_reduced_count() {
        let m = model("maxwell", "disk", 2);
        let bgs = backgrounds(m.as_ref(), 2, 1.0, 6);
        let on = annihilator_onshell(m.as_ref(), &bgs).unwrap();
        let phi = onshell(m.as_ref(), &bgs[0], 6);
        let (_, _, rep) = characteristic_kernel(m.as_ref(), &phi, &on, 1e-10).unwrap();
        assert!(rep.max_angle < 1e-8, "{rep:?}");
        assert_eq!(rep.dim_kernel, rep.dim_ideal - rep.isotropy_in_ideal);
        assert!(rep.strict_gap >= 1);
        let red = reduced_form(m.as_ref(), &phi, &on, 1e-10).unwrap();
        let cx = m.complex();
        let harmonic = cx.n_edges() - cx.n_vertices() + 1;
        let count = 2 * harmonic + 2 * (cx.boundary_vertices().len() - 1);
        assert_eq!(red.dim, count);
        assert!(red.antisymmetry < 1e-13 && red.smallest_singular > 1e-8);
        let i1 = model("maxwell", "interval", 3);
        let bg = backgrounds(i1.as_ref(), 1, 1.0, 7);
        let on1 = annihilator_onshell(i1.as_ref(), &bg).unwrap();
        let red1 = reduced_form(i1.as_ref(), &onshell(i1.as_ref(), &bg[0], 7), &on1, 1e-10).unwrap();
        assert_eq!(red1.dim, 2);
    }

    #[test]
    fn su2_kernel_identification_at_flat_background() {
        let m = model("ym_su2", "disk", 1);
        let bgs = backgrounds(m.as_ref(), 2, 0.7, 8);
        let on = annihilator_onshell(m.as_ref(), &bgs).unwrap();
        let phi = onshell(m.as_ref(), &m.reference(), 8);
        let (_, _, rep) = characteristic_kernel(m.as_ref(), &phi, &on, 1e-10).unwrap();
        assert!(rep.max_angle < 1e-8, "{rep:?}");
        assert!(rep.strict_gap >= 1);
        assert!(characteristic_kernel(m.as_ref(), &bgs[0], &on, 1e-10).is_err());
    }

    #[test]
    fn reduced_flux_generates_reduced_flow() {
        let m = model("maxwell", "disk", 2);
        let bgs = backgrounds(m.as_ref(), 1, 1.0, 9);
        let on = annihilator_onshell(m.as_ref(), &bgs).unwrap();
        let phi = onshell(m.as_ref(), &bgs[0], 9);
        let red = reduced_form(m.as_ref(), &phi, &on, 1e-10).unwrap();
        for xi in probes(m.as_ref(), 5, 9) {
            assert!(residual_flux_and_flow(m.as_ref(), &phi, &xi, &red) < 1e-8);
        }
        let inner: Vec<f64> = on.basis.column(0).iter().copied().collect();
        let p = projected_generator(m.as_ref(), &phi, &inner, &red);
        assert!(p.iter().all(|x| x.abs() < 1e-10));
        // basicness of ω̲: same spectrum after a gauge transformation
        let moved = m.act(&phi, &probes(m.as_ref(), 1, 10)[0]).unwrap();
        let red2 = reduced_form(m.as_ref(), &moved, &on, 1e-10).unwrap();
        for (a, b) in red.spectrum.iter().zip(&red2.spectrum) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn kks_examples() {
        let su2 = LieAlgebra::su2();
        let v = kks_bracket(&su2, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], None).unwrap();
        assert!((v.linear[2] - 1.0).abs() < 1e-15 && v.linear[0] == 0.0);
        let u1 = LieAlgebra::u1();
        let z = kks_bracket(&u1, &[2.0, 1.0], &[0.5, 3.0], None).unwrap();
        assert!(z.linear.iter().all(|&x| x == 0.0) && z.central == 0.0);
        let mut r = rng::stream(11, 0);
        let k = Cocycle2::from_dense(&{
            let a = DMatrix::from_fn(6, 6, |_, _| 0.0);
            a
        })
        .unwrap();
        for _ in 0..20 {
            let f: Vec<Vec<f64>> = (0..3).map(|_| rng::uniform_vec(&mut r, 6, 1.0)).collect();
            assert!(kks_jacobi(&su2, [&f[0], &f[1], &f[2]], Some(&k)).unwrap() < 1e-11);
        }
        assert!(kks_bracket(&su2, &[1.0, 0.0, 0.0], &[1.0; 6], None).is_err());
    }

    #[test]
    fn abelian_sector_form_is_radiative() {
        let m = model("maxwell", "disk", 2);
        let ctx = SectorContext::new(m.as_ref());
        let bgs = backgrounds(m.as_ref(), 1, 1.0, 12);
        let phi = onshell(m.as_ref(), &bgs[0], 12);
        let mu = boundary_momentum(m.as_ref(), &phi);
        let sf = sector_form(m.as_ref(), &ctx, &mu, &phi, 1e-10).unwrap();
        let cx = m.complex();
        assert_eq!(sf.rank, 2 * (cx.n_edges() - cx.n_vertices() + 1));
        assert!(sf.basicness < 1e-8);
        let mut other = mu.clone();
        other[0] += 1.0;
        assert!(matches!(
            sector_form(m.as_ref(), &ctx, &other, &phi, 1e-10),
            Err(Error::NotOnOrbit(_))
        ));
    }

    #[test]
    fn su2_sector_form_is_basic() {
        let m = model("ym_su2", "interval", 3);
        let ctx = SectorContext::new(m.as_ref());
        let phi = onshell(m.as_ref(), &m.reference(), 13);
        let mu = boundary_momentum(m.as_ref(), &phi);
        let sf = sector_form(m.as_ref(), &ctx, &mu, &phi, 1e-10).unwrap();
        assert!(sf.basicness < 1e-8, "{}", sf.basicness);
        assert!(sf.antisymmetry < 1e-12);
    }

    #[test]
    fn square_commutes_for_abelian_and_cs() {
        for name in ["maxwell", "chern_simons_disk"] {
            let m = model(name, "disk", 2);
            let ctx = SectorContext::new(m.as_ref());
            let bgs = backgrounds(m.as_ref(), 5, 1.0, 14);
            let pts: Vec<_> = bgs.iter().enumerate().map(|(i, b)| onshell(m.as_ref(), b, i as u64)).collect();
            let gs = probes(m.as_ref(), 5, 14);
            let rep = superselection_square(m.as_ref(), &ctx, &pts, &gs, 1e-10).unwrap();
            assert!(rep.label_mismatch < 1e-8 && rep.flux_mismatch < 1e-8, "{name} {rep:?}");
        }
    }

    #[test]
    fn labels_connect_by_gauge() {
        let m = model("ym_su2", "interval", 3);
        let ctx = SectorContext::new(m.as_ref());
        let mut r = rng::stream(15, 0);
        let mu1 = rng::uniform_vec(&mut r, 6, 1.0);
        let lam = rng::uniform_vec(&mut r, 6, 1.0);
        let mu2 = transport_boundary(m.as_ref(), &mu1, &{
            // transport on boundary indices only
            let mut full = vec![0.0; m.gauge_dim()];
            for (i, &k) in boundary_indices(m.as_ref()).iter().enumerate() {
                full[k] = lam[i];
            }
            full
        })
        .unwrap();
        assert_eq!(label_key(&ctx.label_of(m.algebra(), &mu1)), label_key(&ctx.label_of(m.algebra(), &mu2)));
        let (_, res) = connect_labels(m.as_ref(), &ctx, &mu1, &mu2).unwrap();
        assert!(res < 1e-12);
        let (_, res) = connect_labels(m.as_ref(), &ctx, &mu1, &mu1).unwrap();
        assert!(res < 1e-14);
        let cs = model("chern_simons_disk", "disk", 2);
        let cctx = SectorContext::new(cs.as_ref());
        let nb = cs.complex().boundary_vertices().len();
        let mu = rng::uniform_vec(&mut r, nb, 1.0);
        let shift = cctx.k.transpose() * DVector::from_vec(rng::uniform_vec(&mut r, nb, 1.0));
        let shifted: Vec<f64> = mu.iter().zip(shift.iter()).map(|(a, b)| a + b).collect();
        let (_, res) = connect_labels(cs.as_ref(), &cctx, &mu, &shifted).unwrap();
        assert!(res < 1e-10);
    }

    #[test]
    fn central_extension_orbits_match_affine_orbits() {
        let alg = LieAlgebra::abelian(2);
        let k = Cocycle2::from_dense(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        let rep = central_extension_check(&alg, &k, 20, 1).unwrap();
        assert!(rep.orbit_defect < 1e-10 && rep.center_defect < 1e-12 && rep.extension_jacobi < 1e-12);
        // a coboundary cocycle on su(2): k(x, y) = ⟨f₀, [x, y]⟩
        let su2 = LieAlgebra::su2();
        let f0 = [0.3, -0.2, 0.5];
        let kd = DMatrix::from_fn(3, 3, |i, j| (0..3).map(|c| f0[c] * su2.structure(c, i, j)).sum());
        let k = Cocycle2::from_dense(&kd).unwrap();
        let rep = central_extension_check(&su2, &k, 20, 2).unwrap();
        assert!(rep.orbit_defect < 1e-10, "{rep:?}");
    }

    #[test]
    fn boundary_constant_gauge_is_constant_near_boundary() {
        let m = model("ym_su2", "disk", 2);
        let lam = boundary_constant_gauge(m.as_ref(), &mut rng::stream(16, 0), 1.0);
        let b0 = m.complex().boundary_vertices()[0];
        for &b in m.complex().boundary_vertices() {
            assert_eq!(&lam[b * 3..b * 3 + 3], &lam[b0 * 3..b0 * 3 + 3]);
        }
        let p = onshell_sample(m.as_ref(), &mut rng::stream(16, 1), 0.5, true);
        assert!(ps::constraint_norm(m.as_ref(), &p) < 1e-12);
    }
}
