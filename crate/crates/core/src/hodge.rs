//! Twisted Laplacians on vertex fields, Neumann and Dirichlet solves, the
//! radiative/Coulombic split of `E`, the Coulomb connection and the
//! Faddeev–Popov operator.
//!
//! Conventions: `D_A` is the matrix of `ξ ↦ d_A ξ` and `W = diag(|⋆e|/|e|) ⊗ g`
//! the edge mass. The adjoint `d_A^⋆` is the `W`-adjoint, so the stiffness
//! `L = D_Aᵀ W D_A` is symmetric and the discrete Green formula is exact. A
//! dual edge field `E` has vertex divergence `G = D_Aᵀ E` (bulk and boundary
//! parts as in the phase space), and the Coulombic part of `E` is
//! `W D_A φ` with `L φ = G`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::Serialize;

use crate::complex::{d_twisted_raw, vertex_divergence, CellComplex};
use crate::error::{Error, Result};
use crate::liealg::LieAlgebra;
use crate::linalg::{self, Subspace};
use crate::tol;

/// Largest system solved by dense factorization.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    Neumann,
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// Dense below [`DENSE_LIMIT`] unknowns, conjugate gradients above.
    Auto,
    Dense,
    Cg,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub method: &'static str,
    pub unknowns: usize,
    pub iterations: usize,
    /// `‖L φ − b‖ / ‖b‖` on the active unknowns.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Full vertex field (boundary values included in Dirichlet mode).
    pub phi: Vec<f64>,
    pub report: SolveReport,
}

/// `L = D_Aᵀ W D_A` with Neumann or Dirichlet boundary handling.
pub struct TwistedLaplacian {
    cx: CellComplex,
    alg: LieAlgebra,
    a: Vec<f64>,
    mode: BoundaryMode,
    edge_mass: Vec<f64>,
    /// Active unknowns (vertex×d indices).
    dofs: Vec<usize>,
    /// Position of each vertex×d index among the active unknowns.
    slot: Vec<Option<usize>>,
    full: CsrMatrix<f64>,
    active: CsrMatrix<f64>,
    /// Orthonormal basis of `ker L` on the active unknowns (Neumann only).
    kernel: DMatrix<f64>,
}

impl TwistedLaplacian {
    pub fn new(cx: &CellComplex, alg: &LieAlgebra, a: &[f64], mode: BoundaryMode) -> Result<Self> {
        let d = alg.dim();
        if a.len() != cx.n_edges() * d {
            return Err(Error::DimensionMismatch {
                expected: cx.n_edges() * d,
                got: a.len(),
            });
        }
        if alg.pairing().clone().cholesky().is_none() {
            return Err(Error::Unsupported {
                model: alg.name().into(),
                what: "a Laplacian (the pairing is not positive definite)".into(),
            });
        }
        let nv = cx.n_vertices() * d;
        let edge_mass = cx.mass(1);
        let full = assemble(cx, alg, a, &edge_mass);
        let dofs: Vec<usize> = match mode {
            BoundaryMode::Neumann => (0..nv).collect(),
            BoundaryMode::Dirichlet => cx
                .interior_vertices()
                .iter()
                .flat_map(|&v| (v * d..(v + 1) * d).collect::<Vec<_>>())
                .collect(),
        };
        let mut slot = vec![None; nv];
        for (i, &k) in dofs.iter().enumerate() {
            slot[k] = Some(i);
        }
        let active = if mode == BoundaryMode::Neumann {
            full.clone()
        } else {
            restrict(&full, &slot, dofs.len())
        };
        let kernel = match mode {
            BoundaryMode::Neumann => covariant_constants(cx, alg, a),
            BoundaryMode::Dirichlet => DMatrix::zeros(dofs.len(), 0),
        };
        Ok(TwistedLaplacian {
            cx: cx.clone(),
            alg: alg.clone(),
            a: a.to_vec(),
            mode,
            edge_mass,
            dofs,
            slot,
            full,
            active,
            kernel,
        })
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn complex(&self) -> &CellComplex {
        &self.cx
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.alg
    }

    pub fn connection(&self) -> &[f64] {
        &self.a
    }

    pub fn unknowns(&self) -> usize {
        self.dofs.len()
    }

    /// Kernel basis on the active unknowns.
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel.ncols()
    }

    /// Active matrix as a dense matrix.
    pub fn dense(&self) -> DMatrix<f64> {
        DMatrix::from(&self.active)
    }

    pub fn symmetry_defect(&self) -> f64 {
        let m = self.dense();
        (&m - m.transpose()).amax()
    }

    /// `D_A ξ` on a full vertex field.
    pub fn d_a(&self, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.a.len()];
        d_twisted_raw(&self.cx, &self.alg, &self.a, xi, &mut out);
        out
    }

    /// `D_Aᵀ E` for a dual edge field.
    pub fn divergence(&self, e: &[f64]) -> Vec<f64> {
        vertex_divergence(&self.cx, &self.alg, &self.a, e)
    }

    /// `W α`: algebra edge field to dual edge field.
    pub fn lower(&self, alpha: &[f64]) -> Vec<f64> {
        let d = self.alg.dim();
        let g = self.alg.pairing();
        let mut out = vec![0.0; alpha.len()];
        for e in 0..self.edge_mass.len() {
            for j in 0..d {
                let s: f64 = (0..d).map(|k| g[(j, k)] * alpha[e * d + k]).sum();
                out[e * d + j] = self.edge_mass[e] * s;
            }
        }
        out
    }

    /// `W⁻¹ E`.
    pub fn raise(&self, e_field: &[f64]) -> Vec<f64> {
        let d = self.alg.dim();
        let gi = self.alg.pairing_inv();
        let mut out = vec![0.0; e_field.len()];
        for e in 0..self.edge_mass.len() {
            for j in 0..d {
                let s: f64 = (0..d).map(|k| gi[(j, k)] * e_field[e * d + k]).sum();
                out[e * d + j] = s / self.edge_mass[e];
            }
        }
        out
    }

    /// `⟨⟨E₁, E₂⟩⟩ = Σ E₁ᵀ W⁻¹ E₂` on dual edge fields.
    pub fn dual_inner(&self, e1: &[f64], e2: &[f64]) -> f64 {
        crate::liealg::dot(e1, &self.raise(e2))
    }

    /// `Σ_v |⋆v| g(ξ_v, η_v)` on vertex fields.
    pub fn vertex_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.alg.dim();
        let g = self.alg.pairing();
        let m0 = self.cx.mass(0);
        let mut s = 0.0;
        for (v, mv) in m0.iter().enumerate() {
            for j in 0..d {
                for k in 0..d {
                    s += mv * g[(j, k)] * x[v * d + j] * y[v * d + k];
                }
            }
        }
        s
    }

    fn gather(&self, full: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dofs.len(), self.dofs.iter().map(|&k| full[k]))
    }

    fn scatter(&self, x: &DVector<f64>, base: &[f64]) -> Vec<f64> {
        let mut out = base.to_vec();
        for (i, &k) in self.dofs.iter().enumerate() {
            out[k] = x[i];
        }
        out
    }

    /// Compatibility of a right-hand side with the Neumann kernel. Returns the
    /// relative residual and the most violated kernel vector.
    pub fn compatibility(&self, rhs: &[f64]) -> (f64, Vec<f64>) {
        if self.kernel.ncols() == 0 {
            return (0.0, vec![]);
        }
        let b = self.gather(rhs);
        let nb = b.norm();
        if nb == 0.0 {
            return (0.0, vec![]);
        }
        let proj = self.kernel.transpose() * &b;
        // the kernel direction the data pairs with is the certificate
        let cert = &self.kernel * &proj;
        let cert = if cert.norm() > 0.0 {
            cert.normalize()
        } else {
            self.kernel.column(0).into_owned()
        };
        (proj.norm() / nb, self.scatter(&cert, &vec![0.0; rhs.len()]))
    }

    /// Solves `L φ = rhs` (Neumann: kernel-orthogonal solution; Dirichlet:
    /// with the given boundary values, zero if `None`).
    pub fn solve(&self, rhs: &[f64], boundary: Option<&[f64]>, kind: SolverKind) -> Result<Solution> {
        let nv = self.cx.n_vertices() * self.alg.dim();
        if rhs.len() != nv {
            return Err(Error::DimensionMismatch {
                expected: nv,
                got: rhs.len(),
            });
        }
        let mut base = vec![0.0; nv];
        let mut b = self.gather(rhs);
        if self.mode == BoundaryMode::Dirichlet {
            if let Some(bv) = boundary {
                let d = self.alg.dim();
                for (i, &v) in self.cx.boundary_vertices().iter().enumerate() {
                    base[v * d..(v + 1) * d].copy_from_slice(&bv[i * d..(i + 1) * d]);
                }
                // move L_IB φ_B to the right-hand side
                let lb = &self.full * DVector::from_column_slice(&base);
                for (i, &k) in self.dofs.iter().enumerate() {
                    b[i] -= lb[k];
                }
            }
        } else {
            let (res, cert) = self.compatibility(rhs);
            if res > tol::COMPAT {
                return Err(Error::Incompatible {
                    residual: res,
                    kernel: cert,
                });
            }
            // drop the solver-noise component
            b -= &self.kernel * (self.kernel.transpose() * &b);
        }
        let use_dense = match kind {
            SolverKind::Dense => true,
            SolverKind::Cg => false,
            SolverKind::Auto => self.dofs.len() <= DENSE_LIMIT,
        };
        let (mut x, method, iterations) = if use_dense {
            (self.dense_solve(&b)?, "dense", 0)
        } else {
            let (x, it) = self.cg(&b)?;
            (x, "cg", it)
        };
        if self.mode == BoundaryMode::Neumann {
            x = self.orthogonalize(&x);
        }
        let r = &self.active * &x - &b;
        let nb = b.norm();
        let residual = if nb == 0.0 { r.norm() } else { r.norm() / nb };
        Ok(Solution {
            phi: self.scatter(&x, &base),
            report: SolveReport {
                method,
                unknowns: self.dofs.len(),
                iterations,
                residual,
            },
        })
    }

    fn dense_solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        // L + K Kᵀ is positive definite and agrees with L on compatible data
        let m = self.dense() + &self.kernel * self.kernel.transpose();
        let ch = m.cholesky().ok_or_else(|| Error::FlowFailure {
            steps: 0,
            reason: "Laplacian not positive definite on the kernel complement".into(),
        })?;
        Ok(ch.solve(b))
    }

    fn cg(&self, b: &DVector<f64>) -> Result<(DVector<f64>, usize)> {
        let n = b.len();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let row = self.active.row(i);
                row.col_indices()
                    .iter()
                    .zip(row.values())
                    .find(|(&c, _)| c == i)
                    .map_or(1.0, |(_, &v)| if v > 0.0 { v } else { 1.0 })
            })
            .collect();
        let nb = b.norm();
        let mut x = DVector::zeros(n);
        if nb == 0.0 {
            return Ok((x, 0));
        }
        let target = 1e-14 * nb;
        let mut r = b.clone();
        let mut z = DVector::from_iterator(n, r.iter().zip(&diag).map(|(a, d)| a / d));
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        let max_it = 20 * n + 100;
        for it in 0..max_it {
            let ap = &self.active * &p;
            let pap = p.dot(&ap);
            if pap <= 0.0 {
                return Err(Error::FlowFailure {
                    steps: it,
                    reason: "conjugate gradients lost positivity".into(),
                });
            }
            let alpha = rz / pap;
            x.axpy(alpha, &p, 1.0);
            r.axpy(-alpha, &ap, 1.0);
            if self.kernel.ncols() > 0 {
                r -= &self.kernel * (self.kernel.transpose() * &r);
            }
            if r.norm() <= target {
                return Ok((x, it + 1));
            }
            z = DVector::from_iterator(n, r.iter().zip(&diag).map(|(a, d)| a / d));
            let rz_new = r.dot(&z);
            p = &z + &p * (rz_new / rz);
            rz = rz_new;
        }
        // accept stagnation at round-off level
        if r.norm() <= 1e-11 * nb {
            return Ok((x, max_it));
        }
        Err(Error::FlowFailure {
            steps: max_it,
            reason: format!("conjugate gradients stalled at relative residual {:.3e}", r.norm() / nb),
        })
    }

    /// Removes the kernel component in the vertex mass inner product.
    fn orthogonalize(&self, x: &DVector<f64>) -> DVector<f64> {
        let k = self.kernel.ncols();
        if k == 0 {
            return x.clone();
        }
        let nv = self.dofs.len();
        let zero = vec![0.0; nv];
        let cols: Vec<Vec<f64>> = (0..k)
            .map(|j| self.scatter(&self.kernel.column(j).into_owned(), &zero))
            .collect();
        let xf = self.scatter(x, &zero);
        let gram = DMatrix::from_fn(k, k, |i, j| self.vertex_inner(&cols[i], &cols[j]));
        let proj = DVector::from_iterator(k, cols.iter().map(|c| self.vertex_inner(c, &xf)));
        let coef = gram.lu().solve(&proj).unwrap_or_else(|| DVector::zeros(k));
        let mut out = x.clone();
        for j in 0..k {
            out.axpy(-coef[j], &self.kernel.column(j), 1.0);
        }
        out
    }

    /// Slot of a vertex×d index among the active unknowns.
    pub fn slot(&self, k: usize) -> Option<usize> {
        self.slot[k]
    }
}

fn assemble(cx: &CellComplex, alg: &LieAlgebra, a: &[f64], edge_mass: &[f64]) -> CsrMatrix<f64> {
    let d = alg.dim();
    let n = cx.n_vertices() * d;
    let g = alg.pairing();
    let mut coo = CooMatrix::new(n, n);
    let id = DMatrix::<f64>::identity(d, d);
    for (e, &(t, h)) in cx.edges().iter().enumerate() {
        let half = alg.ad_matrix(&a[e * d..(e + 1) * d]) * 0.5;
        let p = &id + &half;
        let q = -&id + &half;
        let blocks = [
            (h, h, p.transpose() * g * &p),
            (h, t, p.transpose() * g * &q),
            (t, h, q.transpose() * g * &p),
            (t, t, q.transpose() * g * &q),
        ];
        for (r, c, b) in blocks {
            for i in 0..d {
                for j in 0..d {
                    let v = edge_mass[e] * b[(i, j)];
                    if v != 0.0 {
                        coo.push(r * d + i, c * d + j, v);
                    }
                }
            }
        }
    }
    CsrMatrix::from(&coo)
}

fn restrict(m: &CsrMatrix<f64>, slot: &[Option<usize>], n: usize) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for (r, c, &v) in m.triplet_iter() {
        if let (Some(i), Some(j)) = (slot[r], slot[c]) {
            coo.push(i, j, v);
        }
    }
    CsrMatrix::from(&coo)
}

/// Orthonormal basis of `ker d_A` on vertex fields, by transporting each
/// basis vector along a spanning tree with the Cayley map
/// `ξ_h = (1 + ½ad A)⁻¹(1 − ½ad A) ξ_t` and keeping the combinations that
/// close around every loop.
pub fn covariant_constants(cx: &CellComplex, alg: &LieAlgebra, a: &[f64]) -> DMatrix<f64> {
    let d = alg.dim();
    let nv = cx.n_vertices();
    let id = DMatrix::<f64>::identity(d, d);
    let mut vecs: Vec<DVector<f64>> = vec![];
    let mut seen = vec![false; nv];
    let scale = 1.0 + a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for root in 0..nv {
        if seen[root] {
            continue;
        }
        // transport of each basis vector: one d×d matrix per vertex
        let mut tr: Vec<Option<DMatrix<f64>>> = vec![None; nv];
        tr[root] = Some(id.clone());
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        let mut members = vec![root];
        let mut ok = true;
        while let Some(v) = queue.pop_front() {
            for &(e, o) in cx.star(v) {
                let (t, h) = cx.edges()[e];
                let w = if o > 0 { t } else { h };
                if seen[w] {
                    continue;
                }
                let half = alg.ad_matrix(&a[e * d..(e + 1) * d]) * 0.5;
                let (num, den) = if w == h {
                    (&id - &half, &id + &half)
                } else {
                    (&id + &half, &id - &half)
                };
                match den.lu().solve(&num) {
                    Some(step) => tr[w] = Some(step * tr[v].as_ref().unwrap()),
                    None => {
                        ok = false;
                        break;
                    }
                }
                seen[w] = true;
                members.push(w);
                queue.push_back(w);
            }
            if !ok {
                break;
            }
        }
        if !ok {
            return dense_kernel(cx, alg, a);
        }
        members.sort_unstable();
        let mut field = DMatrix::zeros(nv * d, d);
        for &v in &members {
            field.view_mut((v * d, 0), (d, d)).copy_from(tr[v].as_ref().unwrap());
        }
        // loop closure: d_A of the transported field must vanish everywhere
        let mut res = DMatrix::zeros(cx.n_edges() * d, d);
        for j in 0..d {
            let col: Vec<f64> = field.column(j).iter().copied().collect();
            let mut out = vec![0.0; cx.n_edges() * d];
            d_twisted_raw(cx, alg, a, &col, &mut out);
            res.set_column(j, &DVector::from_vec(out));
        }
        let (sv, v) = linalg::full_svd(&res);
        let cut = tol::RANK * scale;
        for (c, s) in sv.iter().enumerate() {
            if *s <= cut {
                vecs.push(&field * v.column(c));
            }
        }
    }
    if vecs.is_empty() {
        return DMatrix::zeros(nv * d, 0);
    }
    let m = DMatrix::from_columns(&vecs);
    linalg::range(&m)
}

fn dense_kernel(cx: &CellComplex, alg: &LieAlgebra, a: &[f64]) -> DMatrix<f64> {
    linalg::kernel(&crate::complex::d_twisted_matrix(cx, alg, a))
}

// ---------------------------------------------------------------------------
// Boundary-value problems and splits
// ---------------------------------------------------------------------------

/// Assembles the vertex right-hand side from a bulk density (interior
/// vertices, the constraint sign) and a boundary flux density, then solves
/// the Neumann problem.
pub fn neumann_solve(lap: &TwistedLaplacian, source: &[f64], bdry: &[f64]) -> Result<Solution> {
    let cx = lap.complex();
    let d = lap.algebra().dim();
    let mut rhs = vec![0.0; cx.n_vertices() * d];
    if source.len() != cx.interior_vertices().len() * d || bdry.len() != cx.boundary_vertices().len() * d {
        return Err(Error::DimensionMismatch {
            expected: cx.n_vertices() * d,
            got: source.len() + bdry.len(),
        });
    }
    for (i, &v) in cx.interior_vertices().iter().enumerate() {
        for k in 0..d {
            rhs[v * d + k] = -source[i * d + k];
        }
    }
    for (i, &v) in cx.boundary_vertices().iter().enumerate() {
        let s = cx.flux_sign(v);
        for k in 0..d {
            rhs[v * d + k] = s * bdry[i * d + k];
        }
    }
    lap.solve(&rhs, None, SolverKind::Auto)
}

#[derive(Clone, Debug, Serialize)]
pub struct Split {
    pub coulomb: Vec<f64>,
    pub radiative: Vec<f64>,
    #[serde(skip)]
    pub potential: Vec<f64>,
    /// `|⟨⟨E_coul, E_rad⟩⟩| / ‖E‖²`.
    pub orthogonality: f64,
    /// `‖E − E_coul − E_rad‖ / ‖E‖`.
    pub reconstruction: f64,
    /// Largest vertex divergence of `E_rad` relative to `‖E‖`.
    pub radiative_divergence: f64,
    pub solve: SolveReport,
}

/// `E = W D_A φ + E_rad` with `D_Aᵀ E_rad = 0` (bulk and boundary).
pub fn split_e(lap: &TwistedLaplacian, e_field: &[f64]) -> Result<Split> {
    if lap.mode() != BoundaryMode::Neumann {
        return Err(Error::Unsupported {
            model: "split".into(),
            what: "a Dirichlet Laplacian".into(),
        });
    }
    let g = lap.divergence(e_field);
    let sol = lap.solve(&g, None, SolverKind::Auto)?;
    let coulomb = lap.lower(&lap.d_a(&sol.phi));
    let radiative: Vec<f64> = e_field.iter().zip(&coulomb).map(|(e, c)| e - c).collect();
    let nc = lap.dual_inner(&coulomb, &coulomb).sqrt();
    let nr = lap.dual_inner(&radiative, &radiative).sqrt();
    let ne = lap.dual_inner(e_field, e_field).sqrt();
    // relative to ‖E‖²: the cosine is meaningless when one part is rounding noise
    let orthogonality = if nc == 0.0 || nr == 0.0 {
        0.0
    } else {
        lap.dual_inner(&coulomb, &radiative).abs() / (ne * ne)
    };
    let rec: Vec<f64> = e_field
        .iter()
        .zip(coulomb.iter().zip(&radiative))
        .map(|(e, (c, r))| e - c - r)
        .collect();
    let reconstruction = if ne == 0.0 {
        0.0
    } else {
        lap.dual_inner(&rec, &rec).sqrt() / ne
    };
    let div = lap.divergence(&radiative);
    let en = e_field.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let radiative_divergence = div.iter().fold(0.0f64, |m, x| m.max(x.abs())) / en.max(f64::MIN_POSITIVE);
    Ok(Split {
        coulomb,
        radiative,
        potential: sol.phi,
        orthogonality,
        reconstruction,
        radiative_divergence,
        solve: sol.report,
    })
}

/// Coulomb connection on a tangent vector `δA`: the `W`-least-squares
/// solution of `d_A Υ = δA`, i.e. `L Υ = D_Aᵀ W δA`, kernel-orthogonal.
pub fn coulomb_connection(lap: &TwistedLaplacian, da: &[f64]) -> Result<Vec<f64>> {
    let rhs = lap.divergence(&lap.lower(da));
    Ok(lap.solve(&rhs, None, SolverKind::Auto)?.phi)
}

// ---------------------------------------------------------------------------
// Faddeev–Popov operator
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct FpReport {
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub smallest_singular_neumann: f64,
    pub condition_neumann: f64,
    pub smallest_singular_dirichlet: f64,
    pub condition_dirichlet: f64,
    pub invertible_dirichlet: bool,
}

/// `D_{A₀}ᵀ W D_A` on vertex fields, with singular-value diagnostics.
pub fn faddeev_popov(cx: &CellComplex, alg: &LieAlgebra, a0: &[f64], a: &[f64]) -> FpReport {
    let d = alg.dim();
    let d0 = crate::complex::d_twisted_matrix(cx, alg, a0);
    let d1 = crate::complex::d_twisted_matrix(cx, alg, a);
    let mass = cx.mass(1);
    let g = alg.pairing();
    let ne = cx.n_edges();
    let w = DMatrix::from_fn(ne * d, ne * d, |r, c| {
        if r / d == c / d {
            mass[r / d] * g[(r % d, c % d)]
        } else {
            0.0
        }
    });
    let m = d0.transpose() * w * d1;
    let (sv_n, _) = linalg::full_svd(&m);
    let interior: Vec<usize> = cx
        .interior_vertices()
        .iter()
        .flat_map(|&v| (v * d..(v + 1) * d).collect::<Vec<_>>())
        .collect();
    let md = linalg::select_cols(&linalg::select_rows(&m, &interior), &interior);
    let (sv_d, _) = linalg::full_svd(&md);
    let stats = |sv: &[f64]| {
        let top = sv.first().copied().unwrap_or(0.0);
        let low = sv.last().copied().unwrap_or(0.0);
        let cond = if low > 0.0 { top / low } else { f64::INFINITY };
        (low, cond)
    };
    let (ln, cn) = stats(&sv_n);
    let (ld, cd) = stats(&sv_d);
    FpReport {
        matrix: m,
        smallest_singular_neumann: ln,
        condition_neumann: cn,
        smallest_singular_dirichlet: ld,
        condition_dirichlet: cd,
        invertible_dirichlet: sv_d.is_empty() || ld > linalg::rank_cut(&sv_d),
    }
}

/// Smallest Dirichlet singular value along `A₀ + t (A − A₀)`.
pub fn faddeev_popov_scan(cx: &CellComplex, alg: &LieAlgebra, a0: &[f64], a: &[f64], steps: usize) -> Vec<(f64, f64)> {
    (0..=steps)
        .map(|i| {
            let t = i as f64 / steps.max(1) as f64;
            let at: Vec<f64> = a0.iter().zip(a).map(|(x, y)| x + t * (y - x)).collect();
            (t, faddeev_popov(cx, alg, a0, &at).smallest_singular_dirichlet)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Subspace report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct HodgeReport {
    pub mesh: String,
    pub algebra: String,
    pub edge_dim: usize,
    pub vertex_dim: usize,
    pub dim_image_neumann: usize,
    pub dim_coimage_neumann: usize,
    pub dim_image_dirichlet: usize,
    pub dim_coimage_dirichlet: usize,
    pub neumann_sum_ok: bool,
    pub dirichlet_sum_ok: bool,
    /// Largest cosine between the two summands (0 means orthogonal).
    pub orthogonality_neumann: f64,
    pub orthogonality_dirichlet: f64,
    /// `W` maps the Neumann coimage onto `ker D_Aᵀ` and the image onto
    /// Coulombic duals.
    pub duality_defect: f64,
    pub kernel_dim: usize,
    pub smallest_singular_d_a: f64,
    pub laplacian_symmetry: f64,
    pub dirichlet_smallest_eigenvalue: f64,
}

/// Computes the four subspaces of the degree-1 splits in `W`-orthonormal
/// coordinates and checks orthogonality, dimensions and duality.
pub fn hodge_checks(cx: &CellComplex, alg: &LieAlgebra, a: &[f64]) -> Result<HodgeReport> {
    let lap = TwistedLaplacian::new(cx, alg, a, BoundaryMode::Neumann)?;
    let lap_d = TwistedLaplacian::new(cx, alg, a, BoundaryMode::Dirichlet)?;
    let d = alg.dim();
    let ne = cx.n_edges() * d;
    let nv = cx.n_vertices() * d;
    let da = crate::complex::d_twisted_matrix(cx, alg, a);
    // W = Hᵀ H with H = diag(√m) ⊗ Lᵀ and g = L Lᵀ
    let chol = alg.pairing().clone().cholesky().expect("checked in Laplacian");
    let lt = chol.l().transpose();
    let mass = cx.mass(1);
    let half = DMatrix::from_fn(ne, ne, |r, c| {
        if r / d == c / d {
            mass[r / d].sqrt() * lt[(r % d, c % d)]
        } else {
            0.0
        }
    });
    let y = &half * &da;
    let image_n = Subspace::span(&y);
    let coimage_n = Subspace::kernel_of(&y.transpose());
    let interior: Vec<usize> = cx
        .interior_vertices()
        .iter()
        .flat_map(|&v| (v * d..(v + 1) * d).collect::<Vec<_>>())
        .collect();
    let yd = linalg::select_cols(&y, &interior);
    let image_d = Subspace::span(&yd);
    let coimage_d = Subspace::kernel_of(&yd.transpose());
    let cosine = |p: &Subspace, q: &Subspace| {
        if p.dim() == 0 || q.dim() == 0 {
            0.0
        } else {
            (p.basis.transpose() * &q.basis).amax()
        }
    };
    let dual_rad = half.transpose() * &coimage_n.basis;
    // (E = W α = Hᵀ y for y in the coimage)
    let ker_dt = Subspace::kernel_of(&da.transpose());
    let duality_defect = if coimage_n.dim() == 0 {
        (ker_dt.dim() as f64).min(1.0)
    } else {
        let c = ker_dt.containment_defect(&dual_rad);
        if ker_dt.dim() == coimage_n.dim() {
            c
        } else {
            1.0
        }
    };
    let dense_d = lap_d.dense();
    let dirichlet_smallest_eigenvalue = if dense_d.nrows() == 0 {
        f64::INFINITY
    } else {
        dense_d.symmetric_eigenvalues().min()
    };
    Ok(HodgeReport {
        mesh: cx.name().into(),
        algebra: alg.name().into(),
        edge_dim: ne,
        vertex_dim: nv,
        dim_image_neumann: image_n.dim(),
        dim_coimage_neumann: coimage_n.dim(),
        dim_image_dirichlet: image_d.dim(),
        dim_coimage_dirichlet: coimage_d.dim(),
        neumann_sum_ok: image_n.dim() + coimage_n.dim() == ne,
        dirichlet_sum_ok: image_d.dim() + coimage_d.dim() == ne,
        orthogonality_neumann: cosine(&image_n, &coimage_n),
        orthogonality_dirichlet: cosine(&image_d, &coimage_d),
        duality_defect,
        kernel_dim: lap.kernel_dim(),
        smallest_singular_d_a: linalg::smallest_singular_value(&da),
        laplacian_symmetry: lap.symmetry_defect(),
        dirichlet_smallest_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let n: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt() / n
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let cx = CellComplex::disk(2).unwrap();
        let alg = LieAlgebra::u1();
        let lap = TwistedLaplacian::new(&cx, &alg, &vec![0.0; cx.n_edges()], BoundaryMode::Neumann).unwrap();
        let s = neumann_solve(
            &lap,
            &vec![0.0; cx.interior_vertices().len()],
            &vec![0.0; cx.boundary_vertices().len()],
        )
        .unwrap();
        assert!(s.phi.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn interval_field_is_entirely_coulombic() {
        let cx = CellComplex::interval(2).unwrap();
        let alg = LieAlgebra::u1();
        let lap = TwistedLaplacian::new(&cx, &alg, &[0.0, 0.0], BoundaryMode::Neumann).unwrap();
        let s = split_e(&lap, &[1.0, 2.0]).unwrap();
        assert!(rel(&s.coulomb, &[1.0, 2.0]) < 1e-12);
        assert!(s.radiative.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn net_abelian_flux_is_rejected_with_constant_certificate() {
        let cx = CellComplex::disk(2).unwrap();
        let alg = LieAlgebra::u1();
        let lap = TwistedLaplacian::new(&cx, &alg, &vec![0.0; cx.n_edges()], BoundaryMode::Neumann).unwrap();
        let nb = cx.boundary_vertices().len();
        let err = neumann_solve(&lap, &vec![0.0; cx.interior_vertices().len()], &vec![1.0; nb]).unwrap_err();
        match err {
            Error::Incompatible { kernel, .. } => {
                let c = kernel[0];
                assert!(c.abs() > 0.0);
                assert!(kernel.iter().all(|x| (x - c).abs() < 1e-12));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn gradient_fields_split_as_coulombic() {
        let cx = CellComplex::disk(3).unwrap();
        let alg = LieAlgebra::su2();
        let mut r = rng::stream(1, 0);
        let a = rng::uniform_vec(&mut r, cx.n_edges() * 3, 0.5);
        let lap = TwistedLaplacian::new(&cx, &alg, &a, BoundaryMode::Neumann).unwrap();
        let phi = rng::uniform_vec(&mut r, cx.n_vertices() * 3, 1.0);
        let e = lap.lower(&lap.d_a(&phi));
        let s = split_e(&lap, &e).unwrap();
        assert!(rel(&s.coulomb, &e) < 1e-10);
        let radiative = rng::uniform_vec(&mut r, cx.n_edges() * 3, 1.0);
        let s2 = split_e(&lap, &radiative).unwrap();
        let s3 = split_e(&lap, &s2.radiative).unwrap();
        assert!(rel(&s3.radiative, &s2.radiative) < 1e-10);
        assert!(s2.orthogonality < 1e-10 && s2.reconstruction < 1e-12);
    }

    #[test]
    fn cg_agrees_with_dense_oracle() {
        for (alg, mode) in [
            (LieAlgebra::u1(), BoundaryMode::Neumann),
            (LieAlgebra::su2(), BoundaryMode::Neumann),
            (LieAlgebra::su2(), BoundaryMode::Dirichlet),
        ] {
            let cx = CellComplex::annulus(2).unwrap();
            let d = alg.dim();
            let mut r = rng::stream(2, 0);
            let a = rng::uniform_vec(&mut r, cx.n_edges() * d, 0.4);
            let lap = TwistedLaplacian::new(&cx, &alg, &a, mode).unwrap();
            let e = rng::uniform_vec(&mut r, cx.n_edges() * d, 1.0);
            let rhs = lap.divergence(&e);
            let bv = rng::uniform_vec(&mut r, cx.boundary_vertices().len() * d, 1.0);
            let b = (mode == BoundaryMode::Dirichlet).then_some(bv.as_slice());
            let x1 = lap.solve(&rhs, b, SolverKind::Dense).unwrap();
            let x2 = lap.solve(&rhs, b, SolverKind::Cg).unwrap();
            assert!(rel(&x2.phi, &x1.phi) < 1e-10, "{}", rel(&x2.phi, &x1.phi));
            assert!(x1.report.residual < 1e-10 && x2.report.residual < 1e-10);
        }
    }

    #[test]
    fn abelian_kernel_is_constants_per_component() {
        for cx in [
            CellComplex::interval(5).unwrap(),
            CellComplex::disk(2).unwrap(),
            CellComplex::annulus(1).unwrap(),
            CellComplex::circle(7).unwrap(),
        ] {
            for alg in [LieAlgebra::u1(), LieAlgebra::abelian(2)] {
                let a = vec![0.3; cx.n_edges() * alg.dim()];
                let lap = TwistedLaplacian::new(&cx, &alg, &a, BoundaryMode::Neumann).unwrap();
                assert_eq!(lap.kernel_dim(), cx.n_components() * alg.dim());
            }
        }
    }

    #[test]
    fn kernel_matches_dense_null_space() {
        let cx = CellComplex::disk(1).unwrap();
        let su2 = LieAlgebra::su2();
        let mut r = rng::stream(3, 0);
        for scale in [0.0, 0.7] {
            let a = rng::uniform_vec(&mut r, cx.n_edges() * 3, scale);
            let k1 = covariant_constants(&cx, &su2, &a).ncols();
            let k2 = dense_kernel(&cx, &su2, &a).ncols();
            assert_eq!(k1, k2);
            assert_eq!(k1, if scale == 0.0 { 3 } else { 0 });
        }
        // a pure-gauge connection on a tree keeps a full kernel
        let tree = CellComplex::interval(4).unwrap();
        let a = rng::uniform_vec(&mut r, tree.n_edges() * 3, 0.7);
        assert_eq!(covariant_constants(&tree, &su2, &a).ncols(), 3);
    }

    #[test]
    fn coulomb_connection_recovers_pure_gauge_tangent() {
        let cx = CellComplex::disk(2).unwrap();
        let su2 = LieAlgebra::su2();
        let mut r = rng::stream(4, 0);
        let a = rng::uniform_vec(&mut r, cx.n_edges() * 3, 0.5);
        let lap = TwistedLaplacian::new(&cx, &su2, &a, BoundaryMode::Neumann).unwrap();
        assert_eq!(lap.kernel_dim(), 0);
        let xi = rng::uniform_vec(&mut r, cx.n_vertices() * 3, 1.0);
        let ups = coulomb_connection(&lap, &lap.d_a(&xi)).unwrap();
        assert!(rel(&ups, &xi) < 1e-8);
        // horizontal input: W-orthogonal to the image of d_A
        let s = split_e(&lap, &rng::uniform_vec(&mut r, cx.n_edges() * 3, 1.0)).unwrap();
        let horizontal = lap.raise(&s.radiative);
        let u0 = coulomb_connection(&lap, &horizontal).unwrap();
        assert!(u0.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn abelian_connection_matches_least_squares() {
        let cx = CellComplex::annulus(1).unwrap();
        let alg = LieAlgebra::u1();
        let mut r = rng::stream(5, 0);
        let a = rng::uniform_vec(&mut r, cx.n_edges(), 1.0);
        let lap = TwistedLaplacian::new(&cx, &alg, &a, BoundaryMode::Neumann).unwrap();
        let da = rng::uniform_vec(&mut r, cx.n_edges(), 1.0);
        let ups = coulomb_connection(&lap, &da).unwrap();
        // oracle: weighted least squares by SVD, then remove the constant
        let d0 = cx.d0_matrix();
        let sw = DMatrix::from_diagonal(&DVector::from_iterator(cx.n_edges(), cx.mass(1).iter().map(|m| m.sqrt())));
        let lhs = &sw * &d0;
        let rhs = &sw * DVector::from_vec(da);
        let mut x = crate::linalg::lstsq(&lhs, &rhs, 1e-12);
        let m0 = cx.mass(0);
        let mean = x.iter().zip(&m0).map(|(a, b)| a * b).sum::<f64>() / m0.iter().sum::<f64>();
        x.add_scalar_mut(-mean);
        assert!(rel(&ups, x.as_slice()) < 1e-10);
    }

    #[test]
    fn faddeev_popov_reduces_to_laplacian_and_ignores_abelian_backgrounds() {
        let cx = CellComplex::disk(2).unwrap();
        let su2 = LieAlgebra::su2();
        let mut r = rng::stream(6, 0);
        let a0 = rng::uniform_vec(&mut r, cx.n_edges() * 3, 0.5);
        let fp = faddeev_popov(&cx, &su2, &a0, &a0);
        let lap = TwistedLaplacian::new(&cx, &su2, &a0, BoundaryMode::Neumann).unwrap();
        assert!((&fp.matrix - lap.dense()).amax() < 1e-13);
        assert!(fp.invertible_dirichlet);
        let u1 = LieAlgebra::u1();
        let x = rng::uniform_vec(&mut r, cx.n_edges(), 1.0);
        let y = rng::uniform_vec(&mut r, cx.n_edges(), 1.0);
        let p = faddeev_popov(&cx, &u1, &x, &y);
        let q = faddeev_popov(&cx, &u1, &y, &x);
        assert_eq!(p.matrix, q.matrix);
        let scan = faddeev_popov_scan(&cx, &su2, &a0, &vec![3.0; cx.n_edges() * 3], 4);
        assert_eq!(scan.len(), 5);
    }

    #[test]
    fn hodge_report_dimensions() {
        let circle = CellComplex::circle(9).unwrap();
        let rep = hodge_checks(&circle, &LieAlgebra::u1(), &vec![0.0; 9]).unwrap();
        assert_eq!(rep.dim_coimage_neumann, circle.betti1());
        assert!(rep.neumann_sum_ok && rep.orthogonality_neumann < 1e-12);
        let disk = CellComplex::disk(2).unwrap();
        let mut r = rng::stream(7, 0);
        let a = rng::uniform_vec(&mut r, disk.n_edges() * 3, 0.6);
        let rep = hodge_checks(&disk, &LieAlgebra::su2(), &a).unwrap();
        assert!(rep.neumann_sum_ok && rep.dirichlet_sum_ok);
        assert!(rep.orthogonality_neumann < 1e-10 && rep.orthogonality_dirichlet < 1e-10);
        assert!(rep.duality_defect < 1e-10);
        assert_eq!(rep.kernel_dim, 0);
        assert!(rep.smallest_singular_d_a > 0.0);
        assert!(rep.laplacian_symmetry < 1e-13);
        assert!(rep.dirichlet_smallest_eigenvalue > 0.0);
    }

    #[test]
    fn indefinite_pairing_is_rejected() {
        let cx = CellComplex::interval(2).unwrap();
        let bf = LieAlgebra::preset("bf_su2").unwrap();
        assert!(TwistedLaplacian::new(&cx, &bf, &vec![0.0; 12], BoundaryMode::Neumann).is_err());
    }
}
