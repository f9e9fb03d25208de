//! Check registry. Every check wraps one library operation, records its
//! metrics and the bounds they were held to, and returns pass, fail or skip.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::Value;

use crate::complex::{d_twisted_raw, green_pairing, CellComplex};
use crate::corner::{self, BfCorner, CornerSpace};
use crate::error::{Error, Result};
use crate::hodge::{self, BoundaryMode, TwistedLaplacian};
use crate::liealg::{Cocycle2, LieAlgebra};
use crate::linalg;
use crate::models::{self, ModelSpec};
use crate::par;
use crate::phasespace::{self as ps, Model, PhasePoint};
use crate::reduction::{self as red, SectorContext};
use crate::rng::{self, SampleRng};
use crate::tol::Tolerances;

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub metric: String,
    pub relation: &'static str,
    pub bound: Value,
    pub value: Value,
    pub ok: bool,
}

/// Metrics and bound checks collected by one check.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Outcome {
    pub metrics: BTreeMap<String, Value>,
    pub assertions: Vec<Assertion>,
}

fn json<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

impl Outcome {
    pub fn put<T: Serialize>(&mut self, key: &str, v: T) {
        self.metrics.insert(key.into(), json(v));
    }

    fn assert(&mut self, key: &str, relation: &'static str, bound: Value, value: Value, ok: bool) {
        self.metrics.insert(key.into(), value.clone());
        self.assertions.push(Assertion {
            metric: key.into(),
            relation,
            bound,
            value,
            ok,
        });
    }

    pub fn le(&mut self, key: &str, v: f64, bound: f64) {
        self.assert(key, "<=", json(bound), json(v), v <= bound);
    }

    pub fn ge(&mut self, key: &str, v: f64, bound: f64) {
        self.assert(key, ">=", json(bound), json(v), v >= bound);
    }

    pub fn eq(&mut self, key: &str, v: usize, expected: usize) {
        self.assert(key, "==", json(expected), json(v), v == expected);
    }

    pub fn holds(&mut self, key: &str, flag: bool) {
        self.assert(key, "==", Value::Bool(true), Value::Bool(flag), flag);
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.ok)
    }
}

/// Everything a check may use.
pub struct Ctx<'a> {
    pub spec: &'a ModelSpec,
    pub model: Option<&'a dyn Model>,
    pub cx: &'a CellComplex,
    pub alg: &'a LieAlgebra,
    pub seed: u64,
    pub samples: usize,
    pub tol: &'a Tolerances,
}

impl Ctx<'_> {
    fn model(&self) -> Result<&dyn Model> {
        self.model.ok_or_else(|| unsupported(self.spec, "a bulk phase space"))
    }

    fn rng(&self, i: u64) -> SampleRng {
        rng::stream(self.seed, i)
    }

    fn is_yang_mills(&self) -> bool {
        matches!(self.spec.name.as_str(), "maxwell" | "ym_su2" | "theta_ym")
    }
}

fn unsupported(spec: &ModelSpec, what: &str) -> Error {
    Error::Unsupported {
        model: spec.name.clone(),
        what: what.into(),
    }
}

pub struct CheckDef {
    pub name: &'static str,
    /// Library operation the check exercises.
    pub operation: &'static str,
    pub run: fn(&Ctx) -> Result<Outcome>,
}

pub const REGISTRY: &[CheckDef] = &[
    CheckDef { name: "algebra", operation: "liealg::LieAlgebra::checks", run: algebra },
    CheckDef { name: "green_formula", operation: "complex::green_pairing", run: green_formula },
    CheckDef { name: "decomposition", operation: "phasespace::momentum", run: decomposition },
    CheckDef { name: "flow_residual", operation: "phasespace::flow_residual", run: flow_residual },
    CheckDef { name: "hodge_split", operation: "hodge::split_e", run: hodge_split },
    CheckDef { name: "gauss_law", operation: "hodge::neumann_solve", run: gauss_law },
    CheckDef { name: "annihilators", operation: "reduction::annihilator_report", run: annihilators },
    CheckDef { name: "justness", operation: "reduction::justness_check", run: justness },
    CheckDef { name: "kernel_identification", operation: "reduction::characteristic_kernel", run: kernel_identification },
    CheckDef { name: "reduced_form", operation: "reduction::reduced_form", run: reduced_form },
    CheckDef { name: "sector_form", operation: "reduction::sector_form", run: sector_form },
    CheckDef { name: "kks_jacobi", operation: "reduction::kks_jacobi", run: kks_jacobi },
    CheckDef { name: "superselection_square", operation: "reduction::superselection_square", run: superselection_square },
    CheckDef { name: "central_extension", operation: "reduction::central_extension_check", run: central_extension },
    CheckDef { name: "corner_cme", operation: "corner::master_function_and_cme", run: corner_cme },
    CheckDef { name: "loop_cocycle", operation: "corner::loop_residual", run: loop_cocycle },
    CheckDef { name: "brst", operation: "corner::brst", run: brst },
    CheckDef { name: "ultralocal", operation: "corner::ultralocal_equivalence", run: ultralocal },
    CheckDef { name: "corner_build", operation: "corner::build_corner", run: corner_build },
    CheckDef { name: "leaves", operation: "corner::leaves", run: leaves },
    CheckDef { name: "bf_rank_scan", operation: "corner::BfCorner::rank_scan", run: bf_rank_scan },
    CheckDef { name: "theta_invariance", operation: "models::theta_invariance_check", run: theta_invariance },
    CheckDef { name: "isotropy", operation: "models::isotropy", run: isotropy },
    CheckDef { name: "faddeev_popov", operation: "hodge::faddeev_popov", run: faddeev_popov },
];

pub fn lookup(name: &str) -> Option<&'static CheckDef> {
    REGISTRY.iter().find(|c| c.name == name)
}

fn max_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, f64::max)
}

fn scale_of(m: &dyn Model) -> f64 {
    if m.algebra().is_abelian() {
        1.0
    } else {
        0.5
    }
}

fn random_points(c: &Ctx, m: &dyn Model, count: usize, offset: u64) -> Vec<PhasePoint> {
    let s = scale_of(m);
    par::map_indexed(count, |i| m.random_point(&mut c.rng(offset + i as u64), s))
}

/// On-shell samples; flat backgrounds for non-Abelian models, where orbit
/// tangency and equivariance are exact only at `A = 0`.
fn onshell_points(c: &Ctx, m: &dyn Model, count: usize, offset: u64) -> Vec<PhasePoint> {
    let flat = !m.algebra().is_abelian();
    par::map_indexed(count, |i| red::onshell_sample(m, &mut c.rng(offset + i as u64), 1.0, flat))
}

fn probes(c: &Ctx, n: usize, count: usize, offset: u64) -> Vec<Vec<f64>> {
    (0..count).map(|i| rng::uniform_vec(&mut c.rng(offset + i as u64), n, 1.0)).collect()
}

/// Backgrounds for on-shell annihilators. In 1D su(2) two backgrounds
/// share the fixed axis of one relative rotation, so use more.
const BACKGROUNDS: usize = 4;

fn cycles(cx: &CellComplex) -> usize {
    cx.n_edges() + cx.n_components() - cx.n_vertices()
}

// ---------------------------------------------------------------------------

fn algebra(c: &Ctx) -> Result<Outcome> {
    let mut o = Outcome::default();
    let ch = c.alg.checks();
    o.put("algebra", c.alg.name());
    o.put("dim", c.alg.dim());
    o.put("defects", &ch);
    o.le("max_defect", ch.max(), c.tol.construction);
    Ok(o)
}

fn green_formula(c: &Ctx) -> Result<Outcome> {
    let cx = c.cx;
    let alg = c.alg;
    let d = alg.dim();
    let rows = par::map_indexed(c.samples, |i| {
        let mut r = c.rng(i as u64);
        let a = rng::uniform_vec(&mut r, cx.n_edges() * d, 0.5);
        let e = rng::uniform_vec(&mut r, cx.n_edges() * d, 1.0);
        let xi = rng::uniform_vec(&mut r, cx.n_vertices() * d, 1.0);
        green_residual(cx, alg, &a, &e, &xi)
    });
    let mut o = Outcome::default();
    o.put("samples", c.samples);
    o.le("relative_residual", max_of(rows), c.tol.exact);
    Ok(o)
}

/// `|Σ_e ⟨E, d_Aξ⟩ − (−Σ_int ⟨bulk, ξ⟩ + Σ_∂ s_b ⟨bdry, ξ⟩)|`, relative to
/// the size of the edge sum.
pub fn green_residual(cx: &CellComplex, alg: &LieAlgebra, a: &[f64], e: &[f64], xi: &[f64]) -> f64 {
    let d = alg.dim();
    let mut dxi = vec![0.0; cx.n_edges() * d];
    d_twisted_raw(cx, alg, a, xi, &mut dxi);
    let mut lhs = 0.0;
    let mut scale = 0.0;
    for (x, y) in e.iter().zip(&dxi) {
        lhs += x * y;
        scale += (x * y).abs();
    }
    let g = green_pairing(cx, alg, a, e);
    let mut rhs = 0.0;
    for (i, &v) in cx.interior_vertices().iter().enumerate() {
        for k in 0..d {
            rhs -= g.bulk[i * d + k] * xi[v * d + k];
        }
    }
    for (i, &v) in cx.boundary_vertices().iter().enumerate() {
        for k in 0..d {
            rhs += cx.flux_sign(v) * g.bdry[i * d + k] * xi[v * d + k];
        }
    }
    (lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE)
}

fn decomposition(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let cx = m.complex();
    let d = m.algebra().dim();
    let rows = par::map_indexed(c.samples, |i| {
        let mut r = c.rng(i as u64);
        let phi = m.random_point(&mut r, 1.0);
        let xi = rng::uniform_vec(&mut r, m.gauge_dim(), 1.0);
        let ev = ps::momentum(m, &phi, &xi);
        let mut cut = xi.clone();
        for &b in cx.boundary_vertices() {
            cut[b * d..(b + 1) * d].fill(0.0);
        }
        let ev_cut = ps::momentum(m, &phi, &cut);
        let local = ev_cut.bulk == ev.bulk && ev_cut.flux == 0.0;
        ((ev.total - ev.bulk - ev.flux).abs(), local)
    });
    let mut o = Outcome::default();
    o.put("samples", c.samples);
    o.le("residual", max_of(rows.iter().map(|r| r.0)), c.tol.decomposition);
    o.holds("bulk_ignores_boundary_values", rows.iter().all(|r| r.1));
    Ok(o)
}

fn flow_residual(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let om = m.omega_matrix();
    let rows = par::map_indexed(c.samples, |i| {
        let mut r = c.rng(i as u64);
        let phi = m.random_point(&mut r, 1.0);
        let xi = rng::uniform_vec(&mut r, m.gauge_dim(), 1.0);
        let v = rng::uniform_vec(&mut r, m.phase_dim(), 1.0);
        ps::flow_residual_with(m, &om, &phi, &xi, &v).abs()
    });
    let mut o = Outcome::default();
    o.put("samples", c.samples);
    o.le("residual", max_of(rows), c.tol.flow);
    Ok(o)
}

fn hodge_split(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let cx = m.complex();
    let alg = m.algebra();
    let d = alg.dim();
    let count = c.samples.min(10);
    let rows = par::map_indexed(count, |i| -> Result<(f64, f64, f64, usize)> {
        let mut r = c.rng(i as u64);
        let a = rng::uniform_vec(&mut r, cx.n_edges() * d, 0.5);
        let e = rng::uniform_vec(&mut r, cx.n_edges() * d, 1.0);
        let lap = TwistedLaplacian::new(cx, alg, &a, BoundaryMode::Neumann)?;
        let s = hodge::split_e(&lap, &e)?;
        Ok((s.orthogonality, s.reconstruction, s.radiative_divergence, lap.kernel_dim()))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let flat = TwistedLaplacian::new(cx, alg, &vec![0.0; cx.n_edges() * d], BoundaryMode::Neumann)?;
    let mut o = Outcome::default();
    o.put("samples", count);
    o.le("orthogonality", max_of(rows.iter().map(|r| r.0)), c.tol.hodge);
    o.le("reconstruction", max_of(rows.iter().map(|r| r.1)), c.tol.hodge);
    o.le("radiative_divergence", max_of(rows.iter().map(|r| r.2)), c.tol.hodge);
    o.eq("kernel_dim_flat", flat.kernel_dim(), cx.n_components() * d);
    if alg.is_abelian() {
        let ok = rows.iter().all(|r| r.3 == cx.n_components() * d);
        o.holds("kernel_dim_is_components_times_dim", ok);
    } else {
        o.put("kernel_dims", rows.iter().map(|r| r.3).collect::<Vec<_>>());
    }
    Ok(o)
}

fn gauss_law(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let cx = m.complex();
    let alg = m.algebra();
    let d = alg.dim();
    let count = c.samples.min(20);
    let pts = onshell_points(c, m, count, 0);
    let reference = m.reference();
    let rows = par::map_indexed(count, |i| {
        let iso = models::isotropy(m, &pts[i]);
        let worst = (0..iso.dim())
            .map(|j| {
                let xi: Vec<f64> = iso.basis.column(j).iter().copied().collect();
                ps::adjusted_flux(m, &pts[i], &xi, &reference).abs()
            })
            .fold(0.0, f64::max);
        (worst, iso.dim())
    });
    let mut o = Outcome::default();
    o.put("samples", count);
    o.put("isotropy_dims", rows.iter().map(|r| r.1).collect::<Vec<_>>());
    o.le("isotropy_flux", max_of(rows.iter().map(|r| r.0)), c.tol.property);
    if alg.is_abelian() && cx.has_boundary() {
        let lap = TwistedLaplacian::new(cx, alg, &vec![0.0; cx.n_edges() * d], BoundaryMode::Neumann)?;
        let source = vec![0.0; cx.interior_vertices().len() * d];
        // unit outward flux everywhere: nonzero net flux per component
        let bdry: Vec<f64> = cx
            .boundary_vertices()
            .iter()
            .flat_map(|&v| vec![cx.flux_sign(v); d])
            .collect();
        let rejected = match hodge::neumann_solve(&lap, &source, &bdry) {
            Err(Error::Incompatible { residual, kernel }) => {
                o.put("incompatibility_residual", residual);
                kernel.iter().any(|x| x.abs() > 0.0)
            }
            _ => false,
        };
        o.holds("net_flux_rejected_with_certificate", rejected);
    }
    Ok(o)
}

fn annihilators(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let cx = m.complex();
    let bgs = random_points(c, m, BACKGROUNDS, 0);
    let pr = probes(c, m.gauge_dim(), 4, 100);
    let (_, _, rep) = red::annihilator_report(m, &bgs, &bgs, &pr)?;
    let mut o = Outcome::default();
    o.put("dim_offshell", rep.dim_offshell);
    o.put("dim_onshell", rep.dim_onshell);
    let expected = if m.algebra().is_abelian() && cx.has_boundary() {
        m.algebra().dim() * cx.n_components()
    } else {
        0
    };
    o.eq("gap", rep.gap, expected);
    o.le("offshell_in_onshell", rep.offshell_in_onshell, c.tol.property);
    o.le("ideal_residual_offshell", rep.ideal_residual_offshell, c.tol.property);
    o.le("ideal_residual_onshell", rep.ideal_residual_onshell, c.tol.property);
    o.le("group_cocycle_defect", rep.group_cocycle_defect, c.tol.property);
    o.le("algebra_cocycle_defect", rep.algebra_cocycle_defect, c.tol.property);
    o.holds("offshell_is_boundary_vanishing", rep.offshell_is_boundary_vanishing);
    Ok(o)
}

fn justness(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let bgs = random_points(c, m, BACKGROUNDS, 0);
    let on = red::annihilator_onshell(m, &bgs)?;
    let rep = red::justness_check(m, &on, &bgs, &probes(c, m.gauge_dim(), 3, 100), c.tol.property)?;
    let mut o = Outcome::default();
    o.put("rank_j0", rep.rank_j0);
    o.put("rank_constraint", rep.rank_constraint);
    o.put("rank_joint", rep.rank_joint);
    o.holds("two_sided", rep.two_sided);
    o.le("onshell_max", rep.onshell_max, c.tol.property);
    o.ge("offshell_min_detect", rep.offshell_min_detect, 1e-6);
    o.le("equivariance_defect", rep.equivariance_defect, c.tol.construction);
    Ok(o)
}

fn kernel_identification(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let bgs = random_points(c, m, BACKGROUNDS, 0);
    let on = red::annihilator_onshell(m, &bgs)?;
    let phi = onshell_points(c, m, 1, 50).remove(0);
    let (_, _, rep) = red::characteristic_kernel(m, &phi, &on, c.tol.property)?;
    let mut o = Outcome::default();
    o.put("dim_tangent", rep.dim_tangent);
    o.put("dim_orbit", rep.dim_orbit);
    o.put("dim_subideal_orbit", rep.dim_subideal_orbit);
    o.put("ambient_degeneracy", rep.ambient_degeneracy);
    o.put("angle_mod_degeneracy", rep.angle_mod_degeneracy);
    o.le("max_angle", rep.max_angle, c.tol.angle);
    o.eq("dim_kernel", rep.dim_kernel, rep.dim_ideal - rep.isotropy_in_ideal);
    o.ge("strict_gap", rep.strict_gap as f64, 1.0);
    o.le("orbit_in_tangent", rep.orbit_in_tangent, c.tol.property);
    Ok(o)
}

fn reduced_form(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let cx = m.complex();
    let bgs = random_points(c, m, BACKGROUNDS, 0);
    let on = red::annihilator_onshell(m, &bgs)?;
    let phi = onshell_points(c, m, 1, 50).remove(0);
    let rf = red::reduced_form(m, &phi, &on, c.tol.property)?;
    let pr = probes(c, m.gauge_dim(), 5, 100);
    let flow = max_of(pr.iter().map(|xi| red::residual_flux_and_flow(m, &phi, xi, &rf)));
    let mut o = Outcome::default();
    o.put("spectrum", &rf.spectrum);
    o.le("flux_flow_residual", flow, c.tol.reduced);
    o.le("antisymmetry", rf.antisymmetry, c.tol.construction);
    o.ge("smallest_singular", rf.smallest_singular, c.tol.reduced);
    if matches!(c.spec.name.as_str(), "maxwell" | "theta_ym") && cx.has_boundary() {
        let expected = 2 * cycles(cx) + 2 * (cx.boundary_vertices().len() - cx.n_components());
        o.eq("dim", rf.dim, expected);
    } else {
        o.put("dim", rf.dim);
    }
    if m.algebra().is_abelian() {
        let moved = m.act(&phi, &pr[0])?;
        let rf2 = red::reduced_form(m, &moved, &on, c.tol.property)?;
        let drift = max_of(rf.spectrum.iter().zip(&rf2.spectrum).map(|(a, b)| (a - b).abs()));
        o.le("spectrum_gauge_drift", drift, c.tol.reduced);
    }
    Ok(o)
}

fn sector_form(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    if !m.complex().has_boundary() {
        return Err(Error::NoBoundary);
    }
    let ctx = SectorContext::new(m);
    let phi = onshell_points(c, m, 1, 0).remove(0);
    let mu = red::boundary_momentum(m, &phi);
    let sf = red::sector_form(m, &ctx, &mu, &phi, c.tol.property)?;
    let mut o = Outcome::default();
    o.put("dim_tangent", sf.dim_tangent);
    o.put("rank", sf.rank);
    o.le("basicness", sf.basicness, c.tol.reduced);
    o.le("antisymmetry", sf.antisymmetry, c.tol.construction);
    let mut other = mu.clone();
    other[0] += 1.0;
    let rejected = matches!(red::sector_form(m, &ctx, &other, &phi, c.tol.property), Err(Error::NotOnOrbit(_)));
    o.holds("off_orbit_rejected", rejected);
    Ok(o)
}

/// Corner space of the configured model; a single cell for `bf_corner`.
fn corner_of(c: &Ctx) -> Result<CornerSpace> {
    match c.model {
        Some(m) => {
            let samples = random_points(c, m, 2, 900);
            Ok(corner::build_corner(m, &samples)?.0)
        }
        None => CornerSpace::new(c.alg.clone(), 1, Cocycle2::zero(c.alg.dim())),
    }
}

fn k_exact(corner: &CornerSpace) -> bool {
    corner.k.is_zero() || corner.algebra.is_abelian()
}

fn kks_jacobi(c: &Ctx) -> Result<Outcome> {
    let corner = corner_of(c)?;
    let n = corner.dim();
    let count = c.samples.min(20);
    let rows = par::map_indexed(count, |i| {
        let mut r = c.rng(i as u64);
        let f: Vec<Vec<f64>> = (0..3).map(|_| rng::uniform_vec(&mut r, n, 1.0)).collect();
        red::kks_jacobi(&corner.algebra, [&f[0], &f[1], &f[2]], Some(&corner.k))
    });
    let worst = max_of(rows.into_iter().collect::<Result<Vec<_>>>()?);
    let mut o = Outcome::default();
    o.put("samples", count);
    o.put("cocycle_is_zero", corner.k.is_zero());
    if k_exact(&corner) {
        o.le("jacobi", worst, c.tol.jacobi);
    } else {
        o.put("jacobi", worst);
    }
    Ok(o)
}

pub const SQUARE_SAMPLES: usize = 50;

fn superselection_square(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    if !m.complex().has_boundary() {
        return Err(Error::NoBoundary);
    }
    let ctx = SectorContext::new(m);
    let abelian = m.algebra().is_abelian();
    let pts = onshell_points(c, m, SQUARE_SAMPLES, 0);
    let gauges: Vec<Vec<f64>> = (0..SQUARE_SAMPLES)
        .map(|i| {
            let mut r = c.rng(1000 + i as u64);
            if abelian {
                rng::uniform_vec(&mut r, m.gauge_dim(), 1.0)
            } else {
                red::boundary_constant_gauge(m, &mut r, 0.5)
            }
        })
        .collect();
    // the square is evaluated per sample in parallel, then folded in order
    let reps = par::map_indexed(SQUARE_SAMPLES, |i| {
        red::superselection_square(m, &ctx, &pts[i..i + 1], &gauges[i..i + 1], c.tol.property)
    });
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
    let bound = if abelian { c.tol.square_abelian } else { c.tol.square_flow };
    let mut o = Outcome::default();
    o.put("samples", SQUARE_SAMPLES);
    o.le("label_mismatch", max_of(reps.iter().map(|r| r.label_mismatch)), bound);
    o.le("flux_mismatch", max_of(reps.iter().map(|r| r.flux_mismatch)), bound);
    Ok(o)
}

fn central_extension(c: &Ctx) -> Result<Outcome> {
    let (alg, k) = match c.model {
        Some(m) if m.algebra().is_abelian() && m.complex().has_boundary() => {
            let corner = corner_of(c)?;
            (LieAlgebra::abelian(corner.dim()), corner.k.clone())
        }
        _ => {
            // coboundary ⟨f₀, [x, y]⟩ on the model algebra
            let a = c.alg.clone();
            let f0 = rng::uniform_vec(&mut c.rng(77), a.dim(), 1.0);
            let n = a.dim();
            let kd = DMatrix::from_fn(n, n, |i, j| (0..n).map(|l| f0[l] * a.structure(l, i, j)).sum());
            let k = Cocycle2::from_dense(&kd)?;
            (a, k)
        }
    };
    let count = c.samples.min(50);
    let rep = red::central_extension_check(&alg, &k, count, c.seed)?;
    let mut o = Outcome::default();
    o.put("samples", count);
    o.put("extension_dim", alg.dim() + 1);
    o.le("orbit_defect", rep.orbit_defect, c.tol.extension);
    o.le("center_defect", rep.center_defect, c.tol.extension);
    o.le("extension_jacobi", rep.extension_jacobi, c.tol.construction);
    Ok(o)
}

fn corner_cme(c: &Ctx) -> Result<Outcome> {
    let corner = corner_of(c)?;
    let (_, _, rep) = corner::master_function_and_cme(&corner)?;
    let mut o = Outcome::default();
    o.put("master_terms", rep.master_terms);
    o.put("residual_terms", rep.residual_terms);
    if k_exact(&corner) {
        o.le("cme_residual", rep.residual_max, c.tol.jacobi);
    } else {
        o.put("cme_residual", rep.residual_max);
    }
    o.le("jacobi_match", rep.jacobi_match, c.tol.jacobi);
    Ok(o)
}

/// Loop sizes for the loop-cocycle order fit.
pub const LOOP_SEQUENCE: [usize; 3] = [8, 16, 32];

fn loop_cocycle(c: &Ctx) -> Result<Outcome> {
    let alg = LieAlgebra::su2();
    let res = LOOP_SEQUENCE
        .iter()
        .map(|&n| corner::loop_residual(&alg, n))
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = res.iter().map(|r| r.h).collect();
    let cme: Vec<f64> = res.iter().map(|r| r.cme).collect();
    let jac: Vec<f64> = res.iter().map(|r| r.jacobi).collect();
    let (target, window) = (c.tol.slope_target, c.tol.slope_window);
    let mut o = Outcome::default();
    o.put("n", LOOP_SEQUENCE);
    o.put("cme", &cme);
    o.put("jacobi", &jac);
    o.le("cme_order_error", (linalg::loglog_slope(&h, &cme) - target).abs(), window);
    o.le("jacobi_order_error", (linalg::loglog_slope(&h, &jac) - target).abs(), window);
    o.put("cme_order", linalg::loglog_slope(&h, &cme));
    o.put("jacobi_order", linalg::loglog_slope(&h, &jac));
    Ok(o)
}

fn brst(c: &Ctx) -> Result<Outcome> {
    let corner = corner_of(c)?;
    if !k_exact(&corner) {
        return Err(unsupported(c.spec, "BRST nilpotency with a non-exact cocycle"));
    }
    let rep = corner::brst(&corner)?;
    let mut o = Outcome::default();
    o.put("generators", 2 * corner.dim());
    o.le("nilpotency", rep.nilpotency, c.tol.brst);
    o.le("hamiltonian", rep.hamiltonian, c.tol.brst);
    Ok(o)
}

fn ultralocal(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    if !c.is_yang_mills() {
        return Err(unsupported(c.spec, "the ultralocal comparison"));
    }
    let count = c.samples.min(5);
    let pts = random_points(c, m, count, 0);
    let reps = par::map_indexed(count, |i| corner::ultralocal_equivalence(m, &pts[i]));
    let mut o = Outcome::default();
    o.put("samples", count);
    o.put("flux_based_norm_min", reps.iter().map(|r| r.flux_based_norm).fold(f64::INFINITY, f64::min));
    o.le("difference", max_of(reps.iter().map(|r| r.difference)), c.tol.ultralocal);
    o.le("interior_leak", max_of(reps.iter().map(|r| r.interior_leak)), c.tol.ultralocal);
    Ok(o)
}

fn corner_build(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let samples = random_points(c, m, 2, 0);
    let (corner, rep) = corner::build_corner(m, &samples)?;
    let nb = m.complex().boundary_vertices().len();
    let d = m.algebra().dim();
    let pts = onshell_points(c, m, 2, 10);
    let mut o = Outcome::default();
    o.put("boundary_cells", rep.boundary_cells);
    o.put("k_is_zero", rep.k_is_zero);
    o.holds("factorizes", rep.factorizes);
    o.eq("dim_p", rep.dim_p, nb * d);
    o.eq("dim_g", rep.dim_g, nb * d);
    o.le("pullback_defect", rep.pullback_defect, c.tol.property);
    o.le("k_antisymmetry", rep.k_antisymmetry, c.tol.construction);
    o.le("equivariance", corner::h_equivariance(m, &corner, &pts, 3, c.seed), c.tol.property);
    Ok(o)
}

fn leaves(c: &Ctx) -> Result<Outcome> {
    let corner = corner_of(c)?;
    let fbar = match c.model {
        Some(m) => red::boundary_momentum(m, &onshell_points(c, m, 1, 0)[0]),
        None => rng::uniform_vec(&mut c.rng(0), corner.dim(), 1.0),
    };
    let rep = corner::leaves(&corner, &fbar, 10, &mut c.rng(1));
    let mut o = Outcome::default();
    o.put("ambient", rep.ambient);
    o.put("casimirs", &rep.casimirs);
    let d = corner.algebra.dim();
    if corner.algebra.is_abelian() {
        o.eq("rank", rep.rank, linalg::rank(&corner.k.to_dense()));
    } else if corner.k.is_zero() {
        // one orbit per cell; rank from the algebra at each cell's value
        let expected = (0..corner.cells)
            .map(|v| {
                let cell = CornerSpace::new(corner.algebra.clone(), 1, Cocycle2::zero(d)).expect("zero cocycle");
                linalg::rank(&cell.structure_tensor(&fbar[v * d..(v + 1) * d]))
            })
            .sum();
        o.eq("rank", rep.rank, expected);
    } else {
        o.put("rank", rep.rank);
    }
    if let Some(s) = rep.orbit_casimir_spread {
        o.le("orbit_casimir_spread", s, c.tol.construction);
    }
    Ok(o)
}

fn bf_rank_scan(c: &Ctx) -> Result<Outcome> {
    if c.spec.name != "bf_corner" {
        return Err(unsupported(c.spec, "the BF corner bivector"));
    }
    let base = if c.spec.algebra.as_deref() == Some("bf_u1") {
        LieAlgebra::u1()
    } else {
        LieAlgebra::su2()
    };
    let bf = BfCorner::new(c.cx.clone(), base)?;
    let (nb, na) = bf.dims();
    let mut r = c.rng(0);
    let b = rng::uniform_vec(&mut r, nb, 1.0);
    let a = rng::uniform_vec(&mut r, na, 1.0);
    let p = bf.bivector(&b, &a);
    let scan = bf.rank_scan(&b, &a, &[0.0, 0.25, 1.0]);
    let mut o = Outcome::default();
    o.put("dims", [nb, na]);
    o.put("scan", &scan);
    o.le("local_mismatch", (&p - bf.bivector_local(&b, &a)).amax(), c.tol.construction);
    o.le("antisymmetry", (&p + p.transpose()).amax(), c.tol.construction);
    if !bf.algebra().is_abelian() {
        o.holds("rank_jumps_at_flat", scan[0].rank < scan[1].rank);
    }
    o.holds("rank_constant_off_flat", scan[1].rank == scan[2].rank);
    Ok(o)
}

fn theta_invariance(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    if !c.is_yang_mills() {
        return Err(unsupported(c.spec, "a θ term"));
    }
    let theta = if c.spec.theta != 0.0 { c.spec.theta } else { 0.7 };
    let count = c.samples.min(10);
    let pts = random_points(c, m, count, 0);
    let reps = par::map_indexed(count, |i| models::theta_invariance_check(m.complex(), m.algebra(), theta, &pts[i]));
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
    let mut o = Outcome::default();
    o.put("theta", theta);
    o.put("samples", count);
    if m.algebra().is_abelian() {
        o.le("constraint_difference", max_of(reps.iter().map(|r| r.constraint_difference)), c.tol.exact);
        o.le("oracle_mismatch", max_of(reps.iter().map(|r| r.oracle_mismatch)), c.tol.property);
        o.put("label_shift_max", max_of(reps.iter().map(|r| r.label_shift.abs())));
    } else {
        o.put("bianchi_defect", max_of(reps.iter().map(|r| r.bianchi_defect)));
        o.put("constraint_difference", max_of(reps.iter().map(|r| r.constraint_difference)));
    }
    Ok(o)
}

fn isotropy(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let cx = m.complex();
    let d = m.algebra().dim();
    let abelian = m.algebra().is_abelian();
    let count = c.samples.min(5);
    // irreducible backgrounds for su(2): random A on-shell
    let pts: Vec<PhasePoint> = (0..count)
        .map(|i| red::onshell_sample(m, &mut c.rng(i as u64), 1.0, false))
        .collect();
    let dims: Vec<usize> = pts.iter().map(|p| models::isotropy(m, p).dim()).collect();
    let mut agree = true;
    for (i, p) in pts.iter().enumerate() {
        let iso = models::isotropy(m, p);
        let mut xis = vec![rng::uniform_vec(&mut c.rng(500 + i as u64), m.gauge_dim(), 1.0)];
        if iso.dim() > 0 {
            xis.push(iso.basis.column(0).iter().copied().collect());
        }
        let off = m.random_point(&mut c.rng(600 + i as u64), 1.0);
        for xi in &xis {
            agree &= models::el_locus_check(m, p, xi, c.tol.property).agree;
            agree &= models::el_locus_check(m, &off, xi, c.tol.property).agree;
        }
    }
    let mut o = Outcome::default();
    o.put("samples", count);
    // 1D su(2): covariantly constant ξ always exist, so the isotropy is the
    // stabilizer line of the (covariantly constant) E; 2D: generically {0}
    let expected = if abelian {
        d * cx.n_components()
    } else if cx.dim() == 1 {
        cx.n_components()
    } else {
        0
    };
    o.holds("isotropy_dim_as_expected", dims.iter().all(|&k| k == expected));
    o.put("isotropy_dims", &dims);
    o.put("expected_dim", expected);
    o.holds("el_locus_agrees", agree);
    Ok(o)
}

fn faddeev_popov(c: &Ctx) -> Result<Outcome> {
    let m = c.model()?;
    let cx = m.complex();
    let alg = m.algebra();
    let n = cx.n_edges() * alg.dim();
    let a0 = vec![0.0; n];
    let a = rng::uniform_vec(&mut c.rng(0), n, 0.3);
    let at_flat = hodge::faddeev_popov(cx, alg, &a0, &a0);
    let off = hodge::faddeev_popov(cx, alg, &a0, &a);
    let scan = hodge::faddeev_popov_scan(cx, alg, &a0, &a, 8);
    let mut o = Outcome::default();
    o.put("flat", &at_flat);
    o.put("perturbed", &off);
    o.put("scan", &scan);
    o.holds("invertible_dirichlet_at_flat", cx.interior_vertices().is_empty() || at_flat.invertible_dirichlet);
    o.ge(
        "dirichlet_singular_at_flat",
        at_flat.smallest_singular_dirichlet,
        if cx.interior_vertices().is_empty() { 0.0 } else { c.tol.rank },
    );
    Ok(o)
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// Full report of one check.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub check: String,
    pub operation: String,
    pub model: ModelSpec,
    pub seed: u64,
    pub check_seed: u64,
    pub tolerances_version: u32,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub metrics: BTreeMap<String, Value>,
    pub assertions: Vec<Assertion>,
}

/// Runs one registered check. The per-check seed is derived from the master
/// seed and the check name.
pub fn run_check(
    def: &CheckDef,
    spec: &ModelSpec,
    model: Option<&dyn Model>,
    cx: &CellComplex,
    alg: &LieAlgebra,
    seed: u64,
    samples: usize,
    tol: &Tolerances,
) -> Report {
    let check_seed = rng::derive(seed, def.name);
    let ctx = Ctx {
        spec,
        model,
        cx,
        alg,
        seed: check_seed,
        samples,
        tol,
    };
    let (status, reason, outcome) = match (def.run)(&ctx) {
        Ok(o) => (if o.passed() { Status::Pass } else { Status::Fail }, None, o),
        Err(e @ (Error::Unsupported { .. } | Error::NoBoundary)) => (Status::Skipped, Some(e.to_string()), Outcome::default()),
        Err(e) => (Status::Error, Some(e.to_string()), Outcome::default()),
    };
    Report {
        check: def.name.into(),
        operation: def.operation.into(),
        model: spec.clone(),
        seed,
        check_seed,
        tolerances_version: tol.version,
        status,
        reason,
        metrics: outcome.metrics,
        assertions: outcome.assertions,
    }
}

/// Flattens a JSON value into `key,value` rows (nested keys joined by `.`).
pub fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::String(s) => out.push((prefix.into(), s.clone())),
        Value::Null => out.push((prefix.into(), String::new())),
        other => out.push((prefix.into(), other.to_string())),
    }
}
