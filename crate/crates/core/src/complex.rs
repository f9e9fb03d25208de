//! Oriented 1D and 2D cell complexes with boundary, cochains, twisted
//! differentials and the exact discrete Green formula.
//!
//! Conventions: edges run tail → head and `D0` rows are (head +1, tail −1);
//! triangles are counter-clockwise. Flux lives on boundary vertices. In 1D a
//! boundary vertex carries sign +1 when it is the head of its edge and −1 when
//! it is the tail; in 2D boundary vertices carry +1 (their dual cells are the
//! outward boundary pieces).

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liealg::{dot, LieAlgebra};

pub use crate::liealg::Cocycle2;

/// Where the coefficients of a cochain live.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueSpace {
    Scalar,
    Algebra,
    Dual,
}

/// A degree-`k` cochain with coefficient vectors of length `vdim` per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cochain {
    pub degree: usize,
    pub space: ValueSpace,
    pub vdim: usize,
    pub data: Vec<f64>,
}

impl Cochain {
    pub fn zeros(cx: &CellComplex, degree: usize, space: ValueSpace, vdim: usize) -> Self {
        Cochain {
            degree,
            space,
            vdim,
            data: vec![0.0; cx.count(degree) * vdim],
        }
    }

    pub fn new(
        cx: &CellComplex,
        degree: usize,
        space: ValueSpace,
        vdim: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if degree > cx.dim() {
            return Err(Error::InvalidMesh(format!(
                "degree {degree} exceeds complex dimension {}",
                cx.dim()
            )));
        }
        let want = cx.count(degree) * vdim;
        if data.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                got: data.len(),
            });
        }
        Ok(Cochain {
            degree,
            space,
            vdim,
            data,
        })
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.data[i * self.vdim..(i + 1) * self.vdim]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Face {
    pub vertices: [usize; 3],
    /// `(edge, ±1)` in boundary order.
    pub edges: [(usize, i8); 3],
}

#[derive(Clone, Debug)]
pub struct CellComplex {
    dim: usize,
    positions: Vec<[f64; 2]>,
    edges: Vec<(usize, usize)>,
    faces: Vec<Face>,
    /// Edge indices incident to each vertex, with +1 if the vertex is the head.
    star: Vec<Vec<(usize, i8)>>,
    boundary_vertices: Vec<usize>,
    boundary_index: Vec<Option<usize>>,
    flux_sign: Vec<f64>,
    interior_vertices: Vec<usize>,
    interior_index: Vec<Option<usize>>,
    boundary_edges: Vec<(usize, f64)>,
    is_boundary_edge: Vec<bool>,
    edge_length: Vec<f64>,
    edge_dual: Vec<f64>,
    vertex_dual: Vec<f64>,
    face_area: Vec<f64>,
    components: Vec<usize>,
    boundary_components: Vec<usize>,
    name: String,
}

#[derive(Serialize, Deserialize)]
pub struct MeshDoc {
    pub name: String,
    pub dim: usize,
    pub positions: Vec<[f64; 2]>,
    pub edges: Vec<(usize, usize)>,
    pub faces: Vec<[usize; 3]>,
}

fn union_find_labels(n: usize, links: impl Iterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, b) in links {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut label = HashMap::new();
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            let next = label.len();
            *label.entry(r).or_insert(next)
        })
        .collect()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl CellComplex {
    /// Assembles a complex from positions, oriented edges and triangles.
    /// Triangles are reoriented counter-clockwise.
    pub fn from_parts(
        name: &str,
        dim: usize,
        positions: Vec<[f64; 2]>,
        edges: Vec<(usize, usize)>,
        tris: Vec<[usize; 3]>,
    ) -> Result<Self> {
        let nv = positions.len();
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidMesh(format!("dimension {dim}")));
        }
        if dim == 1 && !tris.is_empty() {
            return Err(Error::InvalidMesh("1D complex with faces".into()));
        }
        let mut edge_of = HashMap::new();
        for (i, &(t, h)) in edges.iter().enumerate() {
            if t >= nv || h >= nv || t == h {
                return Err(Error::InvalidMesh(format!("bad edge {i}")));
            }
            if edge_of.insert((t.min(h), t.max(h)), i).is_some() {
                return Err(Error::InvalidMesh(format!("duplicate edge {i}")));
            }
        }
        let mut faces = Vec::with_capacity(tris.len());
        let mut face_area = Vec::with_capacity(tris.len());
        for (fi, t) in tris.iter().enumerate() {
            let mut v = *t;
            let a = signed_area(positions[v[0]], positions[v[1]], positions[v[2]]);
            if a < 0.0 {
                v.swap(1, 2);
            }
            let mut es = [(0usize, 0i8); 3];
            for k in 0..3 {
                let (p, q) = (v[k], v[(k + 1) % 3]);
                let e = *edge_of
                    .get(&(p.min(q), p.max(q)))
                    .ok_or_else(|| Error::InvalidMesh(format!("face {fi} uses a missing edge")))?;
                es[k] = (e, if edges[e] == (p, q) { 1 } else { -1 });
            }
            faces.push(Face {
                vertices: v,
                edges: es,
            });
            face_area.push(a.abs());
        }
        let mut star = vec![vec![]; nv];
        for (i, &(t, h)) in edges.iter().enumerate() {
            star[h].push((i, 1i8));
            star[t].push((i, -1i8));
        }
        let mut face_count = vec![0usize; edges.len()];
        let mut face_sign = vec![0.0; edges.len()];
        for f in &faces {
            for &(e, s) in &f.edges {
                face_count[e] += 1;
                face_sign[e] = s as f64;
            }
        }
        let mut boundary_edges = vec![];
        let mut is_boundary_edge = vec![false; edges.len()];
        let mut is_bv = vec![false; nv];
        let mut flux_sign = vec![0.0; nv];
        if dim == 1 {
            for v in 0..nv {
                if star[v].len() == 1 {
                    is_bv[v] = true;
                    flux_sign[v] = star[v][0].1 as f64;
                }
            }
        } else {
            for e in 0..edges.len() {
                if face_count[e] == 0 {
                    return Err(Error::InvalidMesh(format!("edge {e} bounds no face")));
                }
                if face_count[e] > 2 {
                    return Err(Error::InvalidMesh(format!("edge {e} is non-manifold")));
                }
                if face_count[e] == 1 {
                    boundary_edges.push((e, face_sign[e]));
                    is_boundary_edge[e] = true;
                    is_bv[edges[e].0] = true;
                    is_bv[edges[e].1] = true;
                }
            }
            for v in 0..nv {
                if is_bv[v] {
                    flux_sign[v] = 1.0;
                }
            }
        }
        let boundary_vertices: Vec<usize> = (0..nv).filter(|&v| is_bv[v]).collect();
        let interior_vertices: Vec<usize> = (0..nv).filter(|&v| !is_bv[v]).collect();
        let mut boundary_index = vec![None; nv];
        for (i, &v) in boundary_vertices.iter().enumerate() {
            boundary_index[v] = Some(i);
        }
        let mut interior_index = vec![None; nv];
        for (i, &v) in interior_vertices.iter().enumerate() {
            interior_index[v] = Some(i);
        }
        let edge_length: Vec<f64> = edges
            .iter()
            .map(|&(t, h)| dist(positions[t], positions[h]))
            .collect();
        let (edge_dual, vertex_dual) = if dim == 1 {
            let ed = vec![1.0; edges.len()];
            let mut vd = vec![0.0; nv];
            for (i, &(t, h)) in edges.iter().enumerate() {
                vd[t] += 0.5 * edge_length[i];
                vd[h] += 0.5 * edge_length[i];
            }
            (ed, vd)
        } else {
            let mut ed = vec![0.0; edges.len()];
            let mut vd = vec![0.0; nv];
            for (fi, f) in faces.iter().enumerate() {
                let p = f.vertices.map(|v| positions[v]);
                let bc = [
                    (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                    (p[0][1] + p[1][1] + p[2][1]) / 3.0,
                ];
                for &(e, _) in &f.edges {
                    let (t, h) = edges[e];
                    let mid = [
                        0.5 * (positions[t][0] + positions[h][0]),
                        0.5 * (positions[t][1] + positions[h][1]),
                    ];
                    ed[e] += dist(mid, bc);
                }
                for &v in &f.vertices {
                    vd[v] += face_area[fi] / 3.0;
                }
            }
            (ed, vd)
        };
        let components = union_find_labels(nv, edges.iter().copied());
        let boundary_components = if dim == 1 {
            (0..boundary_vertices.len()).collect()
        } else {
            let links: Vec<(usize, usize)> = boundary_edges
                .iter()
                .map(|&(e, _)| {
                    let (t, h) = edges[e];
                    (boundary_index[t].unwrap(), boundary_index[h].unwrap())
                })
                .collect();
            union_find_labels(boundary_vertices.len(), links.into_iter())
        };
        let cx = CellComplex {
            dim,
            positions,
            edges,
            faces,
            star,
            boundary_vertices,
            boundary_index,
            flux_sign,
            interior_vertices,
            interior_index,
            boundary_edges,
            is_boundary_edge,
            edge_length,
            edge_dual,
            vertex_dual,
            face_area,
            components,
            boundary_components,
            name: name.to_string(),
        };
        cx.validate()?;
        Ok(cx)
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 2 && !self.dd_vanishes() {
            return Err(Error::InvalidMesh("D1·D0 ≠ 0".into()));
        }
        let positive = |v: &[f64]| v.iter().all(|&x| x > 0.0);
        if !positive(&self.edge_length)
            || !positive(&self.edge_dual)
            || !positive(&self.vertex_dual)
            || !positive(&self.face_area)
        {
            return Err(Error::InvalidMesh("non-positive volume".into()));
        }
        if self.dim == 1 && self.boundary_vertices.iter().any(|&v| self.star[v].len() != 1) {
            return Err(Error::InvalidMesh("boundary vertex of degree ≠ 1".into()));
        }
        if self.star.iter().any(|s| s.is_empty()) {
            return Err(Error::InvalidMesh("isolated vertex".into()));
        }
        Ok(())
    }

    /// Integer check that `D1·D0 = 0`.
    pub fn dd_vanishes(&self) -> bool {
        self.faces.iter().all(|f| {
            let mut acc = vec![0i64; self.positions.len()];
            for &(e, s) in &f.edges {
                let (t, h) = self.edges[e];
                acc[h] += s as i64;
                acc[t] -= s as i64;
            }
            acc.iter().all(|&x| x == 0)
        })
    }

    /// `N` unit-length-total interval on `[0, 1]` with `N` edges.
    pub fn interval(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidMesh(format!("interval needs N ≥ 2, got {n}")));
        }
        let pos = (0..=n).map(|i| [i as f64 / n as f64, 0.0]).collect();
        let edges = (0..n).map(|i| (i, i + 1)).collect();
        Self::from_parts(&format!("interval({n})"), 1, pos, edges, vec![])
    }

    /// Unit circle with `N` vertices and `N` edges, no boundary.
    pub fn circle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidMesh(format!("circle needs N ≥ 3, got {n}")));
        }
        let pos = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let edges = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_parts(&format!("circle({n})"), 1, pos, edges, vec![])
    }

    /// Unit disk: centre plus `r` rings, ring `j` with `6j` vertices.
    pub fn disk(r: usize) -> Result<Self> {
        if r < 1 {
            return Err(Error::InvalidMesh("disk needs r ≥ 1".into()));
        }
        let radii: Vec<(f64, usize)> = (1..=r).map(|j| (j as f64 / r as f64, 6 * j)).collect();
        Self::rings(&format!("disk({r})"), true, &radii)
    }

    /// Annulus between radii 1/2 and 1 with `r + 2` rings.
    pub fn annulus(r: usize) -> Result<Self> {
        if r < 1 {
            return Err(Error::InvalidMesh("annulus needs r ≥ 1".into()));
        }
        let m = r + 1;
        let radii: Vec<(f64, usize)> = (0..=m)
            .map(|k| (0.5 + 0.5 * k as f64 / m as f64, 6 * (m + k)))
            .collect();
        Self::rings(&format!("annulus({r})"), false, &radii)
    }

    fn rings(name: &str, centre: bool, radii: &[(f64, usize)]) -> Result<Self> {
        use std::f64::consts::PI;
        let mut pos = vec![];
        let mut ring_start = vec![];
        if centre {
            pos.push([0.0, 0.0]);
        }
        for &(rad, n) in radii {
            ring_start.push(pos.len());
            for i in 0..n {
                let t = 2.0 * PI * i as f64 / n as f64;
                pos.push([rad * t.cos(), rad * t.sin()]);
            }
        }
        let mut tris: Vec<[usize; 3]> = vec![];
        let mut edge_set: Vec<(usize, usize)> = vec![];
        let mut seen = HashMap::new();
        let mut add_edge = |a: usize, b: usize, es: &mut Vec<(usize, usize)>| {
            let key = (a.min(b), a.max(b));
            if let std::collections::hash_map::Entry::Vacant(v) = seen.entry(key) {
                v.insert(es.len());
                es.push(key);
            }
        };
        for (k, &(_, n)) in radii.iter().enumerate() {
            let s = ring_start[k];
            for i in 0..n {
                add_edge(s + i, s + (i + 1) % n, &mut edge_set);
            }
        }
        if centre {
            let (s, n) = (ring_start[0], radii[0].1);
            for i in 0..n {
                add_edge(0, s + i, &mut edge_set);
                tris.push([0, s + i, s + (i + 1) % n]);
            }
        }
        for k in 1..radii.len() {
            let (s1, n1) = (ring_start[k - 1], radii[k - 1].1);
            let (s2, n2) = (ring_start[k], radii[k].1);
            // merge walk by angle
            let (mut i, mut j) = (0usize, 0usize);
            add_edge(s1, s2, &mut edge_set);
            while i < n1 || j < n2 {
                let ai = (i + 1) as f64 / n1 as f64;
                let aj = (j + 1) as f64 / n2 as f64;
                let (a, b) = (s1 + i % n1, s2 + j % n2);
                if j < n2 && (i >= n1 || aj <= ai) {
                    let c = s2 + (j + 1) % n2;
                    tris.push([a, b, c]);
                    add_edge(a, c, &mut edge_set);
                    j += 1;
                } else {
                    let c = s1 + (i + 1) % n1;
                    tris.push([a, b, c]);
                    add_edge(b, c, &mut edge_set);
                    i += 1;
                }
            }
        }
        Self::from_parts(name, 2, pos, edge_set, tris)
    }

    /// Builder by name: `interval`, `circle`, `disk`, `annulus`.
    pub fn build(kind: &str, n: usize) -> Result<Self> {
        match kind {
            "interval" => Self::interval(n),
            "circle" => Self::circle(n),
            "disk" => Self::disk(n),
            "annulus" => Self::annulus(n),
            _ => Err(Error::InvalidMesh(format!("unknown builder `{kind}`"))),
        }
    }

    pub fn to_doc(&self) -> MeshDoc {
        MeshDoc {
            name: self.name.clone(),
            dim: self.dim,
            positions: self.positions.clone(),
            edges: self.edges.clone(),
            faces: self.faces.iter().map(|f| f.vertices).collect(),
        }
    }

    pub fn from_doc(doc: &MeshDoc) -> Result<Self> {
        Self::from_parts(
            &doc.name,
            doc.dim,
            doc.positions.clone(),
            doc.edges.clone(),
            doc.faces.clone(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }
    pub fn count(&self, degree: usize) -> usize {
        match degree {
            0 => self.n_vertices(),
            1 => self.n_edges(),
            2 => self.n_faces(),
            _ => 0,
        }
    }
    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
    pub fn faces(&self) -> &[Face] {
        &self.faces
    }
    pub fn star(&self, v: usize) -> &[(usize, i8)] {
        &self.star[v]
    }
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }
    pub fn interior_vertices(&self) -> &[usize] {
        &self.interior_vertices
    }
    pub fn boundary_index(&self, v: usize) -> Option<usize> {
        self.boundary_index[v]
    }
    pub fn interior_index(&self, v: usize) -> Option<usize> {
        self.interior_index[v]
    }
    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_index[v].is_some()
    }
    /// Sign `s_b` of boundary vertex `v` (0 for interior vertices).
    pub fn flux_sign(&self, v: usize) -> f64 {
        self.flux_sign[v]
    }
    /// Boundary edges with their induced orientation relative to the face.
    pub fn boundary_edges(&self) -> &[(usize, f64)] {
        &self.boundary_edges
    }
    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.is_boundary_edge[e]
    }
    pub fn has_boundary(&self) -> bool {
        !self.boundary_vertices.is_empty()
    }
    pub fn edge_length(&self) -> &[f64] {
        &self.edge_length
    }
    pub fn face_area(&self) -> &[f64] {
        &self.face_area
    }
    pub fn vertex_dual(&self) -> &[f64] {
        &self.vertex_dual
    }
    pub fn components(&self) -> &[usize] {
        &self.components
    }
    pub fn n_components(&self) -> usize {
        self.components.iter().max().map_or(0, |m| m + 1)
    }
    pub fn boundary_components(&self) -> &[usize] {
        &self.boundary_components
    }
    pub fn n_boundary_components(&self) -> usize {
        self.boundary_components.iter().max().map_or(0, |m| m + 1)
    }
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_faces() as i64
    }
    /// First Betti number from the Euler characteristic and `b₀` (`b₂ = 0`
    /// for complexes with boundary; 1 for closed surfaces is not built here).
    pub fn betti1(&self) -> usize {
        (self.n_components() as i64 - self.euler_characteristic()) as usize
    }
    /// Typical edge length.
    pub fn mesh_size(&self) -> f64 {
        self.edge_length.iter().cloned().fold(0.0, f64::max)
    }

    /// Diagonal mass of a degree-`k` cochain: `|⋆v|`, `|⋆e|/|e|`, `1/|f|`.
    pub fn mass(&self, degree: usize) -> Vec<f64> {
        match degree {
            0 => self.vertex_dual.clone(),
            1 => self
                .edge_dual
                .iter()
                .zip(&self.edge_length)
                .map(|(d, l)| d / l)
                .collect(),
            2 => self.face_area.iter().map(|a| 1.0 / a).collect(),
            _ => vec![],
        }
    }

    /// Scalar incidence `D0` (#edges × #vertices).
    pub fn d0_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_edges(), self.n_vertices());
        for (i, &(t, h)) in self.edges.iter().enumerate() {
            m[(i, h)] += 1.0;
            m[(i, t)] -= 1.0;
        }
        m
    }

    /// Scalar incidence `D1` (#faces × #edges).
    pub fn d1_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_faces(), self.n_edges());
        for (f, face) in self.faces.iter().enumerate() {
            for &(e, s) in &face.edges {
                m[(f, e)] += s as f64;
            }
        }
        m
    }

    /// Exterior derivative, applied blockwise to the coefficient vectors.
    pub fn d(&self, a: &Cochain) -> Result<Cochain> {
        if a.degree >= self.dim {
            return Err(Error::TopDegree);
        }
        let v = a.vdim;
        let mut out = Cochain::zeros(self, a.degree + 1, a.space, v);
        match a.degree {
            0 => {
                for (i, &(t, h)) in self.edges.iter().enumerate() {
                    for k in 0..v {
                        out.data[i * v + k] = a.data[h * v + k] - a.data[t * v + k];
                    }
                }
            }
            _ => {
                for (f, face) in self.faces.iter().enumerate() {
                    for &(e, s) in &face.edges {
                        for k in 0..v {
                            out.data[f * v + k] += s as f64 * a.data[e * v + k];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Boundary complex: the boundary loop(s) as a closed 1D complex (2D
    /// input), with the vertex map into this complex.
    pub fn boundary_complex(&self) -> Result<(CellComplex, Vec<usize>)> {
        if self.dim != 2 || !self.has_boundary() {
            return Err(Error::NoBoundary);
        }
        let pos = self
            .boundary_vertices
            .iter()
            .map(|&v| self.positions[v])
            .collect();
        let edges = self
            .boundary_edges
            .iter()
            .map(|&(e, s)| {
                let (t, h) = self.edges[e];
                let (t, h) = (
                    self.boundary_index[t].unwrap(),
                    self.boundary_index[h].unwrap(),
                );
                if s > 0.0 {
                    (t, h)
                } else {
                    (h, t)
                }
            })
            .collect();
        let b = CellComplex::from_parts(&format!("∂{}", self.name), 1, pos, edges, vec![])?;
        Ok((b, self.boundary_vertices.clone()))
    }

    /// Tangential trace. Degree 0: values at boundary vertices. Degree 1 in 2D:
    /// values on boundary edges (in boundary-complex order and orientation).
    /// Degree 1 in 1D: the value on the edge adjacent to each boundary vertex.
    pub fn trace_t(&self, a: &Cochain) -> Result<Cochain> {
        if !self.has_boundary() {
            return Err(Error::NoBoundary);
        }
        let v = a.vdim;
        let mut data = vec![];
        match (a.degree, self.dim) {
            (0, _) => {
                for &b in &self.boundary_vertices {
                    data.extend_from_slice(a.cell(b));
                }
            }
            (1, 1) => {
                for &b in &self.boundary_vertices {
                    data.extend_from_slice(a.cell(self.star[b][0].0));
                }
            }
            (1, 2) => {
                for &(e, s) in &self.boundary_edges {
                    data.extend(a.cell(e).iter().map(|x| s * x));
                }
            }
            _ => return Err(Error::TopDegree),
        }
        let degree = if (a.degree, self.dim) == (1, 1) { 0 } else { a.degree };
        Ok(Cochain {
            degree,
            space: a.space,
            vdim: v,
            data,
        })
    }

    /// Normal trace at boundary vertices: outward sum over incident
    /// non-boundary edges. Degree 0 input is differentiated first.
    pub fn trace_n(&self, a: &Cochain) -> Result<Cochain> {
        if !self.has_boundary() {
            return Err(Error::NoBoundary);
        }
        if a.degree >= self.dim && !(a.degree == 1 && self.dim == 2) {
            return Err(Error::TopDegree);
        }
        let a1 = if a.degree == 0 { self.d(a)? } else { a.clone() };
        let v = a.vdim;
        let mut data = vec![0.0; self.boundary_vertices.len() * v];
        for (i, &b) in self.boundary_vertices.iter().enumerate() {
            for &(e, o) in &self.star[b] {
                if self.is_boundary_edge[e] {
                    continue;
                }
                // outward from the interior means towards b
                for k in 0..v {
                    data[i * v + k] += o as f64 * a1.data[e * v + k];
                }
            }
        }
        Ok(Cochain {
            degree: 0,
            space: a.space,
            vdim: v,
            data,
        })
    }

    /// `Σ_σ m_σ ⟨α_σ, β_σ⟩` with the diagonal masses and, for vector values,
    /// the pairing `g` of `alg` (identity for scalars).
    pub fn inner(&self, a: &Cochain, b: &Cochain, alg: Option<&LieAlgebra>) -> Result<f64> {
        if a.degree != b.degree || a.vdim != b.vdim || a.data.len() != b.data.len() {
            return Err(Error::DimensionMismatch {
                expected: a.data.len(),
                got: b.data.len(),
            });
        }
        let m = self.mass(a.degree);
        let v = a.vdim;
        let mut s = 0.0;
        for (i, mi) in m.iter().enumerate() {
            let (x, y) = (a.cell(i), b.cell(i));
            let p = match alg {
                Some(alg) if alg.dim() == v => alg.metric(x, y),
                _ => dot(x, y),
            };
            s += mi * p;
        }
        Ok(s)
    }
}

/// `(d_A ξ)_e = ξ_h − ξ_t + [A_e, ½(ξ_h + ξ_t)]`, written into `out`.
pub fn d_twisted_raw(cx: &CellComplex, alg: &LieAlgebra, a: &[f64], xi: &[f64], out: &mut [f64]) {
    let d = alg.dim();
    let mut avg = vec![0.0; d];
    for (e, &(t, h)) in cx.edges().iter().enumerate() {
        let o = &mut out[e * d..(e + 1) * d];
        for k in 0..d {
            o[k] = xi[h * d + k] - xi[t * d + k];
            avg[k] = 0.5 * (xi[h * d + k] + xi[t * d + k]);
        }
        alg.bracket_acc(&a[e * d..(e + 1) * d], &avg, 1.0, o);
    }
}

pub fn d_twisted(cx: &CellComplex, alg: &LieAlgebra, a: &Cochain, xi: &Cochain) -> Result<Cochain> {
    let d = alg.dim();
    if a.degree != 1 || xi.degree != 0 || a.vdim != d || xi.vdim != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a.vdim.min(xi.vdim),
        });
    }
    let mut out = Cochain::zeros(cx, 1, ValueSpace::Algebra, d);
    d_twisted_raw(cx, alg, &a.data, &xi.data, &mut out.data);
    Ok(out)
}

/// Matrix of `ξ ↦ d_A ξ` (rows: edge × d, columns: vertex × d).
pub fn d_twisted_matrix(cx: &CellComplex, alg: &LieAlgebra, a: &[f64]) -> DMatrix<f64> {
    let d = alg.dim();
    let mut m = DMatrix::zeros(cx.n_edges() * d, cx.n_vertices() * d);
    for (e, &(t, h)) in cx.edges().iter().enumerate() {
        let ad = alg.ad_matrix(&a[e * d..(e + 1) * d]);
        for k in 0..d {
            m[(e * d + k, h * d + k)] += 1.0;
            m[(e * d + k, t * d + k)] -= 1.0;
            for j in 0..d {
                m[(e * d + k, h * d + j)] += 0.5 * ad[(k, j)];
                m[(e * d + k, t * d + j)] += 0.5 * ad[(k, j)];
            }
        }
    }
    m
}

/// Per-vertex functional `G_v` with `Σ_e ⟨E_e, (d_A ξ)_e⟩ = Σ_v ⟨G_v, ξ_v⟩`.
pub fn vertex_divergence(cx: &CellComplex, alg: &LieAlgebra, a: &[f64], e_field: &[f64]) -> Vec<f64> {
    let d = alg.dim();
    let mut g = vec![0.0; cx.n_vertices() * d];
    let mut half = vec![0.0; d];
    for (e, &(t, h)) in cx.edges().iter().enumerate() {
        let ee = &e_field[e * d..(e + 1) * d];
        half.iter_mut().for_each(|x| *x = 0.0);
        alg.coadjoint_acc(&a[e * d..(e + 1) * d], ee, 0.5, &mut half);
        for k in 0..d {
            g[h * d + k] += ee[k] + half[k];
            g[t * d + k] += -ee[k] + half[k];
        }
    }
    g
}

/// Output of [`green_pairing`].
#[derive(Clone, Debug)]
pub struct GreenSplit {
    /// One dual vector per interior vertex (order of `interior_vertices`).
    pub bulk: Vec<f64>,
    /// One dual vector per boundary vertex (order of `boundary_vertices`).
    pub bdry: Vec<f64>,
}

/// Summation by parts with all boundary-vertex contributions routed to the
/// boundary: `Σ_e ⟨E_e,(d_Aξ)_e⟩ = −Σ_int ⟨bulk_v, ξ_v⟩ + Σ_∂ s_b ⟨bdry_b, ξ_b⟩`.
pub fn green_pairing(cx: &CellComplex, alg: &LieAlgebra, a: &[f64], e_field: &[f64]) -> GreenSplit {
    let d = alg.dim();
    let g = vertex_divergence(cx, alg, a, e_field);
    let mut bulk = Vec::with_capacity(cx.interior_vertices().len() * d);
    for &v in cx.interior_vertices() {
        bulk.extend(g[v * d..(v + 1) * d].iter().map(|x| -x));
    }
    let mut bdry = Vec::with_capacity(cx.boundary_vertices().len() * d);
    for &v in cx.boundary_vertices() {
        let s = cx.flux_sign(v);
        bdry.extend(g[v * d..(v + 1) * d].iter().map(|x| s * x));
    }
    GreenSplit { bulk, bdry }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_counts() {
        let cx = CellComplex::interval(2).unwrap();
        assert_eq!((cx.n_vertices(), cx.n_edges()), (3, 2));
        assert_eq!(cx.boundary_vertices(), &[0, 2]);
        assert_eq!(cx.flux_sign(0), -1.0);
        assert_eq!(cx.flux_sign(2), 1.0);
    }

    #[test]
    fn builders_reject_small_parameters() {
        assert!(CellComplex::interval(1).is_err());
        assert!(CellComplex::disk(0).is_err());
        assert!(CellComplex::annulus(0).is_err());
    }

    #[test]
    fn circle_has_no_boundary() {
        let cx = CellComplex::circle(8).unwrap();
        assert_eq!((cx.n_vertices(), cx.n_edges()), (8, 8));
        assert!(!cx.has_boundary());
        assert_eq!(cx.betti1(), 1);
    }

    #[test]
    fn disk_euler_characteristic() {
        for r in 1..5 {
            let cx = CellComplex::disk(r).unwrap();
            assert_eq!(cx.euler_characteristic(), 1, "disk({r})");
            assert_eq!(cx.n_boundary_components(), 1);
            assert_eq!(cx.boundary_vertices().len(), 6 * r);
        }
        assert_eq!(CellComplex::disk(1).unwrap().n_faces(), 6);
    }

    #[test]
    fn annulus_topology() {
        let cx = CellComplex::annulus(1).unwrap();
        assert_eq!(cx.euler_characteristic(), 0);
        assert_eq!(cx.n_boundary_components(), 2);
        assert_eq!(cx.betti1(), 1);
        assert!(!cx.interior_vertices().is_empty());
    }

    #[test]
    fn signed_difference_on_path() {
        let cx = CellComplex::interval(2).unwrap();
        let xi = Cochain::new(&cx, 0, ValueSpace::Scalar, 1, vec![1.0, 0.0, 2.0]).unwrap();
        assert_eq!(cx.d(&xi).unwrap().data, vec![-1.0, 2.0]);
    }

    #[test]
    fn d_of_top_degree_rejected() {
        let cx = CellComplex::interval(3).unwrap();
        let a = Cochain::zeros(&cx, 1, ValueSpace::Scalar, 1);
        assert!(matches!(cx.d(&a), Err(Error::TopDegree)));
    }

    #[test]
    fn unit_mass_sum_on_uniform_interval() {
        let n = 8;
        let cx = CellComplex::interval(n).unwrap();
        let h = 1.0 / n as f64;
        // the 1-form dx has value h on every edge
        let a = Cochain::new(&cx, 1, ValueSpace::Scalar, 1, vec![h; n]).unwrap();
        let v = cx.inner(&a, &a, None).unwrap();
        assert!((v - n as f64 * h).abs() < 1e-14);
    }

    #[test]
    fn green_example_on_interval() {
        let cx = CellComplex::interval(2).unwrap();
        let alg = LieAlgebra::u1();
        let g = green_pairing(&cx, &alg, &[0.0, 0.0], &[3.0, 3.0]);
        assert_eq!(g.bulk, vec![0.0]);
        assert_eq!(g.bdry, vec![3.0, 3.0]);
        // −Σ bulk ξ + Σ s_b bdry ξ_b = 0 + (−3·1 + 3·2) = 3 = Σ E dξ
        let rhs = -g.bulk[0] * 0.0 + (-1.0) * g.bdry[0] * 1.0 + g.bdry[1] * 2.0;
        assert_eq!(rhs, 3.0);
    }

    #[test]
    fn trace_of_edge_field_in_1d_is_adjacent_value() {
        let cx = CellComplex::interval(3).unwrap();
        let e = Cochain::new(&cx, 1, ValueSpace::Dual, 1, vec![5.0, 6.0, 7.0]).unwrap();
        assert_eq!(cx.trace_t(&e).unwrap().data, vec![5.0, 7.0]);
    }

    #[test]
    fn trace_commutes_with_d_in_2d() {
        let cx = CellComplex::disk(2).unwrap();
        let (b, _) = cx.boundary_complex().unwrap();
        let xi: Vec<f64> = (0..cx.n_vertices()).map(|i| (i as f64 * 0.37).sin()).collect();
        let xi = Cochain::new(&cx, 0, ValueSpace::Scalar, 1, xi).unwrap();
        let lhs = cx.trace_t(&cx.d(&xi).unwrap()).unwrap();
        let rhs = b.d(&cx.trace_t(&xi).unwrap()).unwrap();
        assert_eq!(lhs.data, rhs.data);
    }

    #[test]
    fn mesh_roundtrip_through_json() {
        let cx = CellComplex::annulus(1).unwrap();
        let s = serde_json::to_string(&cx.to_doc()).unwrap();
        let doc: MeshDoc = serde_json::from_str(&s).unwrap();
        let cy = CellComplex::from_doc(&doc).unwrap();
        assert_eq!(cy.d1_matrix(), cx.d1_matrix());
        assert_eq!(cy.mass(1), cx.mass(1));
    }
}
