//! Dense rank-revealing helpers and the `Subspace` carrier.

use nalgebra::{DMatrix, DVector};

use crate::tol;

/// Singular value decomposition `a = U diag(s) Vᵀ`, singular values descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// nalgebra's bidiagonal iteration stops early on rank-deficient input
/// (reconstruction errors near 1e-4 were seen), so decompositions go through faer.
pub fn svd(a: &DMatrix<f64>, thin: bool) -> Svd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        let k = if thin { 0 } else { m };
        let kv = if thin { 0 } else { n };
        return Svd {
            u: DMatrix::identity(m, k),
            s: vec![],
            v: DMatrix::identity(n, kv),
        };
    }
    let f = to_faer(a);
    let dec = if thin { f.thin_svd() } else { f.svd() }.expect("svd converges");
    let sd = dec.S().column_vector();
    Svd {
        u: from_faer(dec.U()),
        s: (0..sd.nrows()).map(|i| sd[i]).collect(),
        v: from_faer(dec.V()),
    }
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    svd(a, true).s
}

/// Minimum-norm least squares `min |a x − b|`, dropping singular values at or
/// below `rank_cut` and the absolute cut `floor`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, floor: f64) -> DVector<f64> {
    let d = svd(a, true);
    let cut = rank_cut(&d.s).max(floor);
    let utb = d.u.transpose() * b;
    let mut y = DVector::zeros(d.s.len());
    for (i, &s) in d.s.iter().enumerate() {
        if s > cut {
            y[i] = utb[i] / s;
        }
    }
    d.v * y
}

/// Singular values and right singular vectors (full square `V`) of `a`.
pub fn full_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    if a.ncols() == 0 {
        return (vec![], DMatrix::zeros(0, 0));
    }
    let d = svd(a, false);
    let mut s = d.s;
    // pad so that every column of V has a singular value
    s.resize(a.ncols(), 0.0);
    (s, d.v)
}

/// Rank threshold relative to the largest singular value, with an absolute floor.
pub fn rank_cut(sv: &[f64]) -> f64 {
    let top = sv.iter().cloned().fold(0.0, f64::max);
    (tol::RANK * top).max(1e-14)
}

pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = singular_values(a);
    let cut = rank_cut(&sv);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Orthonormal basis of the null space of `a`.
pub fn kernel(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let (sv, v) = full_svd(a);
    let cut = rank_cut(&sv);
    let r = sv.iter().filter(|&&s| s > cut).count();
    v.columns(r, n - r).into_owned()
}

/// Orthonormal basis of the column space of `a`.
pub fn range(a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    if a.ncols() == 0 || m == 0 {
        return DMatrix::zeros(m, 0);
    }
    let d = svd(a, true);
    let cut = rank_cut(&d.s);
    let keep = d.s.iter().filter(|&&s| s > cut).count();
    d.u.columns(0, keep).into_owned()
}

pub fn smallest_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let (sv, _) = full_svd(a);
    if a.nrows() < a.ncols() {
        return 0.0;
    }
    sv.last().copied().unwrap_or(0.0)
}

/// A linear subspace of a coordinate space, held as an orthonormal basis.
#[derive(Clone, Debug)]
pub struct Subspace {
    pub basis: DMatrix<f64>,
}

impl Subspace {
    pub fn span(vectors: &DMatrix<f64>) -> Self {
        Subspace {
            basis: range(vectors),
        }
    }

    pub fn zero(ambient: usize) -> Self {
        Subspace {
            basis: DMatrix::zeros(ambient, 0),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Subspace {
            basis: DMatrix::identity(ambient, ambient),
        }
    }

    pub fn kernel_of(a: &DMatrix<f64>) -> Self {
        Subspace { basis: kernel(a) }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.basis.transpose() * &self.basis;
        (g - DMatrix::identity(self.dim(), self.dim())).amax()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Distance of `v` from the subspace, relative to `|v|`.
    pub fn distance(&self, v: &DVector<f64>) -> f64 {
        let p = &self.basis * (self.basis.transpose() * v);
        let n = v.norm();
        if n == 0.0 {
            0.0
        } else {
            (v - p).norm() / n
        }
    }

    /// Largest relative distance of the columns of `vs` from the subspace.
    pub fn containment_defect(&self, vs: &DMatrix<f64>) -> f64 {
        (0..vs.ncols())
            .map(|c| self.distance(&vs.column(c).into_owned()))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, other: &Subspace, tol: f64) -> bool {
        self.containment_defect(&other.basis) <= tol
    }

    /// Principal angles (radians, ascending) between two subspaces.
    pub fn principal_angles(&self, other: &Subspace) -> Vec<f64> {
        if self.dim() == 0 || other.dim() == 0 {
            return vec![];
        }
        // cosines lose accuracy near zero angle; combine with sines of the
        // residual of the smaller space against the larger one
        let (small, large) = if self.dim() <= other.dim() { (self, other) } else { (other, self) };
        let m = large.basis.transpose() * &small.basis;
        let mut cos: Vec<f64> = singular_values(&m).iter().map(|s| s.clamp(0.0, 1.0)).collect();
        cos.sort_by(|a, b| b.total_cmp(a));
        let r = &small.basis - &large.basis * &m;
        let mut sin: Vec<f64> = singular_values(&r).iter().map(|s| s.clamp(0.0, 1.0)).collect();
        sin.sort_by(f64::total_cmp);
        let k = small.dim();
        (0..k)
            .map(|i| {
                let c = cos.get(i).copied().unwrap_or(0.0);
                if c * c > 0.5 {
                    sin[i].asin()
                } else {
                    c.acos()
                }
            })
            .collect()
    }

    /// Largest principal angle, or `pi/2` when the dimensions differ.
    pub fn gap(&self, other: &Subspace) -> f64 {
        if self.dim() != other.dim() {
            return std::f64::consts::FRAC_PI_2;
        }
        self.principal_angles(other)
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn intersect(&self, other: &Subspace) -> Subspace {
        // v = B1 a = B2 b  <=>  [B1, -B2] (a;b) = 0
        let n = self.ambient();
        let (d1, d2) = (self.dim(), other.dim());
        if d1 == 0 || d2 == 0 {
            return Subspace::zero(n);
        }
        let mut m = DMatrix::zeros(n, d1 + d2);
        m.view_mut((0, 0), (n, d1)).copy_from(&self.basis);
        m.view_mut((0, d1), (n, d2)).copy_from(&(-&other.basis));
        let k = kernel(&m);
        let vecs = &self.basis * k.rows(0, d1);
        Subspace::span(&vecs)
    }

    /// Orthonormal complement of `inner` inside `self`.
    pub fn complement_of(&self, inner: &Subspace) -> Subspace {
        let p = &self.basis - inner.projector() * &self.basis;
        Subspace::span(&p)
    }
}

/// Matrix `x ↦ Σ a_i b_iᵀ x` helper: rows of `m` restricted to `rows`.
pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

pub fn select_cols(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

/// Least-squares fit of `log y = p log x + c`; returns the slope `p`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = kernel(&a);
        assert_eq!(k.ncols(), 2);
        assert!((&a * &k).amax() < 1e-14);
    }

    #[test]
    fn intersection_of_planes() {
        let p1 = Subspace::span(&DMatrix::from_column_slice(3, 2, &[1., 0., 0., 0., 1., 0.]));
        let p2 = Subspace::span(&DMatrix::from_column_slice(3, 2, &[0., 1., 0., 0., 0., 1.]));
        let l = p1.intersect(&p2);
        assert_eq!(l.dim(), 1);
        assert!(l.basis[(1, 0)].abs() > 1.0 - 1e-12);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [8.0, 16.0, 32.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.0)).collect();
        assert!((loglog_slope(&x, &y) + 2.0).abs() < 1e-12);
    }
}
