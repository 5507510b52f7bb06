//! Finite-dimensional ambient spaces, norms, and space decompositions
//! `V = V_1 + ... + V_J` given by prolongation matrices.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::GradientOperator;
use crate::linalg;

/// An element of the ambient space `R^N`.
pub type Point = DVector<f64>;

/// Default cap on the ambient dimension for dense operations.
pub const DEFAULT_DIM_CAP: usize = 20_000;

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// A subspace `V_j` described by a full-column-rank prolongation `P_j: R^{n_j} -> R^N`.
#[derive(Debug, Clone)]
pub struct Subspace {
    index: usize,
    prolongation: DMatrix<f64>,
    /// Set when the prolongation is a 0/1 coordinate injection.
    coords: Option<Vec<usize>>,
    /// `P^T P`, identity for coordinate blocks.
    gram: DMatrix<f64>,
}

impl Subspace {
    /// Coordinate block spanned by `{e_i : i in indices}`.
    pub fn from_indices(index: usize, ambient_dim: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "subspace {index} is empty"
            )));
        }
        let mut seen = vec![false; ambient_dim];
        for &i in &indices {
            if i >= ambient_dim {
                return Err(Error::InvalidParameter(format!(
                    "subspace {index}: coordinate {i} outside dimension {ambient_dim}"
                )));
            }
            if seen[i] {
                return Err(Error::RankDeficient(index));
            }
            seen[i] = true;
        }
        let n = indices.len();
        let mut p = DMatrix::zeros(ambient_dim, n);
        for (c, &i) in indices.iter().enumerate() {
            p[(i, c)] = 1.0;
        }
        Ok(Self {
            index,
            prolongation: p,
            coords: Some(indices),
            gram: DMatrix::identity(n, n),
        })
    }

    /// General subspace from a dense prolongation; rejects rank-deficient input.
    pub fn from_matrix(index: usize, prolongation: DMatrix<f64>) -> Result<Self> {
        if prolongation.ncols() == 0 || prolongation.ncols() > prolongation.nrows() {
            return Err(Error::RankDeficient(index));
        }
        let gram = prolongation.transpose() * &prolongation;
        let (lo, hi) = linalg::sym_extreme_eigenvalues(&gram);
        if !(hi > 0.0) || lo <= linalg::REL_TOL * hi {
            return Err(Error::RankDeficient(index));
        }
        Ok(Self {
            index,
            prolongation,
            coords: None,
            gram,
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Local dimension `n_j`.
    pub fn dim(&self) -> usize {
        self.prolongation.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.prolongation.nrows()
    }

    pub fn prolongation(&self) -> &DMatrix<f64> {
        &self.prolongation
    }

    pub fn coords(&self) -> Option<&[usize]> {
        self.coords.as_deref()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `P w` as an ambient point.
    pub fn prolong(&self, w: &Point) -> Point {
        match &self.coords {
            Some(idx) => {
                let mut out = Point::zeros(self.ambient_dim());
                for (c, &i) in idx.iter().enumerate() {
                    out[i] = w[c];
                }
                out
            }
            None => &self.prolongation * w,
        }
    }

    /// `v + P w` without allocating the intermediate prolongation.
    pub fn add_prolonged(&self, v: &Point, w: &Point) -> Point {
        match &self.coords {
            Some(idx) => {
                let mut out = v.clone();
                for (c, &i) in idx.iter().enumerate() {
                    out[i] += w[c];
                }
                out
            }
            None => v + &self.prolongation * w,
        }
    }

    /// `P^T v` in local coordinates.
    pub fn restrict(&self, v: &Point) -> Point {
        match &self.coords {
            Some(idx) => Point::from_iterator(idx.len(), idx.iter().map(|&i| v[i])),
            None => self.prolongation.tr_mul(v),
        }
    }

    /// Euclidean norm of `P w` in the ambient space.
    pub fn ambient_norm(&self, w: &Point) -> f64 {
        match &self.coords {
            Some(_) => w.norm(),
            None => w.dot(&(&self.gram * w)).max(0.0).sqrt(),
        }
    }

    /// Euclidean-orthogonal projection `P (P^T P)^{-1} P^T v`.
    pub fn project(&self, v: &Point) -> Point {
        let r = self.restrict(v);
        match &self.coords {
            Some(_) => self.prolong(&r),
            None => self.prolong(&linalg::solve_psd(&self.gram, &r)),
        }
    }
}

/// An ordered family of subspaces whose sum is the ambient space.
#[derive(Debug, Clone)]
pub struct Decomposition {
    ambient_dim: usize,
    subspaces: Vec<Subspace>,
    /// Number of blocks containing each coordinate (coordinate decompositions only).
    cover: Option<Vec<usize>>,
}

impl Decomposition {
    pub fn new(ambient_dim: usize, subspaces: Vec<Subspace>) -> Result<Self> {
        Self::with_cap(ambient_dim, subspaces, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(ambient_dim: usize, subspaces: Vec<Subspace>, cap: usize) -> Result<Self> {
        if ambient_dim > cap {
            return Err(Error::DimensionCap {
                dim: ambient_dim,
                cap,
            });
        }
        if subspaces.is_empty() {
            return Err(Error::InvalidParameter(
                "decomposition needs at least one subspace".into(),
            ));
        }
        for s in &subspaces {
            check_dim(ambient_dim, s.ambient_dim())?;
        }
        let cover = if subspaces.iter().all(|s| s.coords.is_some()) {
            let mut count = vec![0usize; ambient_dim];
            for s in &subspaces {
                for &i in s.coords().unwrap() {
                    count[i] += 1;
                }
            }
            if count.contains(&0) {
                return Err(Error::NotSurjective);
            }
            Some(count)
        } else {
            let sum = Self::projector_sum(ambient_dim, &subspaces);
            let (lo, hi) = linalg::sym_extreme_eigenvalues(&sum);
            if lo <= linalg::REL_TOL * hi.max(1.0) {
                return Err(Error::NotSurjective);
            }
            None
        };
        let subspaces = subspaces
            .into_iter()
            .enumerate()
            .map(|(j, mut s)| {
                s.index = j;
                s
            })
            .collect();
        Ok(Self {
            ambient_dim,
            subspaces,
            cover,
        })
    }

    /// Coordinate blocks from index lists.
    pub fn from_blocks(ambient_dim: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let subs = blocks
            .into_iter()
            .enumerate()
            .map(|(j, b)| Subspace::from_indices(j, ambient_dim, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ambient_dim, subs)
    }

    /// `subdomains` contiguous cores of `0..n`, each widened by `overlap` nodes per side.
    pub fn overlap_1d(n: usize, subdomains: usize, overlap: usize) -> Result<Self> {
        let cores = split_range(n, subdomains)?;
        let min_core = cores.iter().map(|(a, b)| b - a).min().unwrap_or(0);
        if subdomains > 1 && overlap > min_core {
            return Err(Error::InvalidParameter(format!(
                "overlap {overlap} exceeds the subdomain width {min_core}"
            )));
        }
        let blocks = cores
            .into_iter()
            .map(|(a, b)| (a.saturating_sub(overlap)..(b + overlap).min(n)).collect())
            .collect();
        Self::from_blocks(n, blocks)
    }

    /// `px x py` rectangular subdomains of an `nx x ny` node grid (node `(i, j)` at `j*nx + i`).
    pub fn overlap_2d(nx: usize, ny: usize, px: usize, py: usize, overlap: usize) -> Result<Self> {
        let cx = split_range(nx, px)?;
        let cy = split_range(ny, py)?;
        let min_core = cx
            .iter()
            .chain(cy.iter())
            .map(|(a, b)| b - a)
            .min()
            .unwrap_or(0);
        if px * py > 1 && overlap > min_core {
            return Err(Error::InvalidParameter(format!(
                "overlap {overlap} exceeds the subdomain width {min_core}"
            )));
        }
        let mut blocks = Vec::with_capacity(px * py);
        for &(y0, y1) in &cy {
            for &(x0, x1) in &cx {
                let xs = x0.saturating_sub(overlap)..(x1 + overlap).min(nx);
                let ys = y0.saturating_sub(overlap)..(y1 + overlap).min(ny);
                let mut b = Vec::with_capacity(xs.len() * ys.len());
                for j in ys {
                    for i in xs.clone() {
                        b.push(j * nx + i);
                    }
                }
                blocks.push(b);
            }
        }
        Self::from_blocks(nx * ny, blocks)
    }

    fn projector_sum(n: usize, subspaces: &[Subspace]) -> DMatrix<f64> {
        let mut sum = DMatrix::zeros(n, n);
        for s in subspaces {
            let p = &s.prolongation;
            let g_inv = s
                .gram
                .clone()
                .try_inverse()
                .expect("gram checked at construction");
            sum += p * g_inv * p.transpose();
        }
        sum
    }

    /// Number of subspaces `J`.
    pub fn len(&self) -> usize {
        self.subspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subspaces.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn subspaces(&self) -> &[Subspace] {
        &self.subspaces
    }

    pub fn subspace(&self, j: usize) -> Result<&Subspace> {
        self.subspaces.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            count: self.len(),
        })
    }

    /// Cover counts when every subspace is a coordinate block.
    pub fn cover_counts(&self) -> Option<&[usize]> {
        self.cover.as_deref()
    }

    /// True when the coordinate blocks are pairwise disjoint.
    pub fn is_disjoint(&self) -> bool {
        self.cover
            .as_ref()
            .is_some_and(|c| c.iter().all(|&k| k == 1))
    }

    /// Euclidean-orthogonal projection of `v` onto `V_j`.
    pub fn project_orthogonal(&self, j: usize, v: &Point) -> Result<Point> {
        check_dim(self.ambient_dim, v.len())?;
        Ok(self.subspace(j)?.project(v))
    }

    /// Splitting `w = sum_j P_j w_j` with minimal `sum_j ||P_j w_j||^2` (local coordinates).
    pub fn min_norm_split(&self, w: &Point) -> Result<Vec<Point>> {
        check_dim(self.ambient_dim, w.len())?;
        if let Some(cover) = &self.cover {
            let scaled =
                Point::from_iterator(w.len(), w.iter().zip(cover).map(|(x, &c)| x / c as f64));
            return Ok(self.subspaces.iter().map(|s| s.restrict(&scaled)).collect());
        }
        let metrics: Vec<DMatrix<f64>> = self.subspaces.iter().map(|s| s.gram.clone()).collect();
        self.weighted_split(w, &metrics)
    }

    /// Splitting minimizing `sum_j w_j^T M_j w_j` for symmetric positive definite local `M_j`.
    ///
    /// The minimizer is `w_j = M_j^{-1} P_j^T y` with `(sum_j P_j M_j^{-1} P_j^T) y = w`.
    pub fn weighted_split(&self, w: &Point, metrics: &[DMatrix<f64>]) -> Result<Vec<Point>> {
        check_dim(self.ambient_dim, w.len())?;
        check_dim(self.len(), metrics.len())?;
        let mut inv = Vec::with_capacity(self.len());
        let mut stacked = DMatrix::zeros(self.ambient_dim, self.ambient_dim);
        for (s, m) in self.subspaces.iter().zip(metrics) {
            check_dim(s.dim(), m.nrows())?;
            let m_inv = linalg::spd_cholesky(m, "local metric")?.inverse();
            stacked += s.prolongation() * &m_inv * s.prolongation().transpose();
            inv.push(m_inv);
        }
        let y = linalg::solve_psd(&stacked, w);
        Ok(self
            .subspaces
            .iter()
            .zip(inv)
            .map(|(s, m_inv)| m_inv * s.restrict(&y))
            .collect())
    }

    /// Splitting by the partition of unity `1 / cover(i)` (coordinate decompositions only).
    ///
    /// For coordinate blocks this coincides with `min_norm_split`; each `v + P_j w_j`
    /// is then a convex combination of `v` and `v + w` coordinatewise.
    pub fn partition_of_unity_split(&self, w: &Point) -> Option<Vec<Point>> {
        self.cover.as_ref()?;
        self.min_norm_split(w).ok()
    }

    /// `sum_j P_j w_j`.
    pub fn assemble(&self, parts: &[Point]) -> Result<Point> {
        check_dim(self.len(), parts.len())?;
        let mut out = Point::zeros(self.ambient_dim);
        for (s, w) in self.subspaces.iter().zip(parts) {
            check_dim(s.dim(), w.len())?;
            out += s.prolong(w);
        }
        Ok(out)
    }
}

fn split_range(n: usize, parts: usize) -> Result<Vec<(usize, usize)>> {
    if parts == 0 || parts > n {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} nodes into {parts} subdomains"
        )));
    }
    let base = n / parts;
    let extra = n % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        out.push((start, start + len));
        start += len;
    }
    Ok(out)
}

/// The norm `||.||` on the ambient space.
#[derive(Debug, Clone)]
pub enum NormSpec {
    Euclidean,
    /// `(sum_i w_i v_i^2)^{1/2}` with positive weights.
    Weighted(Vec<f64>),
    /// `(v^T A v)^{1/2}`; stores the lower Cholesky factor of `A`.
    Energy {
        matrix: DMatrix<f64>,
        factor: DMatrix<f64>,
    },
    /// `(sum_e |e| |grad_e v|^s)^{1/s}`.
    DiscreteW1s {
        op: Arc<GradientOperator>,
        s: f64,
    },
}

impl NormSpec {
    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "norm weights must be positive".into(),
            ));
        }
        Ok(NormSpec::Weighted(weights))
    }

    /// `||v||_L = (sum_j L_j ||v_j||^2)^{1/2}` on disjoint coordinate blocks.
    pub fn block_l(dec: &Decomposition, l: &[f64]) -> Result<Self> {
        if !dec.is_disjoint() {
            return Err(Error::InvalidParameter(
                "the L-norm needs disjoint coordinate blocks".into(),
            ));
        }
        check_dim(dec.len(), l.len())?;
        let mut w = vec![0.0; dec.ambient_dim()];
        for (s, &lj) in dec.subspaces().iter().zip(l) {
            for &i in s.coords().unwrap() {
                w[i] = lj;
            }
        }
        Self::weighted(w)
    }

    pub fn energy(matrix: DMatrix<f64>) -> Result<Self> {
        let factor = linalg::spd_cholesky(&matrix, "norm operator")?.l();
        Ok(NormSpec::Energy { matrix, factor })
    }

    pub fn w1s(op: Arc<GradientOperator>, s: f64) -> Result<Self> {
        if !(s > 1.0) || !s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "W1s exponent must exceed 1, got {s}"
            )));
        }
        Ok(NormSpec::DiscreteW1s { op, s })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            NormSpec::Euclidean => None,
            NormSpec::Weighted(w) => Some(w.len()),
            NormSpec::Energy { matrix, .. } => Some(matrix.nrows()),
            NormSpec::DiscreteW1s { op, .. } => Some(op.dim()),
        }
    }

    pub fn norm(&self, v: &Point) -> Result<f64> {
        if let Some(n) = self.dim() {
            check_dim(n, v.len())?;
        }
        Ok(match self {
            NormSpec::Euclidean => v.norm(),
            NormSpec::Weighted(w) => w
                .iter()
                .zip(v.iter())
                .map(|(w, x)| w * x * x)
                .sum::<f64>()
                .sqrt(),
            NormSpec::Energy { factor, .. } => factor.tr_mul(v).norm(),
            NormSpec::DiscreteW1s { op, s } => {
                let sum: f64 = op
                    .elements()
                    .iter()
                    .map(|e| {
                        let g = e.gradient(v);
                        e.measure * (g[0] * g[0] + g[1] * g[1]).sqrt().powf(*s)
                    })
                    .sum();
                sum.powf(1.0 / s)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(x: &[f64]) -> Point {
        Point::from_column_slice(x)
    }

    #[test]
    fn axis_projection() {
        let dec = Decomposition::from_blocks(2, vec![vec![0], vec![1]]).unwrap();
        assert_eq!(
            dec.project_orthogonal(0, &pt(&[3.0, 4.0])).unwrap(),
            pt(&[3.0, 0.0])
        );
    }

    #[test]
    fn full_space_projection_is_identity() {
        let dec = Decomposition::from_blocks(2, vec![vec![0, 1]]).unwrap();
        let v = pt(&[-1.5, 2.25]);
        assert_eq!(dec.project_orthogonal(0, &v).unwrap(), v);
    }

    #[test]
    fn overlapping_projection_matches_least_squares() {
        // Dense prolongation to exercise the P (P^T P)^{-1} P^T path.
        let p1 = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let p2 = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let dec = Decomposition::new(
            3,
            vec![
                Subspace::from_matrix(0, p1).unwrap(),
                Subspace::from_matrix(1, p2).unwrap(),
            ],
        )
        .unwrap();
        let q = dec.project_orthogonal(1, &pt(&[1.0, 1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(q, pt(&[0.0, 1.0, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn rank_deficient_prolongation_rejected() {
        let p = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 0.0, 0.0]);
        assert!(matches!(
            Subspace::from_matrix(0, p),
            Err(Error::RankDeficient(0))
        ));
        assert!(matches!(
            Subspace::from_indices(0, 3, vec![1, 1]),
            Err(Error::RankDeficient(0))
        ));
    }

    #[test]
    fn index_out_of_range() {
        let dec = Decomposition::from_blocks(2, vec![vec![0], vec![1]]).unwrap();
        assert!(matches!(
            dec.project_orthogonal(2, &pt(&[1.0, 1.0])),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn non_surjective_rejected() {
        assert!(matches!(
            Decomposition::from_blocks(3, vec![vec![0], vec![1]]),
            Err(Error::NotSurjective)
        ));
    }

    #[test]
    fn dimension_cap_enforced() {
        let s = Subspace::from_indices(0, 5, (0..5).collect()).unwrap();
        assert!(matches!(
            Decomposition::with_cap(5, vec![s], 4),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn disjoint_split_is_restriction() {
        let dec = Decomposition::from_blocks(4, vec![vec![0, 2], vec![1, 3]]).unwrap();
        let parts = dec.min_norm_split(&pt(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(parts[0], pt(&[1.0, 3.0]));
        assert_eq!(parts[1], pt(&[2.0, 4.0]));
    }

    #[test]
    fn zero_split() {
        let dec = Decomposition::from_blocks(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        for w in dec.min_norm_split(&Point::zeros(3)).unwrap() {
            assert_eq!(w.norm(), 0.0);
        }
    }

    #[test]
    fn overlapping_split_matches_pseudoinverse() {
        // Oracle: minimum-norm solution of [P_1 P_2] x = w via the SVD pseudoinverse.
        let stacked = DMatrix::from_row_slice(
            3,
            4,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        );
        let w = pt(&[0.0, 2.0, 0.0]);
        let x = stacked.clone().pseudo_inverse(1e-12).unwrap() * &w;
        let dec = Decomposition::from_blocks(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let parts = dec.min_norm_split(&w).unwrap();
        assert_abs_diff_eq!(parts[0], pt(&[x[0], x[1]]), epsilon = 1e-12);
        assert_abs_diff_eq!(parts[1], pt(&[x[2], x[3]]), epsilon = 1e-12);
        assert_abs_diff_eq!(
            dec.subspaces()[0].prolong(&parts[0]),
            pt(&[0.0, 1.0, 0.0]),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            dec.subspaces()[1].prolong(&parts[1]),
            pt(&[0.0, 1.0, 0.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dense_split_agrees_with_coordinate_split() {
        let blocks = vec![vec![0, 1, 2], vec![2, 3], vec![3, 4, 0]];
        let coord = Decomposition::from_blocks(5, blocks.clone()).unwrap();
        let dense = Decomposition::new(
            5,
            blocks
                .iter()
                .enumerate()
                .map(|(j, b)| {
                    let s = Subspace::from_indices(j, 5, b.clone()).unwrap();
                    Subspace::from_matrix(j, s.prolongation().clone()).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let w = pt(&[1.0, -2.0, 0.5, 3.0, -1.0]);
        let a = coord.min_norm_split(&w).unwrap();
        let b = dense.min_norm_split(&w).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn norms() {
        assert_eq!(NormSpec::Euclidean.norm(&pt(&[3.0, 4.0])).unwrap(), 5.0);
        let dec = Decomposition::from_blocks(2, vec![vec![0], vec![1]]).unwrap();
        let l = NormSpec::block_l(&dec, &[4.0, 9.0]).unwrap();
        assert_abs_diff_eq!(
            l.norm(&pt(&[1.0, 1.0])).unwrap(),
            13f64.sqrt(),
            epsilon = 1e-15
        );
        let a = NormSpec::energy(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let op = Arc::new(GradientOperator::interval(2).unwrap());
        let w = NormSpec::w1s(op, 3.0).unwrap();
        for spec in [NormSpec::Euclidean, l, a, w] {
            assert_eq!(spec.norm(&Point::zeros(2)).unwrap(), 0.0);
        }
    }

    #[test]
    fn norm_validation() {
        assert!(NormSpec::weighted(vec![1.0, 0.0]).is_err());
        assert!(NormSpec::energy(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        let op = Arc::new(GradientOperator::interval(2).unwrap());
        assert!(NormSpec::w1s(op, 1.0).is_err());
        assert!(NormSpec::Euclidean.norm(&pt(&[1.0])).is_ok());
        let w = NormSpec::weighted(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            w.norm(&pt(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn overlap_builders() {
        let d = Decomposition::overlap_1d(10, 3, 1).unwrap();
        assert_eq!(d.subspaces()[0].coords().unwrap(), &[0, 1, 2, 3, 4]);
        assert_eq!(d.subspaces()[1].coords().unwrap(), &[3, 4, 5, 6, 7]);
        assert!(Decomposition::overlap_1d(10, 3, 4).is_err());
        let d2 = Decomposition::overlap_2d(4, 4, 2, 2, 1).unwrap();
        assert_eq!(d2.len(), 4);
        assert_eq!(d2.subspaces()[0].dim(), 9);
    }
}
