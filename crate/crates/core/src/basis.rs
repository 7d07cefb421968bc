//! One-dimensional reference-element operators on [-1, 1].
//!
//! Everything multidimensional is built from these by applying a 1D matrix
//! along one tensor direction at a time (see [`apply_along`]).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 10;

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n + col] = value;
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    fn inverse(&self) -> Option<Matrix> {
        let m = DMatrix::from_row_slice(self.n, self.n, &self.data);
        let inv = m.try_inverse()?;
        let mut out = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(i, j, inv[(i, j)]);
            }
        }
        Some(out)
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Legendre polynomial P_n and its derivative at `x` (three-term recurrence).
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for k in 1..n {
        let kf = k as f64;
        let p_next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        let dp_next = dp_prev + (2.0 * kf + 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

/// Legendre polynomial normalized to unit L2 norm on [-1, 1].
pub fn orthonormal_legendre(n: usize, x: f64) -> f64 {
    ((2 * n + 1) as f64 / 2.0).sqrt() * legendre(n, x).0
}

/// Legendre-Gauss nodes and weights with `count` points.
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    for i in 0..count.div_ceil(2) {
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(count, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(count, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[count - 1 - i] = -x;
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    if count % 2 == 1 {
        nodes[count / 2] = 0.0;
    }
    (nodes, weights)
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let prod: f64 = (0..nodes.len())
                .filter(|&k| k != j)
                .map(|k| nodes[j] - nodes[k])
                .product();
            1.0 / prod
        })
        .collect()
}

/// Reference-element operators for tensor-product Lagrange bases collocated
/// at Legendre-Gauss nodes.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    bary: Vec<f64>,
    /// `derivative.get(i, j)` is the derivative of the j-th Lagrange polynomial at node i.
    pub derivative: Matrix,
    /// Weak-form derivative: `-(w_j / w_i) D[j][i]`.
    pub weak_derivative: Matrix,
    /// Lagrange polynomials evaluated at -1 and +1.
    pub face_interp: [Vec<f64>; 2],
    pub vandermonde: Matrix,
    pub vandermonde_inv: Matrix,
    /// Nodal values to equidistant sub-cell means.
    pub projection: Matrix,
    /// Sub-cell means to nodal values.
    pub reconstruction: Matrix,
    /// Sub-cell interval boundaries, `degree + 2` values from -1 to 1.
    pub subcell_bounds: Vec<f64>,
    pub subcell_centers: Vec<f64>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree {degree} outside 0..={MAX_DEGREE}"
            )));
        }
        let n1 = degree + 1;
        let (nodes, weights) = gauss_legendre(n1);
        let bary = barycentric_weights(&nodes);

        let mut derivative = Matrix::zeros(n1);
        for i in 0..n1 {
            let mut diag = 0.0;
            for j in 0..n1 {
                if i != j {
                    let v = bary[j] / bary[i] / (nodes[i] - nodes[j]);
                    derivative.set(i, j, v);
                    diag -= v;
                }
            }
            derivative.set(i, i, diag);
        }
        let mut weak_derivative = Matrix::zeros(n1);
        for i in 0..n1 {
            for j in 0..n1 {
                weak_derivative.set(i, j, -weights[j] / weights[i] * derivative.get(j, i));
            }
        }

        let mut vandermonde = Matrix::zeros(n1);
        let mut vandermonde_inv = Matrix::zeros(n1);
        for i in 0..n1 {
            for k in 0..n1 {
                let l = orthonormal_legendre(k, nodes[i]);
                vandermonde.set(i, k, l);
                // Gauss quadrature is exact for L_k * L_j up to degree 2N.
                vandermonde_inv.set(k, i, weights[i] * l);
            }
        }

        let width = 2.0 / n1 as f64;
        let subcell_bounds: Vec<f64> = (0..=n1).map(|k| -1.0 + width * k as f64).collect();
        let subcell_centers: Vec<f64> = (0..n1).map(|k| -1.0 + width * (k as f64 + 0.5)).collect();

        let mut el = Self {
            degree,
            nodes,
            weights,
            bary,
            derivative,
            weak_derivative,
            face_interp: [Vec::new(), Vec::new()],
            vandermonde,
            vandermonde_inv,
            projection: Matrix::identity(n1),
            reconstruction: Matrix::identity(n1),
            subcell_bounds,
            subcell_centers,
        };
        el.face_interp = [el.lagrange_at(-1.0), el.lagrange_at(1.0)];

        let mut projection = Matrix::zeros(n1);
        for k in 0..n1 {
            let (a, b) = (el.subcell_bounds[k], el.subcell_bounds[k + 1]);
            for q in 0..n1 {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * el.nodes[q];
                let l = el.lagrange_at(x);
                for j in 0..n1 {
                    let v = projection.get(k, j) + 0.5 * el.weights[q] * l[j];
                    projection.set(k, j, v);
                }
            }
        }
        let reconstruction = projection.inverse().ok_or_else(|| {
            Error::InvalidArgument(format!("projection matrix singular for degree {degree}"))
        })?;
        el.projection = projection;
        el.reconstruction = reconstruction;
        Ok(el)
    }

    /// Number of points per direction.
    #[inline]
    pub fn n1(&self) -> usize {
        self.degree + 1
    }

    /// Nodes per element in `dim` dimensions.
    #[inline]
    pub fn nodes_per_element(&self, dim: usize) -> usize {
        self.n1().pow(dim as u32)
    }

    /// All Lagrange basis polynomials evaluated at `x`.
    pub fn lagrange_at(&self, x: f64) -> Vec<f64> {
        let n1 = self.n1();
        if let Some(j) = self.nodes.iter().position(|&xj| (x - xj).abs() < 1e-15) {
            let mut out = vec![0.0; n1];
            out[j] = 1.0;
            return out;
        }
        let terms: Vec<f64> = (0..n1).map(|j| self.bary[j] / (x - self.nodes[j])).collect();
        let sum: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / sum).collect()
    }

    fn check_line(&self, line: &[f64]) -> Result<()> {
        if line.len() != self.n1() {
            return Err(Error::InvalidArgument(format!(
                "line has {} entries, expected {}",
                line.len(),
                self.n1()
            )));
        }
        Ok(())
    }

    pub fn nodal_to_modal(&self, nodal: &[f64]) -> Result<Vec<f64>> {
        self.check_line(nodal)?;
        Ok(self.vandermonde_inv.apply(nodal))
    }

    pub fn modal_to_nodal(&self, modal: &[f64]) -> Result<Vec<f64>> {
        self.check_line(modal)?;
        Ok(self.vandermonde.apply(modal))
    }

    pub fn project_dg_to_fv(&self, nodal: &[f64]) -> Result<Vec<f64>> {
        self.check_line(nodal)?;
        Ok(self.projection.apply(nodal))
    }

    pub fn reconstruct_fv_to_dg(&self, means: &[f64]) -> Result<Vec<f64>> {
        self.check_line(means)?;
        Ok(self.reconstruction.apply(means))
    }

    /// Tensor version of [`Self::project_dg_to_fv`] for a `dim`-dimensional element.
    pub fn project_tensor(&self, dim: usize, nodal: &[f64], out: &mut [f64]) {
        apply_all_directions(&self.projection, self.n1(), dim, nodal, out);
    }

    /// Tensor version of [`Self::reconstruct_fv_to_dg`].
    pub fn reconstruct_tensor(&self, dim: usize, means: &[f64], out: &mut [f64]) {
        apply_all_directions(&self.reconstruction, self.n1(), dim, means, out);
    }

    /// Interpolates a nodal tensor to an arbitrary reference point.
    pub fn interpolate(&self, dim: usize, nodal: &[f64], xi: [f64; 3]) -> f64 {
        let n1 = self.n1();
        let l: Vec<Vec<f64>> = (0..dim).map(|m| self.lagrange_at(xi[m])).collect();
        let mut sum = 0.0;
        for (idx, &v) in nodal.iter().enumerate() {
            let mut w = 1.0;
            let mut rem = idx;
            for lm in &l {
                w *= lm[rem % n1];
                rem /= n1;
            }
            sum += w * v;
        }
        sum
    }
}

/// Stride of tensor direction `dir` for extent `n1` per direction.
#[inline]
pub fn stride(n1: usize, dir: usize) -> usize {
    n1.pow(dir as u32)
}

/// Applies the 1D operator `mat` along tensor direction `dir`, writing
/// (overwriting) into `out`.
pub fn apply_along(mat: &Matrix, n1: usize, dim: usize, dir: usize, input: &[f64], out: &mut [f64]) {
    let total = n1.pow(dim as u32);
    let s = stride(n1, dir);
    debug_assert_eq!(input.len(), total);
    for base in 0..total {
        if !(base / s).is_multiple_of(n1) {
            continue;
        }
        for i in 0..n1 {
            let mut acc = 0.0;
            for j in 0..n1 {
                acc += mat.data[i * n1 + j] * input[base + j * s];
            }
            out[base + i * s] = acc;
        }
    }
}

/// Applies `mat` along every direction in turn (a full tensor-product transform).
pub fn apply_all_directions(mat: &Matrix, n1: usize, dim: usize, input: &[f64], out: &mut [f64]) {
    let mut buf = input.to_vec();
    for dir in 0..dim {
        apply_along(mat, n1, dim, dir, &buf, out);
        buf.copy_from_slice(out);
    }
    if dim == 0 {
        out.copy_from_slice(input);
    }
}
