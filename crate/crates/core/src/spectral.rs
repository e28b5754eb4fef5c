//! The killed-walk kernel `P_N` and its principal (Perron) eigenpair.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::LatticeDomain;
use crate::linalg::{dot, sup_norm};
use crate::rng::path_rng;

/// Transition matrix of the simple random walk killed on leaving the domain.
///
/// Every stored entry equals `1/(2d)`; rows are in site order and columns
/// within a row are sorted.
#[derive(Debug, Clone)]
pub struct SparseKernel {
    n: usize,
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
}

impl SparseKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The common value `1/(2d)` of all entries.
    pub fn weight(&self) -> f64 {
        1.0 / (2 * self.dim) as f64
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).len() as f64 * self.weight()
    }

    /// All `(row, col, value)` triples in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let w = self.weight();
        (0..self.n).flat_map(move |i| self.row(i).iter().map(move |&j| (i, j as usize, w)))
    }

    /// `y = P x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let w = self.weight();
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for &j in &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]] {
                s += x[j as usize];
            }
            *yi = w * s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }
}

/// Builds `P_N` for the domain.
pub fn assemble(domain: &LatticeDomain) -> SparseKernel {
    let n = domain.len();
    let dim = domain.dim();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(n * 2 * dim);
    row_ptr.push(0);
    for i in 0..n {
        let mut row: Vec<u32> = domain
            .neighbor_row(i)
            .iter()
            .copied()
            .filter(|&j| j != crate::geometry::NO_SITE)
            .collect();
        row.sort_unstable();
        cols.extend_from_slice(&row);
        row_ptr.push(cols.len());
    }
    SparseKernel { n, dim, row_ptr, cols }
}

/// Normalization convention for the eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `N^{-d} Σ φ² = 1`
    L2,
    /// `N^{-d} Σ |φ| = 1`
    L1,
    /// `max φ = 1`
    Sup,
    /// `φ = 1` at the site nearest the origin
    Point,
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Normalization::L2),
            "l1" => Ok(Normalization::L1),
            "sup" | "linf" => Ok(Normalization::Sup),
            "point" => Ok(Normalization::Point),
            other => Err(Error::InvalidArgument(format!("unknown normalization '{other}'"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Normalization::L2 => "l2",
            Normalization::L1 => "l1",
            Normalization::Sup => "sup",
            Normalization::Point => "point",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Power iteration for small kernels, Chebyshev otherwise.
    Auto,
    /// Power iteration on the lazy kernel `(I + P)/2`.
    Power,
    /// Chebyshev-filtered subspace iteration.
    Chebyshev,
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Bound on `max |Pφ - λφ|` with `φ` scaled to sup-norm one.
    pub tol: f64,
    pub normalization: Normalization,
    pub solver: SolverKind,
    /// Cap on kernel applications; derived from the domain size when `None`.
    pub max_matvecs: Option<usize>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-12,
            normalization: Normalization::L2,
            solver: SolverKind::Auto,
            max_matvecs: None,
        }
    }
}

/// Sites at or below which `SolverKind::Auto` uses plain power iteration.
const POWER_AUTO_LIMIT: usize = 2000;
const BLOCK: usize = 6;
const FILTER_DEGREE: usize = 40;

/// Principal eigenpair `(λ_N, φ_N)` of the killed walk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub phi: ScalarField,
    pub normalization: Normalization,
    /// `max |Pφ - λφ| / max φ` at convergence.
    pub residual: f64,
    /// Kernel applications spent by the solver.
    pub iterations: usize,
    pub scale: u32,
    pub dim: usize,
    /// Site used by `Normalization::Point`.
    pub origin_index: usize,
}

impl EigenPair {
    pub fn volume_factor(&self) -> f64 {
        (self.scale as f64).powi(self.dim as i32)
    }

    /// `(1/N^d) Σ φ²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.phi.sum_sq() / self.volume_factor()
    }
}

/// Principal eigenpair with default options and the given residual tolerance.
pub fn principal_eigenpair(kernel: &SparseKernel, domain: &LatticeDomain, tol: f64) -> Result<EigenPair> {
    principal_eigenpair_with(
        kernel,
        domain,
        &EigenOptions {
            tol,
            ..EigenOptions::default()
        },
    )
}

pub fn principal_eigenpair_with(
    kernel: &SparseKernel,
    domain: &LatticeDomain,
    opts: &EigenOptions,
) -> Result<EigenPair> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {}", opts.tol)));
    }
    assert_eq!(kernel.n(), domain.len(), "kernel does not match domain");
    let n = kernel.n();
    let base = EigenPair {
        lambda: 0.0,
        phi: ScalarField::constant(n, 0.0),
        normalization: Normalization::Sup,
        residual: 0.0,
        iterations: 0,
        scale: domain.scale(),
        dim: domain.dim(),
        origin_index: domain.origin_index(),
    };
    if kernel.nnz() == 0 {
        // isolated sites: P = 0, take the point mass at the origin site
        let mut phi = ScalarField::constant(n, 0.0);
        phi[base.origin_index] = 1.0;
        let pair = EigenPair { phi, ..base };
        return Ok(renormalize(&pair, opts.normalization));
    }

    let radius = (domain.scale() as f64).max(domain.max_dist() as f64).max(1.0);
    let cap = opts
        .max_matvecs
        .unwrap_or_else(|| (200.0 * radius * radius * (1.0 / opts.tol).ln()).ceil() as usize);
    let use_power = match opts.solver {
        SolverKind::Power => true,
        SolverKind::Chebyshev => n <= BLOCK,
        SolverKind::Auto => n <= POWER_AUTO_LIMIT,
    };
    let (lambda, mut phi, residual, iterations) = if use_power {
        power_iteration(kernel, opts.tol, cap)?
    } else {
        chebyshev_subspace(kernel, opts.tol, cap)?
    };
    let s = phi.iter().sum::<f64>().signum();
    phi.iter_mut().for_each(|v| *v *= s);
    let pair = EigenPair {
        lambda,
        phi: ScalarField::new(phi),
        residual,
        iterations,
        ..base
    };
    Ok(renormalize(&pair, opts.normalization))
}

/// `max |Pφ - λφ| / max |φ|`.
pub fn residual(kernel: &SparseKernel, lambda: f64, phi: &[f64]) -> f64 {
    let mut y = vec![0.0; phi.len()];
    kernel.apply(phi, &mut y);
    let r = y.iter().zip(phi).fold(0.0f64, |m, (a, b)| m.max((a - lambda * b).abs()));
    r / sup_norm(phi)
}

fn power_iteration(kernel: &SparseKernel, tol: f64, cap: usize) -> Result<(f64, Vec<f64>, f64, usize)> {
    let n = kernel.n();
    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let mut last = f64::INFINITY;
    for it in 1..=cap {
        kernel.apply(&v, &mut w);
        if it % 8 == 0 || it == cap {
            let lambda = dot(&v, &w) / dot(&v, &v);
            let res = w.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - lambda * b).abs()))
                / sup_norm(&v);
            last = res;
            if res <= tol {
                return Ok((lambda, v, res, it));
            }
        }
        // lazy step kills the period-two oscillation of the bipartite walk
        let mut m = 0.0f64;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = 0.5 * (*vi + wi);
            m = m.max(vi.abs());
        }
        v.iter_mut().for_each(|x| *x /= m);
    }
    Err(Error::NonConvergence { iterations: cap, residual: last })
}

fn orthonormalize(block: &mut [Vec<f64>]) {
    for _ in 0..2 {
        for k in 0..block.len() {
            let (done, rest) = block.split_at_mut(k);
            let v = &mut rest[0];
            for u in done.iter() {
                let c = dot(u, v);
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
            let norm = dot(v, v).sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|a| *a /= norm);
            }
        }
    }
}

/// Rayleigh-Ritz on the block; returns Ritz values in decreasing order and
/// replaces `x` and `px` by the rotated Ritz vectors and their images.
fn rayleigh_ritz(kernel: &SparseKernel, x: &mut Vec<Vec<f64>>, px: &mut Vec<Vec<f64>>) -> Vec<f64> {
    let k = x.len();
    let n = kernel.n();
    for (xi, pxi) in x.iter().zip(px.iter_mut()) {
        kernel.apply(xi, pxi);
    }
    let mut h = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = 0.5 * (dot(&x[i], &px[j]) + dot(&x[j], &px[i]));
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let rotate = |src: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        order
            .iter()
            .map(|&c| {
                let mut out = vec![0.0; n];
                for (r, s) in src.iter().enumerate() {
                    let coef = eig.eigenvectors[(r, c)];
                    out.iter_mut().zip(s).for_each(|(o, v)| *o += coef * v);
                }
                out
            })
            .collect()
    };
    *x = rotate(x);
    *px = rotate(px);
    order.iter().map(|&c| eig.eigenvalues[c]).collect()
}

/// Scaled Chebyshev filter: damps the spectrum of `P` in `[-1, cut]` and
/// amplifies it above, normalised at `top`.
fn chebyshev_filter(kernel: &SparseKernel, x: &mut [Vec<f64>], degree: usize, cut: f64, top: f64) {
    let center = 0.5 * (cut - 1.0);
    let half = 0.5 * (cut + 1.0);
    let t_top = (top - center) / half;
    let n = kernel.n();
    let mut py = vec![0.0; n];
    for v in x.iter_mut() {
        // y_prev = v, y = sigma1 * t(P) v
        let mut sigma = 1.0 / t_top;
        let mut prev = v.clone();
        kernel.apply(&prev, &mut py);
        let mut cur: Vec<f64> = py
            .iter()
            .zip(&prev)
            .map(|(p, y)| sigma * (p - center * y) / half)
            .collect();
        for _ in 1..degree {
            let sigma_next = 1.0 / (2.0 * t_top - sigma);
            kernel.apply(&cur, &mut py);
            for i in 0..n {
                let t = (py[i] - center * cur[i]) / half;
                prev[i] = 2.0 * sigma_next * t - sigma * sigma_next * prev[i];
            }
            std::mem::swap(&mut prev, &mut cur);
            sigma = sigma_next;
        }
        *v = cur;
    }
}

fn chebyshev_subspace(kernel: &SparseKernel, tol: f64, cap: usize) -> Result<(f64, Vec<f64>, f64, usize)> {
    let n = kernel.n();
    let mut rng = path_rng(0, 0);
    let mut x: Vec<Vec<f64>> = (0..BLOCK)
        .map(|k| {
            if k == 0 {
                vec![1.0; n]
            } else {
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
            }
        })
        .collect();
    let mut px = vec![vec![0.0; n]; BLOCK];
    let mut matvecs = 0usize;
    loop {
        orthonormalize(&mut x);
        let theta = rayleigh_ritz(kernel, &mut x, &mut px);
        matvecs += BLOCK;
        let lead = &x[0];
        let res = px[0]
            .iter()
            .zip(lead)
            .fold(0.0f64, |m, (a, b)| m.max((a - theta[0] * b).abs()))
            / sup_norm(lead);
        let last = res;
        if res <= tol {
            // recompute the Rayleigh quotient from the final vector
            let lambda = dot(lead, &px[0]) / dot(lead, lead);
            let res = residual(kernel, lambda, lead);
            if res <= tol {
                return Ok((lambda, x.swap_remove(0), res, matvecs));
            }
        }
        if matvecs >= cap {
            return Err(Error::NonConvergence { iterations: matvecs, residual: last });
        }
        let cut = theta[BLOCK - 1].max(-1.0 + 1e-3);
        if !(theta[0] > cut) {
            return Err(Error::NonConvergence { iterations: matvecs, residual: last });
        }
        chebyshev_filter(kernel, &mut x, FILTER_DEGREE, cut, theta[0]);
        matvecs += BLOCK * FILTER_DEGREE;
    }
}

/// Rescales `φ` by a positive constant to satisfy `mode`; `λ` is unchanged.
pub fn renormalize(pair: &EigenPair, mode: Normalization) -> EigenPair {
    let vol = pair.volume_factor();
    let current = match mode {
        Normalization::L2 => (pair.phi.sum_sq() / vol).sqrt(),
        Normalization::L1 => pair.phi.iter().map(|v| v.abs()).sum::<f64>() / vol,
        Normalization::Sup => pair.phi.max(),
        Normalization::Point => pair.phi[pair.origin_index],
    };
    let mut out = pair.clone();
    if mode != pair.normalization || current != 1.0 {
        out.phi.scale(1.0 / current);
    }
    if mode == Normalization::Sup {
        // exact maximum of one regardless of rounding in the division
        let (imax, _) = out
            .phi
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        out.phi[imax] = 1.0;
    }
    out.normalization = mode;
    out
}

/// Row of the eigenvalue-scaling table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingRow {
    pub scale: u32,
    pub lambda: f64,
    /// `N² (1 - λ_N)`
    pub scaled_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    pub min: f64,
    pub max: f64,
}

impl ScalingTable {
    /// `|N²(1-λ_N) - limit|` per row.
    pub fn errors(&self, limit: f64) -> Vec<f64> {
        self.rows.iter().map(|r| (r.scaled_gap - limit).abs()).collect()
    }
}

/// Tabulates `N²(1 - λ_N)`; its continuum limit is `μ₁ / (2d)`.
pub fn eigenvalue_scaling(pairs: &[(u32, EigenPair)]) -> Result<ScalingTable> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument("eigenvalue scaling needs at least two scales".into()));
    }
    let rows: Vec<ScalingRow> = pairs
        .iter()
        .map(|(n, p)| ScalingRow {
            scale: *n,
            lambda: p.lambda,
            scaled_gap: (*n as f64).powi(2) * (1.0 - p.lambda),
        })
        .collect();
    let min = rows.iter().map(|r| r.scaled_gap).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|r| r.scaled_gap).fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalingTable { rows, min, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, DomainSpec};
    use std::f64::consts::PI;

    fn box_pair(half: f64, solver: SolverKind) -> (LatticeDomain, SparseKernel, EigenPair) {
        let d = discretize(&DomainSpec::cube(2, half), 1).unwrap();
        let k = assemble(&d);
        let p = principal_eigenpair_with(
            &k,
            &d,
            &EigenOptions {
                solver,
                ..EigenOptions::default()
            },
        )
        .unwrap();
        (d, k, p)
    }

    #[test]
    fn single_site_kernel_is_zero() {
        let d = discretize(&DomainSpec::cube(2, 1.0), 1).unwrap();
        assert_eq!(d.len(), 1);
        let k = assemble(&d);
        assert_eq!(k.n(), 1);
        assert_eq!(k.nnz(), 0);
        let p = principal_eigenpair(&k, &d, 1e-12).unwrap();
        assert_eq!(p.lambda, 0.0);
        assert_eq!(p.phi[0], 1.0);
        // N = 3: φ(0) = N^{d/2}
        let d3 = discretize(&DomainSpec::cube(2, 0.3), 3).unwrap();
        assert_eq!(d3.len(), 1);
        let p3 = principal_eigenpair(&assemble(&d3), &d3, 1e-12).unwrap();
        assert!((p3.phi[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn box_rows() {
        let d = discretize(&DomainSpec::cube(2, 2.0), 1).unwrap();
        let k = assemble(&d);
        assert_eq!(k.n(), 9);
        let c = d.index_of(&[0, 0]).unwrap();
        assert_eq!(k.row(c).len(), 4);
        assert_eq!(k.row(d.index_of(&[1, 1]).unwrap()).len(), 2);
        assert!(k.entries().all(|(_, _, v)| v == 0.25));
        assert!((k.row_sum(c) - 1.0).abs() == 0.0);
    }

    #[test]
    fn box_3x3_eigenpair() {
        for solver in [SolverKind::Power, SolverKind::Chebyshev] {
            let (d, k, p) = box_pair(2.0, solver);
            assert!((p.lambda - (PI / 4.0).cos()).abs() < 1e-12, "{solver:?}");
            let s = |i: i32| (PI * (i + 2) as f64 / 4.0).sin();
            let mut expected: Vec<f64> = d.sites().map(|x| s(x[0]) * s(x[1])).collect();
            let norm = expected.iter().map(|v| v * v).sum::<f64>().sqrt();
            expected.iter_mut().for_each(|v| *v /= norm);
            assert!(p.phi.sup_distance(&ScalarField::new(expected)) < 1e-10);
            assert!(residual(&k, p.lambda, &p.phi) <= 1e-12);
        }
    }

    #[test]
    fn box_2x2_eigenvalue_is_half() {
        let spec = DomainSpec::cube(2, 1.0).with_center(vec![0.5, 0.5]);
        let d = discretize(&spec, 1).unwrap();
        assert_eq!(d.len(), 4);
        let p = principal_eigenpair(&assemble(&d), &d, 1e-12).unwrap();
        assert!((p.lambda - 0.5).abs() < 1e-13);
    }

    #[test]
    fn renormalize_modes() {
        let (_, _, p) = box_pair(3.0, SolverKind::Power);
        let again = renormalize(&p, Normalization::L2);
        assert!(again.phi.sup_distance(&p.phi) < 1e-15);
        let sup = renormalize(&p, Normalization::Sup);
        assert_eq!(sup.phi.max(), 1.0);
        let l1 = renormalize(&p, Normalization::L1);
        assert!((l1.phi.sum() / l1.volume_factor() - 1.0).abs() < 1e-14);
        let pt = renormalize(&p, Normalization::Point);
        assert!((pt.phi[pt.origin_index] - 1.0).abs() < 1e-15);
        assert_eq!(pt.lambda, p.lambda);
        assert_eq!("l2".parse::<Normalization>().unwrap(), Normalization::L2);
        assert!("l3".parse::<Normalization>().is_err());
    }

    #[test]
    fn nonconvergence_reports_residual() {
        let d = discretize(&DomainSpec::ball(2, 1.0), 16).unwrap();
        let k = assemble(&d);
        let err = principal_eigenpair_with(
            &k,
            &d,
            &EigenOptions {
                solver: SolverKind::Power,
                max_matvecs: Some(10),
                ..EigenOptions::default()
            },
        )
        .unwrap_err();
        match err {
            Error::NonConvergence { iterations, residual } => {
                assert_eq!(iterations, 10);
                assert!(residual > 1e-12);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn scaling_table_needs_two_scales() {
        let (_, _, p) = box_pair(2.0, SolverKind::Power);
        assert!(eigenvalue_scaling(&[(1, p.clone())]).is_err());
        let t = eigenvalue_scaling(&[(1, p.clone()), (1, p)]).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!((t.min - (1.0 - (PI / 4.0).cos())).abs() < 1e-12);
    }
}
