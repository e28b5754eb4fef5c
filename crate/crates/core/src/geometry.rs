//! Continuous domains and their lattice discretizations.
//!
//! A [`DomainSpec`] is an open bounded set `D ⊂ R^d` containing the origin.
//! [`discretize`] produces `D_N`, the connected component of `(N D) ∩ Z^d`
//! containing the origin, together with its outer vertex boundary `∂D_N`
//! and the graph distance from every site to `∂D_N`.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Shape of a continuous domain, with its size parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind {
    Ball { radius: f64 },
    Ellipse { semi_axes: Vec<f64> },
    Box { half_widths: Vec<f64> },
    AnnulusTest { inner: f64, outer: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub kind: DomainKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    pub dim: usize,
}

/// A domain spec plus the lattice scale, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    #[serde(flatten)]
    pub spec: DomainSpec,
    #[serde(rename = "N")]
    pub scale: u32,
}

impl DomainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: DomainConfig = serde_json::from_str(text)?;
        cfg.spec.validate()?;
        if cfg.scale < 1 {
            return Err(Error::spec("N", "scale must be at least 1"));
        }
        Ok(cfg)
    }
}

impl DomainSpec {
    pub fn ball(dim: usize, radius: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Ball { radius },
            center: None,
            dim,
        }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        DomainSpec {
            kind: DomainKind::Box {
                half_widths: vec![half_width; dim],
            },
            center: None,
            dim,
        }
    }

    pub fn boxed(half_widths: Vec<f64>) -> Self {
        DomainSpec {
            dim: half_widths.len(),
            kind: DomainKind::Box { half_widths },
            center: None,
        }
    }

    pub fn ellipse(semi_axes: Vec<f64>) -> Self {
        DomainSpec {
            dim: semi_axes.len(),
            kind: DomainKind::Ellipse { semi_axes },
            center: None,
        }
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Self {
        self.center = Some(center);
        self
    }

    pub fn center(&self) -> Vec<f64> {
        self.center.clone().unwrap_or_else(|| vec![0.0; self.dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::spec("dim", format!("dimension must be >= 2, got {}", self.dim)));
        }
        let positive = |field: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::spec(field, format!("must be positive and finite, got {v}")))
            }
        };
        match &self.kind {
            DomainKind::Ball { radius } => positive("radius", *radius)?,
            DomainKind::Ellipse { semi_axes } => {
                if semi_axes.len() != self.dim {
                    return Err(Error::spec("semi_axes", "length must equal dim"));
                }
                for &a in semi_axes {
                    positive("semi_axes", a)?;
                }
            }
            DomainKind::Box { half_widths } => {
                if half_widths.len() != self.dim {
                    return Err(Error::spec("half_widths", "length must equal dim"));
                }
                for &w in half_widths {
                    positive("half_widths", w)?;
                }
            }
            DomainKind::AnnulusTest { inner, outer } => {
                positive("inner", *inner)?;
                positive("outer", *outer)?;
                if outer <= inner {
                    return Err(Error::spec("outer", "must exceed inner"));
                }
            }
        }
        if let Some(c) = &self.center {
            if c.len() != self.dim {
                return Err(Error::spec("center", "length must equal dim"));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::spec("center", "must be finite"));
            }
        }
        if !self.contains(&vec![0.0; self.dim]) {
            return Err(Error::spec("center", "domain must contain the origin"));
        }
        Ok(())
    }

    /// Membership of a point of `R^d` in the open domain.
    pub fn contains(&self, point: &[f64]) -> bool {
        let c = self.center();
        let y: Vec<f64> = point.iter().zip(&c).map(|(p, c)| p - c).collect();
        self.contains_offset(&y, 1.0)
    }

    /// Membership of the lattice point `x` in `N D`, i.e. `x / N ∈ D`.
    ///
    /// Works in scaled coordinates so that boundaries on integer points are
    /// decided exactly.
    pub fn contains_scaled(&self, x: &[i32], scale: u32) -> bool {
        let n = scale as f64;
        let c = self.center();
        let y: Vec<f64> = x
            .iter()
            .zip(&c)
            .map(|(&xi, ci)| xi as f64 - n * ci)
            .collect();
        self.contains_offset(&y, n)
    }

    fn contains_offset(&self, y: &[f64], n: f64) -> bool {
        let norm_sq = || y.iter().map(|v| v * v).sum::<f64>();
        match &self.kind {
            DomainKind::Ball { radius } => norm_sq() < (n * radius).powi(2),
            DomainKind::Ellipse { semi_axes } => {
                y.iter()
                    .zip(semi_axes)
                    .map(|(v, a)| (v / (n * a)).powi(2))
                    .sum::<f64>()
                    < 1.0
            }
            DomainKind::Box { half_widths } => {
                y.iter().zip(half_widths).all(|(v, w)| v.abs() < n * w)
            }
            DomainKind::AnnulusTest { inner, outer } => {
                let r2 = norm_sq();
                r2 > (n * inner).powi(2) && r2 < (n * outer).powi(2)
            }
        }
    }

    /// Half-extent of the bounding box along each axis, around the center.
    pub fn extent(&self) -> Vec<f64> {
        match &self.kind {
            DomainKind::Ball { radius } => vec![*radius; self.dim],
            DomainKind::Ellipse { semi_axes } => semi_axes.clone(),
            DomainKind::Box { half_widths } => half_widths.clone(),
            DomainKind::AnnulusTest { outer, .. } => vec![*outer; self.dim],
        }
    }

    /// Radius of exterior balls touching every boundary point.
    ///
    /// Convex kinds admit exterior balls of any radius; the reported value is
    /// the largest half-extent. The annulus is limited by its hole.
    pub fn reach_lower_bound(&self) -> f64 {
        match &self.kind {
            DomainKind::AnnulusTest { inner, .. } => *inner,
            _ => self.extent().into_iter().fold(0.0, f64::max),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            DomainKind::Ball { radius } => 2.0 * radius,
            DomainKind::Ellipse { semi_axes } => 2.0 * semi_axes.iter().copied().fold(0.0, f64::max),
            DomainKind::Box { half_widths } => {
                2.0 * half_widths.iter().map(|w| w * w).sum::<f64>().sqrt()
            }
            DomainKind::AnnulusTest { outer, .. } => 2.0 * outer,
        }
    }

    /// Lebesgue volume of the domain.
    pub fn volume(&self) -> f64 {
        let unit = unit_ball_volume(self.dim);
        match &self.kind {
            DomainKind::Ball { radius } => unit * radius.powi(self.dim as i32),
            DomainKind::Ellipse { semi_axes } => unit * semi_axes.iter().product::<f64>(),
            DomainKind::Box { half_widths } => half_widths.iter().map(|w| 2.0 * w).product(),
            DomainKind::AnnulusTest { inner, outer } => {
                unit * (outer.powi(self.dim as i32) - inner.powi(self.dim as i32))
            }
        }
    }
}

/// Volume of the Euclidean unit ball in `R^d`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // V_d = 2 pi / d * V_{d-2}, V_0 = 1, V_1 = 2
    let mut v = if dim % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if dim % 2 == 0 { 2 } else { 3 };
    while k <= dim {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

/// Status of a lattice point relative to a [`LatticeDomain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Site(usize),
    Boundary(usize),
    Outside,
}

const OUTSIDE: u32 = u32::MAX;
const BOUNDARY_BIT: u32 = 1 << 31;
/// Neighbor-table entry for a neighbor that is not a site.
pub const NO_SITE: u32 = u32::MAX;

/// Dense lookup table over an axis-aligned integer window.
#[derive(Debug, Clone)]
struct Grid {
    lo: Vec<i32>,
    ext: Vec<i32>,
    strides: Vec<usize>,
    cells: Vec<u32>,
}

impl Grid {
    fn new(lo: Vec<i32>, hi: Vec<i32>) -> Self {
        let ext: Vec<i32> = lo.iter().zip(&hi).map(|(l, h)| h - l + 1).collect();
        let mut strides = vec![1usize; ext.len()];
        for i in (0..ext.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * ext[i + 1] as usize;
        }
        let total = strides[0] * ext[0] as usize;
        Grid {
            lo,
            ext,
            strides,
            cells: vec![OUTSIDE; total],
        }
    }

    fn len(&self) -> usize {
        self.cells.len()
    }

    fn offset(&self, x: &[i32]) -> Option<usize> {
        let mut off = 0usize;
        for i in 0..x.len() {
            let r = x[i] - self.lo[i];
            if r < 0 || r >= self.ext[i] {
                return None;
            }
            off += r as usize * self.strides[i];
        }
        Some(off)
    }

    fn point(&self, mut off: usize, out: &mut [i32]) {
        for i in 0..out.len() {
            out[i] = self.lo[i] + (off / self.strides[i]) as i32;
            off %= self.strides[i];
        }
    }

    /// Offset of the neighbor in direction `dir`, if inside the window.
    fn step(&self, off: usize, dir: usize) -> Option<usize> {
        let axis = dir / 2;
        let coord = (off / self.strides[axis]) % self.ext[axis] as usize;
        if dir % 2 == 0 {
            (coord > 0).then(|| off - self.strides[axis])
        } else {
            (coord + 1 < self.ext[axis] as usize).then(|| off + self.strides[axis])
        }
    }
}

/// A finite set of lattice sites with its outer vertex boundary.
///
/// Sites are stored in lexicographic order. Direction `k` of the neighbor
/// table is the unit vector `-e_{k/2}` for even `k` and `+e_{k/2}` for odd `k`.
#[derive(Debug, Clone)]
pub struct LatticeDomain {
    dim: usize,
    scale: u32,
    sites: Vec<i32>,
    boundary: Vec<i32>,
    neighbors: Vec<u32>,
    dist: Vec<u32>,
    grid: Grid,
}

impl LatticeDomain {
    /// Builds the set of lattice points inside `[lo, hi]` accepted by
    /// `inside`. With `seed`, only the nearest-neighbor component containing
    /// the seed is kept.
    pub fn from_predicate<F>(
        dim: usize,
        scale: u32,
        lo: &[i32],
        hi: &[i32],
        seed: Option<&[i32]>,
        inside: F,
    ) -> Result<Self>
    where
        F: Fn(&[i32]) -> bool,
    {
        assert_eq!(lo.len(), dim);
        assert_eq!(hi.len(), dim);
        // one layer of margin so every boundary point fits in the window
        let glo: Vec<i32> = lo.iter().map(|v| v - 1).collect();
        let ghi: Vec<i32> = hi.iter().map(|v| v + 1).collect();
        let mut grid = Grid::new(glo, ghi);
        let mut mask = vec![false; grid.len()];
        let mut p = vec![0i32; dim];
        for (off, m) in mask.iter_mut().enumerate() {
            grid.point(off, &mut p);
            let in_window = p.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| v >= l && v <= h);
            *m = in_window && inside(&p);
        }

        if let Some(seed) = seed {
            let start = grid.offset(seed).filter(|&o| mask[o]).ok_or(Error::EmptyDomain)?;
            let mut keep = vec![false; grid.len()];
            keep[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(off) = queue.pop_front() {
                for dir in 0..2 * dim {
                    if let Some(nb) = grid.step(off, dir) {
                        if mask[nb] && !keep[nb] {
                            keep[nb] = true;
                            queue.push_back(nb);
                        }
                    }
                }
            }
            mask = keep;
        }

        let mut sites = Vec::new();
        let mut n = 0u32;
        for off in 0..grid.len() {
            if mask[off] {
                grid.cells[off] = n;
                n += 1;
                grid.point(off, &mut p);
                sites.extend_from_slice(&p);
            }
        }
        if n == 0 {
            return Err(Error::EmptyDomain);
        }

        let mut boundary = Vec::new();
        let mut nb_count = 0u32;
        for off in 0..grid.len() {
            if mask[off] {
                continue;
            }
            let touches = (0..2 * dim).any(|dir| grid.step(off, dir).is_some_and(|nb| mask[nb]));
            if touches {
                grid.cells[off] = BOUNDARY_BIT | nb_count;
                nb_count += 1;
                grid.point(off, &mut p);
                boundary.extend_from_slice(&p);
            }
        }

        let n = n as usize;
        let mut site_offsets = Vec::with_capacity(n);
        let mut neighbors = vec![NO_SITE; n * 2 * dim];
        for off in 0..grid.len() {
            if mask[off] {
                let i = site_offsets.len();
                site_offsets.push(off);
                for dir in 0..2 * dim {
                    if let Some(nb) = grid.step(off, dir) {
                        if mask[nb] {
                            neighbors[i * 2 * dim + dir] = grid.cells[nb];
                        }
                    }
                }
            }
        }

        // multi-source BFS from the boundary through the sites
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        for (i, &off) in site_offsets.iter().enumerate() {
            let on_edge = (0..2 * dim).any(|dir| neighbors[i * 2 * dim + dir] == NO_SITE)
                || (0..2 * dim).any(|dir| grid.step(off, dir).is_none());
            if on_edge {
                dist[i] = 1;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for dir in 0..2 * dim {
                let j = neighbors[i * 2 * dim + dir];
                if j != NO_SITE && dist[j as usize] == u32::MAX {
                    dist[j as usize] = dist[i] + 1;
                    queue.push_back(j as usize);
                }
            }
        }

        Ok(LatticeDomain {
            dim,
            scale,
            sites,
            boundary,
            neighbors,
            dist,
            grid,
        })
    }

    /// Sub-region of the sites accepted by `keep`, with its own boundary.
    /// The result need not be connected.
    pub fn restrict<F>(&self, keep: F) -> Result<LatticeDomain>
    where
        F: Fn(&[i32]) -> bool,
    {
        let (lo, hi) = self.bounds();
        LatticeDomain::from_predicate(self.dim, self.scale, &lo, &hi, None, |x| {
            self.index_of(x).is_some() && keep(x)
        })
    }

    /// Coordinate-wise min and max over the sites.
    pub fn bounds(&self) -> (Vec<i32>, Vec<i32>) {
        let mut lo = vec![i32::MAX; self.dim];
        let mut hi = vec![i32::MIN; self.dim];
        for s in self.sites() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(s[k]);
                hi[k] = hi[k].max(s[k]);
            }
        }
        (lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The scale `N` the domain was discretized at.
    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// `N^d`, the volume factor of the discrete L2 and L1 norms.
    pub fn volume_factor(&self) -> f64 {
        (self.scale as f64).powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.sites.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, i: usize) -> &[i32] {
        &self.sites[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sites(&self) -> impl Iterator<Item = &[i32]> + '_ {
        self.sites.chunks_exact(self.dim)
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary.len() / self.dim
    }

    pub fn boundary_point(&self, i: usize) -> &[i32] {
        &self.boundary[i * self.dim..(i + 1) * self.dim]
    }

    pub fn boundary(&self) -> impl Iterator<Item = &[i32]> + '_ {
        self.boundary.chunks_exact(self.dim)
    }

    pub fn cell(&self, x: &[i32]) -> Cell {
        match self.grid.offset(x).map(|o| self.grid.cells[o]) {
            None | Some(OUTSIDE) => Cell::Outside,
            Some(c) if c & BOUNDARY_BIT != 0 => Cell::Boundary((c & !BOUNDARY_BIT) as usize),
            Some(c) => Cell::Site(c as usize),
        }
    }

    pub fn index_of(&self, x: &[i32]) -> Option<usize> {
        match self.cell(x) {
            Cell::Site(i) => Some(i),
            _ => None,
        }
    }

    /// Neighbor of site `i` in direction `dir`, if that neighbor is a site.
    #[inline]
    pub fn neighbor(&self, i: usize, dir: usize) -> Option<usize> {
        let j = self.neighbors[i * 2 * self.dim + dir];
        (j != NO_SITE).then_some(j as usize)
    }

    /// Raw neighbor row of site `i`, `NO_SITE` marking non-sites.
    #[inline]
    pub fn neighbor_row(&self, i: usize) -> &[u32] {
        &self.neighbors[i * 2 * self.dim..(i + 1) * 2 * self.dim]
    }

    /// Number of nearest neighbors of site `i` that are sites.
    pub fn interior_degree(&self, i: usize) -> usize {
        self.neighbor_row(i).iter().filter(|&&j| j != NO_SITE).count()
    }

    /// Graph distance from site `i` to the boundary.
    pub fn dist_to_boundary(&self, i: usize) -> u32 {
        self.dist[i]
    }

    pub fn max_dist(&self) -> u32 {
        self.dist.iter().copied().max().unwrap_or(0)
    }

    /// Site closest to the origin in Euclidean norm (first in site order on ties).
    pub fn origin_index(&self) -> usize {
        let mut best = (i64::MAX, 0);
        for (i, s) in self.sites().enumerate() {
            let r2: i64 = s.iter().map(|&v| (v as i64) * (v as i64)).sum();
            if r2 < best.0 {
                best = (r2, i);
            }
        }
        best.1
    }

    /// Point obtained from site `i` by a unit step in direction `dir`.
    pub fn shifted(&self, i: usize, dir: usize) -> Vec<i32> {
        let mut p = self.site(i).to_vec();
        p[dir / 2] += if dir % 2 == 0 { -1 } else { 1 };
        p
    }

    /// CSV rows `x1,...,xd,is_boundary,dist`; boundary points carry dist 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        let _ = writeln!(out, "{},is_boundary,dist", header.join(","));
        for (i, s) in self.sites().enumerate() {
            let _ = writeln!(out, "{},0,{}", join_point(s), self.dist[i]);
        }
        for b in self.boundary() {
            let _ = writeln!(out, "{},1,0", join_point(b));
        }
        out
    }
}

pub(crate) fn join_point(p: &[i32]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Discretizes `spec` at scale `N`: the origin component of `(N D) ∩ Z^d`.
pub fn discretize(spec: &DomainSpec, scale: u32) -> Result<LatticeDomain> {
    spec.validate()?;
    if scale < 1 {
        return Err(Error::spec("N", "scale must be at least 1"));
    }
    let n = scale as f64;
    let c = spec.center();
    let ext = spec.extent();
    let lo: Vec<i32> = c.iter().zip(&ext).map(|(c, e)| (n * (c - e)).floor() as i32).collect();
    let hi: Vec<i32> = c.iter().zip(&ext).map(|(c, e)| (n * (c + e)).ceil() as i32).collect();
    let origin = vec![0i32; spec.dim];
    LatticeDomain::from_predicate(spec.dim, scale, &lo, &hi, Some(&origin), |x| {
        spec.contains_scaled(x, scale)
    })
}

/// Per-site graph distance to the boundary, as a field.
pub fn distance_field(domain: &LatticeDomain) -> ScalarField {
    ScalarField::new((0..domain.len()).map(|i| domain.dist_to_boundary(i) as f64).collect())
}

/// Euclidean lattice ball `{x : |x - center| < radius}` as a region.
pub fn lattice_ball(dim: usize, radius: f64, center: &[i32]) -> Result<LatticeDomain> {
    let r = radius.ceil() as i32;
    let lo: Vec<i32> = center.iter().map(|c| c - r).collect();
    let hi: Vec<i32> = center.iter().map(|c| c + r).collect();
    let r2 = radius * radius;
    LatticeDomain::from_predicate(dim, 1, &lo, &hi, None, |x| {
        let d2: f64 = x.iter().zip(center).map(|(a, b)| ((a - b) as f64).powi(2)).sum();
        d2 < r2
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box3() -> LatticeDomain {
        discretize(&DomainSpec::cube(2, 2.0), 1).unwrap()
    }

    #[test]
    fn box_sites_are_the_3x3_block() {
        let d = box3();
        assert_eq!(d.len(), 9);
        let pts: Vec<Vec<i32>> = d.sites().map(|s| s.to_vec()).collect();
        let mut expected = Vec::new();
        for a in -1..=1 {
            for b in -1..=1 {
                expected.push(vec![a, b]);
            }
        }
        assert_eq!(pts, expected);
    }

    #[test]
    fn box_boundary_has_twelve_points() {
        let d = box3();
        // brute force over a window of Z^2
        let mut count = 0;
        for a in -4..=4 {
            for b in -4..=4 {
                let p = [a, b];
                if d.index_of(&p).is_some() {
                    continue;
                }
                let near = [[a - 1, b], [a + 1, b], [a, b - 1], [a, b + 1]]
                    .iter()
                    .any(|q| d.index_of(q).is_some());
                if near {
                    count += 1;
                    assert!(matches!(d.cell(&p), Cell::Boundary(_)));
                }
            }
        }
        assert_eq!(count, 12);
        assert_eq!(d.boundary_len(), 12);
    }

    #[test]
    fn box_distances() {
        let d = box3();
        assert_eq!(d.dist_to_boundary(d.index_of(&[0, 0]).unwrap()), 2);
        assert_eq!(d.dist_to_boundary(d.index_of(&[1, 1]).unwrap()), 1);
        assert_eq!(d.dist_to_boundary(d.index_of(&[0, 1]).unwrap()), 1);
    }

    #[test]
    fn small_ball_has_nine_sites() {
        let d = discretize(&DomainSpec::ball(2, 1.0), 2).unwrap();
        assert_eq!(d.len(), 9);
        assert!(d.index_of(&[1, 1]).is_some());
        assert!(d.index_of(&[2, 0]).is_none());
    }

    #[test]
    fn origin_missing_is_rejected() {
        // an annulus centered at the origin does not contain it
        let spec = DomainSpec {
            kind: DomainKind::AnnulusTest { inner: 0.5, outer: 1.0 },
            center: None,
            dim: 2,
        };
        assert!(matches!(spec.validate(), Err(Error::InvalidSpec { .. })));
        let shifted = spec.with_center(vec![0.75, 0.0]);
        let d = discretize(&shifted, 16).unwrap();
        assert!(d.index_of(&[0, 0]).is_some());
        assert!(d.index_of(&[12, 0]).is_none());
    }

    #[test]
    fn thin_ring_keeps_only_the_origin_component() {
        let spec = DomainSpec {
            kind: DomainKind::AnnulusTest { inner: 0.9, outer: 1.0 },
            center: Some(vec![0.95, 0.0]),
            dim: 2,
        };
        let d = discretize(&spec, 4).unwrap();
        let mut all = 0;
        for a in -10..=10 {
            for b in -10..=10 {
                if spec.contains_scaled(&[a, b], 4) {
                    all += 1;
                }
            }
        }
        assert!(d.len() < all, "kept {} of {}", d.len(), all);
        // kept set is connected: every site reachable from the origin site
        let mut seen = vec![false; d.len()];
        let mut stack = vec![d.index_of(&[0, 0]).unwrap()];
        seen[stack[0]] = true;
        while let Some(i) = stack.pop() {
            for dir in 0..4 {
                if let Some(j) = d.neighbor(i, dir) {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn negative_radius_names_the_field() {
        let err = DomainConfig::from_json(r#"{"kind":"ball","radius":-1.0,"dim":2,"N":8}"#)
            .unwrap_err();
        assert!(err.to_string().contains("radius"), "{err}");
    }

    #[test]
    fn config_round_trip() {
        let cfg = DomainConfig::from_json(r#"{"kind": "ball", "radius": 1.0, "dim": 2, "N": 128}"#)
            .unwrap();
        assert_eq!(cfg.scale, 128);
        assert_eq!(cfg.spec, DomainSpec::ball(2, 1.0));
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(DomainConfig::from_json(&text).unwrap(), cfg);
        let b = DomainConfig::from_json(
            r#"{"kind":"box","half_widths":[0.5,0.5],"center":[0.1,0.0],"dim":2,"N":8}"#,
        )
        .unwrap();
        assert_eq!(b.spec.center, Some(vec![0.1, 0.0]));
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn csv_export_rows() {
        let d = box3();
        let csv = d.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x1,x2,is_boundary,dist");
        assert_eq!(lines.len(), 1 + 9 + 12);
        assert!(lines.contains(&"0,0,0,2"));
        assert!(lines.contains(&"2,0,1,0"));
    }
}
