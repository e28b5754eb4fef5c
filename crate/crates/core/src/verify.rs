//! Empirical constants of the eigenfunction bounds, and comparison of `φ_N`
//! against closed-form continuum eigenfunctions (product of sines on boxes,
//! Bessel `J_0` on planar discs).
//!
//! The paper's constants are not explicit, so every bound is turned into a
//! number per scale; uniformity is then judged by cross-scale stability.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{discretize, DomainKind, DomainSpec, LatticeDomain};
use crate::linalg::log_log_slope;
use crate::rng::path_rng;
use crate::spectral::{assemble, principal_eigenpair_with, EigenOptions, EigenPair, Normalization};

/// First positive zero of `J_0`, kept as a regression value for [`j01`].
pub const J01_REGRESSION: f64 = 2.404_825_557_695_773;
/// Number of random pairs in the pair statistics.
pub const PAIR_SAMPLES: usize = 100_000;
const PAIR_SEED: u64 = 0x5eed_0f_1a77;

fn bessel_series(x: f64, order: u32) -> f64 {
    // J_n(x) = Σ_k (-1)^k (x/2)^{2k+n} / (k! (k+n)!)
    let h = 0.5 * x;
    let mut term = h.powi(order as i32) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = term;
    let q = -h * h;
    for k in 1..200u32 {
        term *= q / (k as f64 * (k + order) as f64);
        sum += term;
        // alternating tail bounded by the first omitted term once terms shrink
        if k as f64 > h && term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Bessel `J_0` by its power series; accurate to ~1e-15 on `[0, 3]`.
pub fn bessel_j0(x: f64) -> f64 {
    bessel_series(x, 0)
}

/// Bessel `J_1` by its power series.
pub fn bessel_j1(x: f64) -> f64 {
    bessel_series(x, 1)
}

/// First zero of `J_0`: bisection on `[2, 3]`, then Newton with `J_0' = -J_1`.
pub fn j01() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        let (mut a, mut b) = (2.0, 3.0);
        for _ in 0..30 {
            let m = 0.5 * (a + b);
            if bessel_j0(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..8 {
            let dx = bessel_j0(x) / bessel_j1(x);
            x += dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        x
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    BoxProductOfSines,
    BallBessel,
}

/// Principal `L²(D)`-normalized Dirichlet eigenfunction of a box or disc.
#[derive(Debug, Clone)]
pub struct ReferenceEigenfunction {
    pub kind: ReferenceKind,
    /// Principal eigenvalue `μ_1` of `-Δ` on `D`.
    pub mu1: f64,
    center: Vec<f64>,
    // box: full widths; ball: [radius]
    sizes: Vec<f64>,
    amplitude: f64,
}

impl ReferenceEigenfunction {
    pub fn new(spec: &DomainSpec) -> Result<Self> {
        spec.validate()?;
        let center = spec.center();
        match &spec.kind {
            DomainKind::Box { half_widths } => {
                let w: Vec<f64> = half_widths.iter().map(|h| 2.0 * h).collect();
                Ok(ReferenceEigenfunction {
                    kind: ReferenceKind::BoxProductOfSines,
                    mu1: PI * PI * w.iter().map(|wi| wi.powi(-2)).sum::<f64>(),
                    amplitude: w.iter().map(|wi| (2.0 / wi).sqrt()).product(),
                    center,
                    sizes: w,
                })
            }
            DomainKind::Ball { radius } if spec.dim == 2 => {
                let j = j01();
                Ok(ReferenceEigenfunction {
                    kind: ReferenceKind::BallBessel,
                    mu1: (j / radius).powi(2),
                    amplitude: 1.0 / (PI.sqrt() * radius * bessel_j1(j).abs()),
                    center,
                    sizes: vec![*radius],
                })
            }
            DomainKind::Ball { .. } => Err(Error::Unsupported(format!(
                "closed-form ball reference only in d = 2, got d = {}",
                spec.dim
            ))),
            other => Err(Error::Unsupported(format!("no closed-form reference for {other:?}"))),
        }
    }

    /// `φ_1(y)` for `y ∈ R^d`; zero outside `D`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self.kind {
            ReferenceKind::BoxProductOfSines => {
                let mut v = self.amplitude;
                for ((yi, ci), wi) in y.iter().zip(&self.center).zip(&self.sizes) {
                    let t = (yi - ci + 0.5 * wi) / wi;
                    if !(0.0..=1.0).contains(&t) {
                        return 0.0;
                    }
                    v *= (PI * t).sin();
                }
                v
            }
            ReferenceKind::BallBessel => {
                let rho = self.sizes[0];
                let r = y.iter().zip(&self.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                if r >= rho {
                    return 0.0;
                }
                self.amplitude * bessel_j0(j01() * r / rho)
            }
        }
    }

    /// `x ↦ φ_1(x/N)` on the sites of `domain`.
    pub fn sample(&self, domain: &LatticeDomain) -> ScalarField {
        let n = domain.scale() as f64;
        let mut y = vec![0.0; domain.dim()];
        domain
            .sites()
            .map(|x| {
                for (yi, &xi) in y.iter_mut().zip(x) {
                    *yi = xi as f64 / n;
                }
                self.eval(&y)
            })
            .collect::<Vec<_>>()
            .into()
    }
}

/// The reference eigenfunction of `spec` sampled on `D_N`.
pub fn reference(spec: &DomainSpec, scale: u32) -> Result<ScalarField> {
    let r = ReferenceEigenfunction::new(spec)?;
    Ok(r.sample(&discretize(spec, scale)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryConstant {
    /// `max_x φ(x) N / d(x, ∂D_N)`
    pub value: f64,
    pub argmax: Vec<i32>,
}

/// Empirical constant of `φ(x) <= C d(x, ∂D_N) / N`.
pub fn boundary_constant(pair: &EigenPair, domain: &LatticeDomain) -> BoundaryConstant {
    let n = domain.scale() as f64;
    let (i, value) = pair
        .phi
        .iter()
        .enumerate()
        .map(|(i, &p)| (i, p * n / domain.dist_to_boundary(i) as f64))
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    BoundaryConstant {
        value,
        argmax: domain.site(i).to_vec(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// `max N |φ(x) - φ(y)|` over lattice edges, `φ = 0` on `∂D_N`.
    pub edge: f64,
    pub argmax_edge: (Vec<i32>, Vec<i32>),
    /// `max N |φ(x) - φ(y)| / |x - y|_1` over sampled site pairs.
    pub pairs: f64,
    pub pairs_sampled: usize,
    /// Lattice symmetries of `D_N` among the signed coordinate permutations.
    pub group_order: usize,
    /// Size of the orbit of the arg-max edge under those symmetries.
    pub orbit_size: usize,
    /// Spread of the edge statistic across the orbit.
    pub orbit_spread: f64,
}

/// Empirical constant of `|φ(x) - φ(y)| <= C d(x, y) / N`.
///
/// Both statistics extend `φ` by zero off `D_N`, so every monotone lattice
/// path telescopes into edges counted by the edge statistic, and the pair
/// statistic can never exceed it.
pub fn lipschitz_constant(pair: &EigenPair, domain: &LatticeDomain) -> LipschitzReport {
    let n = domain.scale() as f64;
    let dim = domain.dim();
    let phi = &pair.phi;
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for i in 0..domain.len() {
        for dir in 0..2 * dim {
            let other = domain.neighbor(i, dir).map_or(0.0, |j| phi[j]);
            let v = (phi[i] - other).abs();
            if v > best.0 {
                best = (v, i, dir);
            }
        }
    }
    let edge = n * best.0;
    let from = domain.site(best.1).to_vec();
    let to = domain.shifted(best.1, best.2);

    let mut rng = path_rng(PAIR_SEED, 0);
    let mut pairs = 0.0f64;
    let len = domain.len();
    let mut sampled = 0;
    if len > 1 {
        for _ in 0..PAIR_SAMPLES {
            let a = rng.gen_range(0..len);
            let b = rng.gen_range(0..len);
            if a == b {
                continue;
            }
            let d: u32 = domain
                .site(a)
                .iter()
                .zip(domain.site(b))
                .map(|(x, y)| (x - y).unsigned_abs())
                .sum();
            pairs = pairs.max(n * (phi[a] - phi[b]).abs() / d as f64);
            sampled += 1;
        }
    }

    let group = symmetry_group(domain);
    let value_at = |p: &[i32]| match domain.index_of(p) {
        Some(i) => phi[i],
        None => 0.0,
    };
    let mut orbit = BTreeSet::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for g in &group {
        let a = g.apply(&from);
        let b = g.apply(&to);
        let v = n * (value_at(&a) - value_at(&b)).abs();
        lo = lo.min(v);
        hi = hi.max(v);
        orbit.insert(if a < b { (a, b) } else { (b, a) });
    }
    LipschitzReport {
        edge,
        argmax_edge: (from, to),
        pairs,
        pairs_sampled: sampled,
        group_order: group.len(),
        orbit_size: orbit.len(),
        orbit_spread: hi - lo,
    }
}

/// `x ↦ c + σ(x - c)` for a signed permutation `σ`, with `2c` integral.
#[derive(Debug, Clone)]
struct Symmetry {
    perm: Vec<usize>,
    signs: Vec<i32>,
    twice_center: Vec<i32>,
}

impl Symmetry {
    fn apply(&self, x: &[i32]) -> Vec<i32> {
        (0..x.len())
            .map(|k| {
                let src = self.perm[k];
                let twice = self.twice_center[k] + self.signs[k] * (2 * x[src] - self.twice_center[src]);
                twice / 2
            })
            .collect()
    }
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

/// Signed permutations about the bounding-box center that map `D_N` onto
/// itself.
fn symmetry_group(domain: &LatticeDomain) -> Vec<Symmetry> {
    let dim = domain.dim();
    let (lo, hi) = domain.bounds();
    let twice_center: Vec<i32> = lo.iter().zip(&hi).map(|(a, b)| a + b).collect();
    let mut group = Vec::new();
    for perm in permutations(dim) {
        for mask in 0..(1u32 << dim) {
            let signs: Vec<i32> = (0..dim).map(|k| if mask >> k & 1 == 1 { -1 } else { 1 }).collect();
            let g = Symmetry {
                perm: perm.clone(),
                signs,
                twice_center: twice_center.clone(),
            };
            // parity of 2x - 2c must be preserved for the image to be integral
            let integral = (0..dim).all(|k| (twice_center[k] - twice_center[g.perm[k]]) % 2 == 0);
            if integral && domain.sites().all(|x| domain.index_of(&g.apply(x)).is_some()) {
                group.push(g);
            }
        }
    }
    group
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupL2 {
    pub sup_error: f64,
    /// `((1/N^d) Σ (φ_N - φ_1(·/N))²)^{1/2}`
    pub l2_error: f64,
    /// `sup / L2^{2/(d+2)}`; `None` when both errors vanish.
    pub ratio: Option<f64>,
    /// `sup / L2^{1/(d+1)}`
    pub ratio_alt: Option<f64>,
    /// `sup / L2`
    pub ratio_plain: Option<f64>,
}

/// Sup and discrete-`L²` distances between `φ_N` and a sampled reference.
pub fn supnorm_vs_l2(pair: &EigenPair, reference: &ScalarField) -> Result<SupL2> {
    if pair.phi.len() != reference.len() {
        return Err(Error::InvalidArgument(format!(
            "field lengths differ: {} vs {}",
            pair.phi.len(),
            reference.len()
        )));
    }
    let sup = pair.phi.sup_distance(reference);
    let l2 = (pair.phi.iter().zip(reference.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        / pair.volume_factor())
    .sqrt();
    let d = pair.dim as f64;
    let ratio = |p: f64| if sup == 0.0 && l2 == 0.0 { None } else { Some(sup / l2.powf(p)) };
    Ok(SupL2 {
        sup_error: sup,
        l2_error: l2,
        ratio: ratio(2.0 / (d + 2.0)),
        ratio_alt: ratio(1.0 / (d + 1.0)),
        ratio_plain: ratio(1.0),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BulkReport {
    pub eta: f64,
    /// Sites of `D_N^η = {x : d(x, ∂D_N) > ηN}`.
    pub bulk_sites: usize,
    /// Smallest `c` with `|ln φ(x) - ln φ(y)| <= c d(x,y)/N` on the sample.
    pub c_eta: f64,
    pub pairs_sampled: usize,
    pub bulk_min: f64,
    pub bulk_max: f64,
    /// `max |φ_N / φ_1(·/N) - 1|` over the bulk, when a reference is given.
    pub reference_deviation: Option<f64>,
}

/// Two-sided exponential ratio bounds on the bulk `D_N^η`.
pub fn bulk_ratio_check(
    pair: &EigenPair,
    domain: &LatticeDomain,
    eta: f64,
    reference: Option<&ScalarField>,
) -> Result<BulkReport> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let n = domain.scale() as f64;
    let bulk: Vec<usize> = (0..domain.len())
        .filter(|&i| domain.dist_to_boundary(i) as f64 > eta * n)
        .collect();
    if bulk.is_empty() {
        return Err(Error::EmptyBulk { eta });
    }
    let phi = &pair.phi;
    let mut rng = path_rng(PAIR_SEED, 1);
    let mut c_eta = 0.0f64;
    let mut sampled = 0;
    if bulk.len() > 1 {
        for _ in 0..PAIR_SAMPLES {
            let a = bulk[rng.gen_range(0..bulk.len())];
            let b = bulk[rng.gen_range(0..bulk.len())];
            if a == b {
                continue;
            }
            let d: u32 = domain
                .site(a)
                .iter()
                .zip(domain.site(b))
                .map(|(x, y)| (x - y).unsigned_abs())
                .sum();
            c_eta = c_eta.max(n * (phi[a].ln() - phi[b].ln()).abs() / d as f64);
            sampled += 1;
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in &bulk {
        lo = lo.min(phi[i]);
        hi = hi.max(phi[i]);
    }
    let reference_deviation = reference.map(|r| bulk.iter().map(|&i| (phi[i] / r[i] - 1.0).abs()).fold(0.0, f64::max));
    Ok(BulkReport {
        eta,
        bulk_sites: bulk.len(),
        c_eta,
        pairs_sampled: sampled,
        bulk_min: lo,
        bulk_max: hi,
        reference_deviation,
    })
}

/// One scale of a convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundRow {
    pub scale: u32,
    pub sites: usize,
    pub lambda: f64,
    /// `|2d N² (1 - λ_N) - μ_1|`
    pub continuum_gap: f64,
    pub c_boundary: f64,
    pub c_lipschitz: f64,
    pub c_lipschitz_pairs: f64,
    pub supnorm_error: f64,
    pub l2_error: f64,
    /// Sup distance after normalizing both fields to unit discrete `L²` norm.
    pub shape_error: f64,
    pub ratio_exponent_check: Option<f64>,
    pub ratio_alt: Option<f64>,
    pub ratio_plain: Option<f64>,
    pub bulk: Option<BulkReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub kind: ReferenceKind,
    pub mu1: f64,
    pub rows: Vec<BoundRow>,
    /// Least-squares `-d log(error) / d log N`.
    pub eigenvalue_rate: f64,
    pub supnorm_rate: f64,
    pub l2_rate: f64,
}

#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub tol: f64,
    /// Bulk depth for the ratio bounds; `None` skips them.
    pub eta: Option<f64>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions { tol: 1e-12, eta: Some(0.25) }
    }
}

/// Solves each scale and tabulates the bound constants and reference errors.
pub fn convergence_study(spec: &DomainSpec, scales: &[u32], opts: &StudyOptions) -> Result<ConvergenceStudy> {
    if scales.len() < 2 {
        return Err(Error::InvalidArgument("need at least two scales".into()));
    }
    ReferenceEigenfunction::new(spec)?;
    let eig = EigenOptions {
        tol: opts.tol,
        normalization: Normalization::L2,
        ..EigenOptions::default()
    };
    let solved: Vec<(LatticeDomain, EigenPair)> = scales
        .par_iter()
        .map(|&n| {
            let domain = discretize(spec, n)?;
            let pair = principal_eigenpair_with(&assemble(&domain), &domain, &eig)?;
            Ok((domain, pair))
        })
        .collect::<Result<_>>()?;
    study_from_pairs(spec, &solved, opts.eta)
}

/// As [`convergence_study`], on already solved L²-normalized pairs.
pub fn study_from_pairs(
    spec: &DomainSpec,
    solved: &[(LatticeDomain, EigenPair)],
    eta: Option<f64>,
) -> Result<ConvergenceStudy> {
    let reference = ReferenceEigenfunction::new(spec)?;
    let mut rows = Vec::with_capacity(solved.len());
    for (domain, pair) in solved {
        if pair.normalization != Normalization::L2 {
            return Err(Error::InvalidArgument("study expects L2-normalized pairs".into()));
        }
        let n = domain.scale() as f64;
        let sampled = reference.sample(domain);
        let errs = supnorm_vs_l2(pair, &sampled)?;
        let lip = lipschitz_constant(pair, domain);
        let unit = |f: &ScalarField| {
            let norm = f.sum_sq().sqrt();
            f.iter().map(|v| v / norm).collect::<Vec<_>>()
        };
        let shape_error = unit(&pair.phi)
            .iter()
            .zip(unit(&sampled))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            * (pair.volume_factor()).sqrt();
        let bulk = match eta {
            Some(e) => match bulk_ratio_check(pair, domain, e, Some(&sampled)) {
                Ok(b) => Some(b),
                Err(Error::EmptyBulk { .. }) => None,
                Err(e) => return Err(e),
            },
            None => None,
        };
        rows.push(BoundRow {
            scale: domain.scale(),
            sites: domain.len(),
            lambda: pair.lambda,
            continuum_gap: (2.0 * pair.dim as f64 * n * n * (1.0 - pair.lambda) - reference.mu1).abs(),
            c_boundary: boundary_constant(pair, domain).value,
            c_lipschitz: lip.edge,
            c_lipschitz_pairs: lip.pairs,
            supnorm_error: errs.sup_error,
            l2_error: errs.l2_error,
            shape_error,
            ratio_exponent_check: errs.ratio,
            ratio_alt: errs.ratio_alt,
            ratio_plain: errs.ratio_plain,
            bulk,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.scale as f64).collect();
    let rate = |f: &dyn Fn(&BoundRow) -> f64| -> f64 {
        let ys: Vec<f64> = rows.iter().map(f).collect();
        -log_log_slope(&ns, &ys)
    };
    Ok(ConvergenceStudy {
        kind: reference.kind,
        mu1: reference.mu1,
        eigenvalue_rate: rate(&|r| r.continuum_gap),
        supnorm_rate: rate(&|r| r.supnorm_error),
        l2_rate: rate(&|r| r.l2_error),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::renormalize;

    fn solve(spec: &DomainSpec, n: u32) -> (LatticeDomain, EigenPair) {
        let d = discretize(spec, n).unwrap();
        let p = principal_eigenpair_with(&assemble(&d), &d, &EigenOptions::default()).unwrap();
        (d, p)
    }

    // J_0(x) = (1/π) ∫_0^π cos(x sin θ) dθ, by composite Simpson
    fn j0_integral(x: f64) -> f64 {
        let m = 2000;
        let h = PI / m as f64;
        let f = |t: f64| (x * t.sin()).cos();
        let mut s = f(0.0) + f(PI);
        for k in 1..m {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        s * h / 3.0 / PI
    }

    #[test]
    fn bessel_series_matches_integral() {
        for x in [0.0, 0.3, 1.0, 1.7, 2.2, 2.4048] {
            assert!((bessel_j0(x) - j0_integral(x)).abs() < 1e-13, "x = {x}");
        }
        assert!((bessel_j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
    }

    #[test]
    fn first_zero_regression() {
        assert!((j01() - J01_REGRESSION).abs() < 1e-13);
        assert!(bessel_j0(j01()).abs() < 1e-15);
    }

    #[test]
    fn disc_reference_is_normalized() {
        // ∫ φ² = 2π ∫_0^1 φ(r)² r dr
        let r = ReferenceEigenfunction::new(&DomainSpec::ball(2, 1.0)).unwrap();
        let m = 4000;
        let h = 1.0 / m as f64;
        let f = |t: f64| r.eval(&[t, 0.0]).powi(2) * t;
        let mut s = f(0.0) + f(1.0);
        for k in 1..m {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        assert!((2.0 * PI * s * h / 3.0 - 1.0).abs() < 1e-8);
        assert!((r.eval(&[0.0, 0.0]) - 1.086_761_636_131_272).abs() < 1e-12);
        assert!((r.mu1 - J01_REGRESSION.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn box_reference_values() {
        let spec = DomainSpec::boxed(vec![1.0, 0.5]);
        let r = ReferenceEigenfunction::new(&spec).unwrap();
        assert!((r.eval(&[0.0, 0.0]) - 1.0_f64.sqrt() * 2.0_f64.sqrt()).abs() < 1e-15);
        assert!(r.eval(&[1.0, 0.0]).abs() < 1e-15);
        assert_eq!(r.eval(&[1.5, 0.0]), 0.0);
        assert!((r.mu1 - PI * PI * 1.25).abs() < 1e-12);
        assert!(ReferenceEigenfunction::new(&DomainSpec::ball(3, 1.0)).is_err());
        assert!(ReferenceEigenfunction::new(&DomainSpec::ellipse(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn box_eigenvector_is_sampled_reference() {
        let spec = DomainSpec::cube(2, 1.0);
        let (d, p) = solve(&spec, 8);
        let r = ReferenceEigenfunction::new(&spec).unwrap().sample(&d);
        let e = supnorm_vs_l2(&p, &r).unwrap();
        assert!(e.sup_error < 1e-9, "{}", e.sup_error);
    }

    #[test]
    fn self_comparison_has_no_ratio() {
        let spec = DomainSpec::cube(2, 1.0);
        let (_, mut p) = solve(&spec, 4);
        let r = p.phi.clone();
        let e = supnorm_vs_l2(&p, &r).unwrap();
        assert_eq!((e.sup_error, e.l2_error, e.ratio), (0.0, 0.0, None));
        p.phi = ScalarField::new(r[1..].to_vec());
        assert!(supnorm_vs_l2(&p, &r).is_err());
    }

    #[test]
    fn three_by_three_box_constants() {
        let (d, p) = solve(&DomainSpec::cube(2, 2.0), 1);
        let b = boundary_constant(&p, &d);
        // L2-normalized: corners 1/4, edge midpoints 1/(2√2) at dist 1, center 1/2 at dist 2
        assert!((b.value - 0.125f64.sqrt()).abs() < 1e-9, "{}", b.value);
        assert_eq!(b.argmax.iter().filter(|&&v| v == 0).count(), 1);
        let lip = lipschitz_constant(&p, &d);
        assert!(lip.pairs <= lip.edge);
        assert_eq!(lip.group_order, 8);
        assert!(lip.orbit_spread < 1e-9);
        assert_eq!(8 % lip.orbit_size, 0);
    }

    #[test]
    fn lipschitz_scales_with_normalization() {
        let (d, p) = solve(&DomainSpec::ball(2, 1.0), 12);
        let s = renormalize(&p, Normalization::Sup);
        let a = lipschitz_constant(&p, &d);
        let b = lipschitz_constant(&s, &d);
        let c = p.phi.max();
        assert!((b.edge / a.edge - 1.0 / c).abs() < 1e-14);
        assert!((b.pairs / a.pairs - 1.0 / c).abs() < 1e-14);
        assert!(a.pairs <= a.edge);
    }

    #[test]
    fn bulk_checks() {
        let (d, p) = solve(&DomainSpec::ball(2, 1.0), 16);
        let rep = bulk_ratio_check(&p, &d, 0.25, None).unwrap();
        assert!(rep.c_eta.is_finite() && rep.c_eta > 0.0);
        assert!(rep.bulk_min <= rep.bulk_max);
        assert!(matches!(bulk_ratio_check(&p, &d, 5.0, None), Err(Error::EmptyBulk { .. })));
    }

    #[test]
    fn box_study_is_exact_in_shape() {
        let s = convergence_study(&DomainSpec::cube(2, 1.0), &[4, 8, 16], &StudyOptions::default()).unwrap();
        for r in &s.rows {
            assert!(r.shape_error < 1e-8, "{}", r.shape_error);
        }
        // eigenvalue gap is O(N^-2)
        assert!((s.eigenvalue_rate - 2.0).abs() < 0.1, "{}", s.eigenvalue_rate);
    }
}
