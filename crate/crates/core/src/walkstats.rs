//! Free simple-random-walk estimates: gambler's ruin in an annulus, the
//! mirror coupling across a hyperplane, and tilted exit laws of balls.
//!
//! Every Monte Carlo estimator here has an exact counterpart obtained by
//! solving the discrete boundary-value problem `(I - s P_region) v = data`.
//! The two are implemented independently: the walks test membership with
//! integer arithmetic, while the solves go through [`LatticeDomain`].

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{lattice_ball, Cell, LatticeDomain};
use crate::linalg::conjugate_gradient;
use crate::rng::{retry_rng, PathRng};
use crate::spectral::{assemble, principal_eigenpair_with, EigenOptions, Normalization};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Largest region accepted by the exact solver.
pub const MAX_REGION: usize = 100_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkConfig {
    pub dim: usize,
    pub seed: u64,
    pub replicas: usize,
    pub step_cap: u64,
}

impl WalkConfig {
    pub fn new(dim: usize, seed: u64, replicas: usize) -> Self {
        WalkConfig {
            dim,
            seed,
            replicas,
            step_cap: 10_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {}", self.dim)));
        }
        if self.replicas < 1 {
            return Err(Error::InvalidArgument("replicas must be >= 1".into()));
        }
        if self.step_cap < 1 {
            return Err(Error::InvalidArgument("step cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// Monte Carlo mean with a normal-approximation 95% confidence interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicas: usize,
    /// Replicas that hit the step cap and were redrawn with a doubled cap.
    pub resampled: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64], resampled: usize) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_err = (var / n).sqrt();
        McEstimate {
            estimate: mean,
            std_err,
            ci_low: mean - Z95 * std_err,
            ci_high: mean + Z95 * std_err,
            replicas: samples.len(),
            resampled,
        }
    }

    pub fn half_width(&self) -> f64 {
        Z95 * self.std_err
    }

    /// `|estimate - value| <= k` half-widths.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.half_width()
    }
}

/// Runs `replicas` independent walks in parallel. A replica returning `None`
/// hit its step cap and is redrawn from a fresh stream with twice the cap.
/// Results come back in replica order.
fn run_replicas<T, F>(cfg: &WalkConfig, walk: F) -> Result<(Vec<T>, usize)>
where
    T: Send,
    F: Fn(&mut PathRng, u64) -> Option<T> + Sync,
{
    cfg.validate()?;
    let out: Vec<(Option<T>, u32)> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|id| {
            let mut cap = cfg.step_cap;
            for attempt in 0..16u32 {
                let mut rng = retry_rng(cfg.seed, id, attempt);
                if let Some(v) = walk(&mut rng, cap) {
                    return (Some(v), attempt);
                }
                cap = cap.saturating_mul(2);
            }
            (None, 16)
        })
        .collect();
    let resampled = out.iter().filter(|(_, a)| *a > 0).count();
    let mut values = Vec::with_capacity(out.len());
    for (v, _) in out {
        values.push(v.ok_or_else(|| Error::InvalidArgument("step cap exhausted after 16 doublings".into()))?);
    }
    Ok((values, resampled))
}

#[inline]
fn step(pos: &mut [i64], rng: &mut PathRng) {
    let dir = rng.gen_range(0..2 * pos.len());
    pos[dir / 2] += if dir % 2 == 0 { -1 } else { 1 };
}

#[inline]
fn norm_sq(pos: &[i64]) -> i64 {
    pos.iter().map(|v| v * v).sum()
}

/// `d(x, B_R)`: lattice distance from `x` to `{y : |y| < R}`.
pub fn dist_to_ball(x: &[i32], radius: u32) -> Result<u32> {
    let ball = lattice_ball(x.len(), radius as f64, &vec![0; x.len()])?;
    Ok(ball
        .sites()
        .map(|y| y.iter().zip(x).map(|(a, b)| (a - b).unsigned_abs()).sum::<u32>())
        .min()
        .unwrap_or(u32::MAX))
}

/// Verifies `s · λ_region < 1`, so that `Σ_n s^n P^n` converges.
pub fn spectral_guard(region: &LatticeDomain, tilt: f64) -> Result<f64> {
    if tilt <= 1.0 {
        return Ok(0.0);
    }
    let pair = principal_eigenpair_with(
        &assemble(region),
        region,
        &EigenOptions {
            tol: 1e-10,
            normalization: Normalization::Sup,
            ..EigenOptions::default()
        },
    )?;
    let product = tilt * pair.lambda;
    if product >= 1.0 - 1e-12 {
        return Err(Error::TiltExceedsBudget { product });
    }
    Ok(pair.lambda)
}

fn region_operator(region: &LatticeDomain, tilt: f64) -> impl Fn(&[f64], &mut [f64]) + '_ {
    let w = tilt / (2 * region.dim()) as f64;
    move |x: &[f64], y: &mut [f64]| {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for &j in region.neighbor_row(i) {
                if j != crate::geometry::NO_SITE {
                    s += x[j as usize];
                }
            }
            *yi = x[i] - w * s;
        }
    }
}

#[derive(Debug, Clone)]
pub struct HittingSolution {
    /// Per region site: `E_x[s^H g(X_H)]` with `H` the exit time of the region.
    pub values: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `v(x) = s/(2d) Σ_{y~x} (v(y) if y ∈ region else g(y))`.
///
/// With `g` the indicator of a set `A` and zero on `B`, the solution is
/// `E_x[s^H 1{X_H ∈ A}]`; `s = 1` gives the hitting probability of `A`
/// before `B`.
pub fn exact_hitting_solve(
    region: &LatticeDomain,
    boundary_value: &dyn Fn(&[i32]) -> f64,
    tilt: f64,
) -> Result<HittingSolution> {
    let n = region.len();
    if n > MAX_REGION {
        return Err(Error::InvalidArgument(format!("region has {n} sites, limit is {MAX_REGION}")));
    }
    if !(tilt > 0.0) {
        return Err(Error::InvalidArgument(format!("tilt must be positive, got {tilt}")));
    }
    spectral_guard(region, tilt)?;
    let w = tilt / (2 * region.dim()) as f64;
    let mut b = vec![0.0; n];
    for (i, bi) in b.iter_mut().enumerate() {
        for dir in 0..2 * region.dim() {
            if region.neighbor(i, dir).is_none() {
                *bi += w * boundary_value(&region.shifted(i, dir));
            }
        }
    }
    let solve = conjugate_gradient(region_operator(region, tilt), &b, 1e-12, 10 * n + 1000)?;
    Ok(HittingSolution {
        values: solve.x,
        residual: solve.residual,
        iterations: solve.iterations,
    })
}

/// Tilted Green's function `G_s(·, source) = Σ_n s^n P^n(·, source)` of the
/// walk killed on leaving `region`.
pub fn tilted_green(region: &LatticeDomain, source: usize, tilt: f64) -> Result<Vec<f64>> {
    spectral_guard(region, tilt)?;
    let mut b = vec![0.0; region.len()];
    b[source] = 1.0;
    let solve = conjugate_gradient(region_operator(region, tilt), &b, 1e-13, 10 * region.len() + 1000)?;
    Ok(solve.x)
}

/// Inner ball `B_R`, outer ball `B_{αR}` and a start in between.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnulusSetup {
    pub radius: u32,
    pub alpha: f64,
    pub start: Vec<i32>,
}

impl AnnulusSetup {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::InvalidArgument("R must be >= 1".into()));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        let r2: i64 = self.start.iter().map(|&v| (v as i64).pow(2)).sum();
        let inner = (self.radius as i64).pow(2);
        let outer = self.outer_sq();
        if !(r2 >= inner && (r2 as f64) < outer) {
            return Err(Error::InvalidArgument("start must lie in B_{alpha R} \\ B_R".into()));
        }
        Ok(())
    }

    fn outer_sq(&self) -> f64 {
        (self.alpha * self.radius as f64).powi(2)
    }

    fn in_inner(&self, r2: i64) -> bool {
        r2 < (self.radius as i64).pow(2)
    }

    fn outside_outer(&self, r2: i64) -> bool {
        r2 as f64 >= self.outer_sq()
    }

    /// Lattice annulus `B_{αR} \ B_R`, component of the start.
    pub fn region(&self) -> Result<LatticeDomain> {
        let dim = self.start.len();
        let ext = (self.alpha * self.radius as f64).ceil() as i32;
        let lo = vec![-ext; dim];
        let hi = vec![ext; dim];
        LatticeDomain::from_predicate(dim, 1, &lo, &hi, Some(&self.start), |x| {
            let r2: i64 = x.iter().map(|&v| (v as i64).pow(2)).sum();
            !self.in_inner(r2) && !self.outside_outer(r2)
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuinReport {
    pub mc: McEstimate,
    /// `d(x, B_R)`
    pub dist_to_inner: u32,
    /// `estimate · R / d(x, B_R)`
    pub bound_ratio: f64,
}

/// Monte Carlo estimate of `P_x(Ĥ_R > Ȟ_{αR})`: the walk leaves `B_{αR}`
/// before entering `B_R`.
pub fn annulus_ruin(setup: &AnnulusSetup, cfg: &WalkConfig) -> Result<RuinReport> {
    setup.validate()?;
    check_dim(cfg, setup.start.len())?;
    let start: Vec<i64> = setup.start.iter().map(|&v| v as i64).collect();
    let (samples, resampled) = run_replicas(cfg, |rng, cap| {
        let mut pos = start.clone();
        for _ in 0..cap {
            step(&mut pos, rng);
            let r2 = norm_sq(&pos);
            if setup.in_inner(r2) {
                return Some(0.0);
            }
            if setup.outside_outer(r2) {
                return Some(1.0);
            }
        }
        None
    })?;
    let mc = McEstimate::from_samples(&samples, resampled);
    let dist = dist_to_ball(&setup.start, setup.radius)?;
    Ok(RuinReport {
        bound_ratio: mc.estimate * setup.radius as f64 / dist as f64,
        mc,
        dist_to_inner: dist,
    })
}

/// Exact `P_x(Ĥ_R > Ȟ_{αR})` from the annulus boundary-value problem.
pub fn exact_annulus_ruin(setup: &AnnulusSetup) -> Result<f64> {
    setup.validate()?;
    let region = setup.region()?;
    let g = |y: &[i32]| {
        let r2: i64 = y.iter().map(|&v| (v as i64).pow(2)).sum();
        if setup.outside_outer(r2) {
            1.0
        } else {
            0.0
        }
    };
    let sol = exact_hitting_solve(&region, &g, 1.0)?;
    Ok(sol.values[region.index_of(&setup.start).expect("start in region")])
}

/// Continuum approximation of `P_x(Ĥ_R < Ȟ_{αR})` for `d >= 3`:
/// `(|x|^{2-d} - (αR)^{2-d}) / (R^{2-d} - (αR)^{2-d})`.
pub fn continuum_inner_hit(x_norm: f64, radius: f64, alpha: f64, dim: usize) -> f64 {
    let e = 2.0 - dim as f64;
    let outer = alpha * radius;
    (x_norm.powf(e) - outer.powf(e)) / (radius.powf(e) - outer.powf(e))
}

/// Monte Carlo estimate of `P_x(Ĥ_R ∧ Ȟ_{αR} >= horizon)`.
pub fn annulus_survival(setup: &AnnulusSetup, cfg: &WalkConfig, horizon: u64) -> Result<RuinReport> {
    setup.validate()?;
    check_dim(cfg, setup.start.len())?;
    let start: Vec<i64> = setup.start.iter().map(|&v| v as i64).collect();
    // fixed horizon: the step cap never binds
    let (samples, resampled) = run_replicas(cfg, |rng, _| {
        let mut pos = start.clone();
        for _ in 1..horizon {
            step(&mut pos, rng);
            let r2 = norm_sq(&pos);
            if setup.in_inner(r2) || setup.outside_outer(r2) {
                return Some(0.0);
            }
        }
        Some(1.0)
    })?;
    let mc = McEstimate::from_samples(&samples, resampled);
    let dist = dist_to_ball(&setup.start, setup.radius)?;
    Ok(RuinReport {
        bound_ratio: mc.estimate * setup.radius as f64 / dist as f64,
        mc,
        dist_to_inner: dist,
    })
}

/// `(P_A^{T-1} 1)`: per-site probability of staying in `region` at times
/// `0, ..., T-1`.
pub fn stay_probabilities(region: &LatticeDomain, horizon: u64) -> Vec<f64> {
    let kernel = assemble(region);
    let mut v = vec![1.0; region.len()];
    let mut next = vec![0.0; region.len()];
    for _ in 1..horizon {
        kernel.apply(&v, &mut next);
        std::mem::swap(&mut v, &mut next);
    }
    v
}

/// Exact `P_x(Ĥ_R ∧ Ȟ_{αR} >= horizon)` by propagating the killed kernel.
pub fn exact_annulus_survival(setup: &AnnulusSetup, horizon: u64) -> Result<f64> {
    setup.validate()?;
    let region = setup.region()?;
    let v = stay_probabilities(&region, horizon);
    Ok(v[region.index_of(&setup.start).expect("start in region")])
}

/// `γ_R = sup_v P_v(H_R >= R²)` estimated by Monte Carlo from the center
/// and from the near-boundary start `(R-1) e_1`; returns the larger value
/// and both estimates.
pub fn gamma_mc(radius: u32, cfg: &WalkConfig) -> Result<(f64, McEstimate, McEstimate)> {
    let horizon = (radius as u64).pow(2);
    let r2 = (radius as i64).pow(2);
    let run = |start: Vec<i64>| -> Result<McEstimate> {
        let (samples, resampled) = run_replicas(cfg, |rng, _| {
            let mut pos = start.clone();
            for _ in 1..horizon {
                step(&mut pos, rng);
                if norm_sq(&pos) >= r2 {
                    return Some(0.0);
                }
            }
            Some(1.0)
        })?;
        Ok(McEstimate::from_samples(&samples, resampled))
    };
    let center = run(vec![0; cfg.dim])?;
    let mut edge = vec![0i64; cfg.dim];
    edge[0] = radius as i64 - 1;
    let near = run(edge)?;
    Ok((center.estimate.max(near.estimate), center, near))
}

/// Exact `γ_R = max_v P_v(H_R >= R²)` over the lattice ball.
pub fn gamma_exact(radius: u32, dim: usize) -> Result<f64> {
    let ball = lattice_ball(dim, radius as f64, &vec![0; dim])?;
    let v = stay_probabilities(&ball, (radius as u64).pow(2));
    Ok(v.into_iter().fold(0.0, f64::max))
}

/// Default tilt `c = ¼ ln(1/γ̂)`, with `γ̂` the Monte Carlo `γ_R` at `R = 64`.
pub fn default_tilt(cfg: &WalkConfig) -> Result<f64> {
    let (gamma, _, _) = gamma_mc(64, cfg)?;
    Ok(0.25 * (1.0 / gamma).ln())
}

fn check_dim(cfg: &WalkConfig, dim: usize) -> Result<()> {
    if cfg.dim != dim {
        return Err(Error::InvalidArgument(format!(
            "walk dimension {} does not match start dimension {dim}",
            cfg.dim
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingReport {
    pub radius: u32,
    pub tilt: f64,
    /// `P_0(τ_H > H_R)`
    pub avoid: McEstimate,
    /// `E_0[e^{c H_R / R²} 1{τ_H > H_R}]`
    pub tilted: McEstimate,
    /// `R ·` tilted estimate
    pub scaled_tilted: f64,
    /// Replicas with `τ <= min(H¹, H²)`.
    pub successes: usize,
    /// Successful replicas whose two walks exit at different times or sites.
    pub coincidence_violations: usize,
    /// Failed replicas with `H¹ < H²`.
    pub ordering_violations: usize,
}

struct CoupledRun {
    tau: Option<u64>,
    exit1: (u64, Vec<i64>),
    exit2: (u64, Vec<i64>),
}

/// Mirror image across the hyperplane `{z_1 = -1}`.
#[inline]
pub fn mirror(pos: &[i64]) -> Vec<i64> {
    let mut m = pos.to_vec();
    m[0] = -2 - m[0];
    m
}

/// Mirror coupling of walks from `0` and `-2e_1` across `H = {z_1 = -1}`,
/// both watched until they leave `B(0, R)`.
///
/// `X¹` is the simple walk from the origin; `X²` is its reflection until
/// the meeting time `τ` (the hitting time of `H`), and equals `X¹` after.
pub fn reflection_coupling(radius: u32, cfg: &WalkConfig, tilt: f64) -> Result<CouplingReport> {
    if radius < 4 {
        return Err(Error::InvalidArgument("R must be >= 4".into()));
    }
    let r2 = (radius as i64).pow(2);
    let (runs, resampled) = run_replicas(cfg, |rng, cap| {
        let mut x1 = vec![0i64; cfg.dim];
        let mut tau = None;
        let mut exit2 = None;
        for n in 0..=cap {
            if n > 0 {
                step(&mut x1, rng);
            }
            if tau.is_none() && x1[0] == -1 {
                tau = Some(n);
            }
            let x2 = if tau.is_some() { x1.clone() } else { mirror(&x1) };
            if exit2.is_none() && norm_sq(&x2) >= r2 {
                exit2 = Some((n, x2));
            }
            if norm_sq(&x1) >= r2 {
                let exit1 = (n, x1.clone());
                // X² has already left: it is farther from 0 than X¹ before τ
                let exit2 = exit2.unwrap_or_else(|| exit1.clone());
                return Some(CoupledRun { tau, exit1, exit2 });
            }
        }
        None
    })?;

    let scale = tilt / (radius as f64).powi(2);
    let mut avoid = Vec::with_capacity(runs.len());
    let mut tilted = Vec::with_capacity(runs.len());
    let (mut successes, mut coincidence_violations, mut ordering_violations) = (0, 0, 0);
    for run in &runs {
        let h1 = run.exit1.0;
        let h2 = run.exit2.0;
        let avoided = run.tau.is_none_or(|t| t > h1);
        avoid.push(if avoided { 1.0 } else { 0.0 });
        tilted.push(if avoided { (scale * h1 as f64).exp() } else { 0.0 });
        let success = run.tau.is_some_and(|t| t <= h1.min(h2));
        if success {
            successes += 1;
            if run.exit1 != run.exit2 {
                coincidence_violations += 1;
            }
        } else if h1 < h2 {
            ordering_violations += 1;
        }
    }
    let tilted = McEstimate::from_samples(&tilted, resampled);
    Ok(CouplingReport {
        radius,
        tilt,
        avoid: McEstimate::from_samples(&avoid, resampled),
        scaled_tilted: tilted.estimate * radius as f64,
        tilted,
        successes,
        coincidence_violations,
        ordering_violations,
    })
}

/// Exact `E_0[s^{H_R} 1{τ_H > H_R}]`, `s = e^{c/R²}`, on the half ball
/// `B(0,R) ∩ {z_1 >= 0}`.
pub fn exact_hyperplane_avoidance(radius: u32, dim: usize, tilt: f64) -> Result<f64> {
    let r = radius as i32;
    let mut lo = vec![-r; dim];
    lo[0] = 0;
    let hi = vec![r; dim];
    let r2 = (radius as i64).pow(2);
    let origin = vec![0; dim];
    let region = LatticeDomain::from_predicate(dim, 1, &lo, &hi, Some(&origin), |x| {
        x[0] >= 0 && x.iter().map(|&v| (v as i64).pow(2)).sum::<i64>() < r2
    })?;
    // reaching z_1 = -1 counts as hitting H, even outside the ball
    let g = |y: &[i32]| if y[0] == -1 { 0.0 } else { 1.0 };
    let s = (tilt / (radius as f64).powi(2)).exp();
    let sol = exact_hitting_solve(&region, &g, s)?;
    Ok(sol.values[region.index_of(&origin).expect("origin in half ball")])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MirrorLawTest {
    pub chi2: f64,
    pub dof: usize,
    /// Wilson-Hilferty normal score of the statistic.
    pub z: f64,
}

impl MirrorLawTest {
    /// Upper-tail 0.1% critical value.
    pub fn passes(&self) -> bool {
        self.z < 3.09
    }
}

/// Two-sample chi-square test of the step-`t` directed edge, reflected walks
/// from `0` against fresh walks from `-2e_1`. Each replica contributes one
/// observation at a uniform `t` in `1..=length`, so bins are `(t, edge)` and
/// counts are multinomial.
pub fn mirror_law_test(cfg: &WalkConfig, length: u64) -> Result<MirrorLawTest> {
    type Edge = (u64, Vec<i64>, Vec<i64>);
    if length == 0 {
        return Err(Error::InvalidArgument("mirror test length must be positive".into()));
    }
    let collect = |reflect: bool, seed: u64| -> Result<BTreeMap<Edge, u64>> {
        let sub = WalkConfig { seed, ..cfg.clone() };
        let (edges, _) = run_replicas(&sub, |rng, _| {
            let t = rng.gen_range(1..=length);
            let mut pos = vec![0i64; cfg.dim];
            if !reflect {
                pos[0] = -2;
            }
            for _ in 1..t {
                step(&mut pos, rng);
            }
            let from = pos.clone();
            step(&mut pos, rng);
            Some(if reflect { (t, mirror(&from), mirror(&pos)) } else { (t, from, pos) })
        })?;
        let mut counts = BTreeMap::new();
        for e in edges {
            *counts.entry(e).or_insert(0u64) += 1;
        }
        Ok(counts)
    };
    let a = collect(true, cfg.seed)?;
    let b = collect(false, cfg.seed ^ 0x5bd1_e995)?;
    let mut keys: Vec<&Edge> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    // pool sparse bins
    let (mut chi2, mut bins, mut pool_a, mut pool_b) = (0.0, 0usize, 0u64, 0u64);
    for k in keys {
        let (x, y) = (*a.get(k).unwrap_or(&0), *b.get(k).unwrap_or(&0));
        if x + y < 10 {
            pool_a += x;
            pool_b += y;
            continue;
        }
        chi2 += (x as f64 - y as f64).powi(2) / (x + y) as f64;
        bins += 1;
    }
    if pool_a + pool_b > 0 {
        chi2 += (pool_a as f64 - pool_b as f64).powi(2) / (pool_a + pool_b) as f64;
        bins += 1;
    }
    let dof = bins.saturating_sub(1).max(1);
    let k = dof as f64;
    let z = ((chi2 / k).powf(1.0 / 3.0) - (1.0 - 2.0 / (9.0 * k))) / (2.0 / (9.0 * k)).sqrt();
    Ok(MirrorLawTest { chi2, dof, z })
}

/// Tilted exit law `z ↦ E_u[e^{c H_R/R²} 1{X_{H_R} = z}]` of `B(0,R)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExitProfile {
    pub radius: u32,
    pub tilt: f64,
    pub start: Vec<i32>,
    /// Exit sites `z ∈ ∂B_R`, in lattice order.
    pub points: Vec<Vec<i32>>,
    pub values: Vec<f64>,
}

impl ExitProfile {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_min_ratio(&self) -> f64 {
        let min = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        self.sup() / min
    }
}

/// Exact tilted exit profile from `u`, `|u| <= R/16`, via one adjoint
/// (Green's function) solve.
pub fn tilted_exit_point(u: &[i32], radius: u32, tilt: f64) -> Result<ExitProfile> {
    let dim = u.len();
    let u2: i64 = u.iter().map(|&v| (v as i64).pow(2)).sum();
    if (u2 as f64) > (radius as f64 / 16.0).powi(2) {
        return Err(Error::InvalidArgument("start must satisfy |u| <= R/16".into()));
    }
    let ball = lattice_ball(dim, radius as f64, &vec![0; dim])?;
    let s = (tilt / (radius as f64).powi(2)).exp();
    let src = ball.index_of(u).expect("u lies in the ball");
    let green = tilted_green(&ball, src, s)?;
    let w = s / (2 * dim) as f64;
    let mut points = Vec::with_capacity(ball.boundary_len());
    let mut values = Vec::with_capacity(ball.boundary_len());
    for z in ball.boundary() {
        let mut acc = 0.0;
        let mut y = z.to_vec();
        for dir in 0..2 * dim {
            let delta = if dir % 2 == 0 { -1 } else { 1 };
            y[dir / 2] += delta;
            if let Cell::Site(i) = ball.cell(&y) {
                acc += green[i];
            }
            y[dir / 2] -= delta;
        }
        points.push(z.to_vec());
        values.push(w * acc);
    }
    Ok(ExitProfile {
        radius,
        tilt,
        start: u.to_vec(),
        points,
        values,
    })
}

/// Same quantity at a single exit site `z` by a forward solve with unit
/// data at `z`.
pub fn tilted_exit_forward(u: &[i32], z: &[i32], radius: u32, tilt: f64) -> Result<f64> {
    let dim = u.len();
    let ball = lattice_ball(dim, radius as f64, &vec![0; dim])?;
    let s = (tilt / (radius as f64).powi(2)).exp();
    let g = |y: &[i32]| if y == z { 1.0 } else { 0.0 };
    let sol = exact_hitting_solve(&ball, &g, s)?;
    Ok(sol.values[ball.index_of(u).expect("u lies in the ball")])
}

/// `sup_{|u| <= R/16} sup_z E_u[e^{c H_R/R²} 1{X_{H_R} = z}]`.
pub fn tilted_exit_sup(radius: u32, tilt: f64, dim: usize) -> Result<f64> {
    let r = (radius / 16) as i32;
    let lim = (radius as f64 / 16.0).powi(2);
    let mut best = 0.0f64;
    let mut u = vec![-r; dim];
    loop {
        let u2: i64 = u.iter().map(|&v| (v as i64).pow(2)).sum();
        if (u2 as f64) <= lim {
            best = best.max(tilted_exit_point(&u, radius, tilt)?.sup());
        }
        // odometer over the cube [-r, r]^d
        let mut k = 0;
        while k < dim {
            u[k] += 1;
            if u[k] <= r {
                break;
            }
            u[k] = -r;
            k += 1;
        }
        if k == dim {
            break;
        }
    }
    Ok(best)
}
