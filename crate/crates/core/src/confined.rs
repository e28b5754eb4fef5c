//! The confined walk: the Doob transform of the killed walk by its Perron
//! vector, and exact checks of how it arises from conditioning on survival.
//!
//! The transition kernel is `p̃(x,y) = φ(y) / (2d λ φ(x))` for neighbors
//! `x ~ y` of the domain. Its reversible measure is `φ²`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{LatticeDomain, NO_SITE};
use crate::rng::path_rng;
use crate::spectral::{assemble, EigenPair};
use crate::walkstats::tilted_green;

/// Largest domain on which dense matrix checks run.
pub const DENSE_LIMIT: usize = 2000;
/// Largest domain for the dense Doob-transform identity check.
pub const DOOB_LIMIT: usize = 1000;

#[derive(Debug, Clone)]
pub struct ConfinedKernel {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    probs: Vec<f64>,
    /// `φ² / Σ φ²`
    pub stationary: ScalarField,
    /// `max_x |Σ_y p̃(x,y) - 1|`
    pub max_row_defect: f64,
}

impl ConfinedKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `(neighbor, probability)` pairs of row `i`, neighbors sorted.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().map(|&j| j as usize).zip(self.probs[r].iter().copied())
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(k, _)| k == j).map_or(0.0, |(_, p)| p)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, p)| p).sum()
    }

    fn step<R: Rng>(&self, i: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        let mut acc = 0.0;
        for k in r.clone() {
            acc += self.probs[k];
            if u < acc {
                return self.cols[k] as usize;
            }
        }
        // u beyond the rounded row sum
        self.cols[r.end - 1] as usize
    }
}

/// Builds the confined kernel from a converged Perron pair.
pub fn build_confined(pair: &EigenPair, domain: &LatticeDomain) -> Result<ConfinedKernel> {
    let n = domain.len();
    if n < 2 || pair.lambda <= 0.0 {
        return Err(Error::DegenerateDomain(
            "confined walk needs lambda > 0 (single-site or isolated domain)".into(),
        ));
    }
    if pair.phi.len() != n {
        return Err(Error::InvalidArgument("eigenpair does not match domain".into()));
    }
    if !(pair.residual <= 1e-10) {
        return Err(Error::InvalidArgument(format!(
            "eigenpair residual {:e} exceeds 1e-10",
            pair.residual
        )));
    }
    if let Some((i, v)) = pair.phi.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::InvalidPerronVector(format!("phi[{i}] = {v:e} is not positive")));
    }
    let phi = &pair.phi;
    let w = 1.0 / (2.0 * domain.dim() as f64 * pair.lambda);
    let mut row_ptr = vec![0usize];
    let mut cols = Vec::new();
    let mut probs = Vec::new();
    let mut max_row_defect = 0.0f64;
    for i in 0..n {
        let mut row: Vec<u32> = domain.neighbor_row(i).iter().copied().filter(|&j| j != NO_SITE).collect();
        row.sort_unstable();
        let mut sum = 0.0;
        for &j in &row {
            let p = w * phi[j as usize] / phi[i];
            sum += p;
            cols.push(j);
            probs.push(p);
        }
        max_row_defect = max_row_defect.max((sum - 1.0).abs());
        row_ptr.push(cols.len());
    }
    let total = phi.sum_sq();
    let stationary = ScalarField::new(phi.iter().map(|v| v * v / total).collect());
    Ok(ConfinedKernel {
        n,
        row_ptr,
        cols,
        probs,
        stationary,
        max_row_defect,
    })
}

/// Largest `|φ(x)² p̃(x,y) - φ(y)² p̃(y,x)|` over edges.
pub fn reversibility_defect(kernel: &ConfinedKernel, phi: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..kernel.n {
        for (j, p) in kernel.row(i) {
            let back = kernel.prob(j, i);
            worst = worst.max((phi[i] * phi[i] * p - phi[j] * phi[j] * back).abs());
        }
    }
    worst
}

/// A path of the confined walk with `steps` transitions from site `start`.
pub fn sample_path(kernel: &ConfinedKernel, start: usize, steps: usize, seed: u64) -> Result<Vec<usize>> {
    sample_path_id(kernel, start, steps, seed, 0)
}

/// Like [`sample_path`], drawing from stream `path_id` of the master seed.
pub fn sample_path_id(
    kernel: &ConfinedKernel,
    start: usize,
    steps: usize,
    seed: u64,
    path_id: u64,
) -> Result<Vec<usize>> {
    check_start(kernel, start)?;
    let mut rng = path_rng(seed, path_id);
    let mut path = Vec::with_capacity(steps + 1);
    let mut x = start;
    path.push(x);
    for _ in 0..steps {
        x = kernel.step(x, &mut rng);
        path.push(x);
    }
    Ok(path)
}

/// Visit counts of `X_1, ..., X_steps` along one path.
pub fn occupation(kernel: &ConfinedKernel, start: usize, steps: usize, seed: u64) -> Result<Vec<u64>> {
    check_start(kernel, start)?;
    let mut rng = path_rng(seed, 0);
    let mut counts = vec![0u64; kernel.n];
    let mut x = start;
    for _ in 0..steps {
        x = kernel.step(x, &mut rng);
        counts[x] += 1;
    }
    Ok(counts)
}

fn check_start(kernel: &ConfinedKernel, start: usize) -> Result<()> {
    if start >= kernel.n {
        return Err(Error::InvalidArgument(format!("start index {start} outside the domain")));
    }
    Ok(())
}

/// Total-variation distance between empirical counts and a probability vector.
pub fn total_variation(counts: &[u64], target: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    0.5 * counts
        .iter()
        .zip(target)
        .map(|(&c, &p)| (c as f64 / total as f64 - p).abs())
        .sum::<f64>()
}

/// `λ₂ / λ₁` of the killed kernel, where `λ₂` is the largest eigenvalue
/// modulus strictly below `λ₁`. The mode at `-λ₁` (always present: the
/// lattice is bipartite) is excluded.
pub fn dense_subleading_ratio(domain: &LatticeDomain) -> Result<f64> {
    if domain.len() > DENSE_LIMIT {
        return Err(Error::NotApplicable(format!("dense solve needs at most {DENSE_LIMIT} sites")));
    }
    let eig = SymmetricEigen::new(assemble(domain).to_dense());
    let top = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let second = eig
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .filter(|&v| v < top * (1.0 - 1e-9))
        .fold(0.0, f64::max);
    Ok(second / top)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditioningRow {
    pub t: usize,
    /// `max_{x~y} |P_x(X_1 = y | H > t) - p̃(x,y)|`
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditioningTable {
    pub rows: Vec<ConditioningRow>,
    /// `λ₂ / λ₁` from a dense eigensolve.
    pub subleading_ratio: f64,
}

impl ConditioningTable {
    pub fn deviation(&self, t: usize) -> f64 {
        self.rows[t - 1].max_deviation
    }
}

/// Compares the one-step law of the walk conditioned on `H_{∂D_N} > t`,
/// computed from dense matrix powers, with the confined kernel.
pub fn conditioning_limit_check(pair: &EigenPair, domain: &LatticeDomain, t_max: usize) -> Result<ConditioningTable> {
    let n = domain.len();
    if n > DENSE_LIMIT {
        return Err(Error::NotApplicable(format!(
            "conditioning check needs at most {DENSE_LIMIT} sites, got {n}"
        )));
    }
    if n < 2 || pair.lambda <= 0.0 {
        return Err(Error::DegenerateDomain("conditioning check needs lambda > 0".into()));
    }
    let dim = domain.dim();
    let p = assemble(domain).to_dense();
    let w = 1.0 / (2 * dim) as f64;
    let phi = &pair.phi;

    // u_t = s_t / (m_1 ... m_t) with s_t = P^t 1 the survival probabilities
    let mut prev = nalgebra::DVector::from_element(n, 1.0);
    let mut rows = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        let mut cur = &p * &prev;
        let m = cur.amax();
        cur /= m;
        let mut worst = 0.0f64;
        for x in 0..n {
            for &y in domain.neighbor_row(x) {
                if y == NO_SITE {
                    continue;
                }
                let y = y as usize;
                let conditional = w * prev[y] / (m * cur[x]);
                let confined = w * phi[y] / (pair.lambda * phi[x]);
                worst = worst.max((conditional - confined).abs());
            }
        }
        rows.push(ConditioningRow { t, max_deviation: worst });
        prev = cur;
    }
    Ok(ConditioningTable {
        rows,
        subleading_ratio: dense_subleading_ratio(domain)?,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurvivalCheck {
    pub t: usize,
    /// Max relative deviation of `(a_t + a_{t+1}) / 2` from `φ(x) Σφ / Σφ²`,
    /// with `a_t(x) = λ^{-t} P_x(H > t)`.
    pub max_relative_error: f64,
    /// Max relative deviation of the single-time value `a_t`; carries the
    /// period-two mode of the bipartite walk.
    pub single_time_error: f64,
    /// Max relative deviation between the rescaled sparse iteration and
    /// a dense spectral evaluation of `a_t`, `a_{t+1}`; `None` above the
    /// dense size cap.
    pub oracle_deviation: Option<f64>,
}

/// Checks `λ^{-t} P_x(H > t) → φ(x) Σ_z φ(z) / Σ_z φ(z)²` pointwise.
///
/// The right side equals `N^{-d} Σφ · φ(x)` for L2-normalized `φ`. On
/// `Z^d` the killed kernel also has the eigenvalue `-λ`, whose mode
/// oscillates with the parity of `t`; the limit is taken along the average
/// of two consecutive times, which cancels it exactly.
pub fn survival_identity_check(pair: &EigenPair, domain: &LatticeDomain, t: usize) -> Result<SurvivalCheck> {
    let n = domain.len();
    if n < 2 || pair.lambda <= 0.0 {
        return Err(Error::DegenerateDomain("survival identity needs lambda > 0".into()));
    }
    let kernel = assemble(domain);
    let inv = 1.0 / pair.lambda;
    let mut v = vec![1.0; n];
    let mut next = vec![0.0; n];
    for step in 1..=t {
        kernel.apply(&v, &mut next);
        let mut m = 0.0f64;
        for (a, b) in v.iter_mut().zip(&next) {
            *a = inv * b;
            m = m.max(a.abs());
        }
        if !m.is_finite() || m > 1e12 {
            return Err(Error::Overflow { step });
        }
    }
    kernel.apply(&v, &mut next);
    next.iter_mut().for_each(|b| *b *= inv);

    let phi = &pair.phi;
    let factor = phi.sum() / phi.sum_sq();
    let mut max_relative_error = 0.0f64;
    let mut single_time_error = 0.0f64;
    for x in 0..n {
        let target = factor * phi[x];
        max_relative_error = max_relative_error.max((0.5 * (v[x] + next[x]) - target).abs() / target);
        single_time_error = single_time_error.max((v[x] - target).abs() / target);
    }

    let oracle_deviation = if n <= DENSE_LIMIT {
        let eig = SymmetricEigen::new(kernel.to_dense());
        let ones = nalgebra::DVector::from_element(n, 1.0);
        let coeffs = eig.eigenvectors.transpose() * ones;
        let at = |time: usize| -> nalgebra::DVector<f64> {
            let weights = nalgebra::DVector::from_iterator(
                n,
                eig.eigenvalues
                    .iter()
                    .zip(coeffs.iter())
                    .map(|(mu, c)| c * (mu * inv).powi(time as i32)),
            );
            &eig.eigenvectors * weights
        };
        let (dt, dt1) = (at(t), at(t + 1));
        let mut worst = 0.0f64;
        for x in 0..n {
            worst = worst.max((v[x] - dt[x]).abs() / dt[x].abs());
            worst = worst.max((next[x] - dt1[x]).abs() / dt1[x].abs());
        }
        Some(worst)
    } else {
        None
    };

    Ok(SurvivalCheck {
        t,
        max_relative_error,
        single_time_error,
        oracle_deviation,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoobCheck {
    /// `max_z |P^N_x(X_{H_Λ} = z) - φ(z)/φ(x) E_x[λ^{-H_Λ} 1{X_{H_Λ} = z, H_Λ < H_∂}]|`
    pub max_deviation: f64,
    /// `Σ_z P^N_x(X_{H_Λ} = z)`; one, since the confined walk never dies.
    pub confined_mass: f64,
    pub targets: usize,
}

/// Exact check of the Doob relation between the confined and the killed walk
/// for the events `{X_{H_Λ} = z}`, `z ∈ Λ`.
///
/// The confined side is a dense LU solve with `p̃`; the killed side is a
/// tilted Green's function solve with tilt `1/λ`.
pub fn doob_identity_check<F>(pair: &EigenPair, domain: &LatticeDomain, start: usize, in_target: F) -> Result<DoobCheck>
where
    F: Fn(&[i32]) -> bool,
{
    let n = domain.len();
    if n > DOOB_LIMIT {
        return Err(Error::NotApplicable(format!("Doob check needs at most {DOOB_LIMIT} sites")));
    }
    let kernel = build_confined(pair, domain)?;
    let targets: Vec<usize> = (0..n).filter(|&i| in_target(domain.site(i))).collect();
    if targets.is_empty() {
        return Err(Error::InvalidArgument("target set does not meet the domain".into()));
    }
    if in_target(domain.site(start)) {
        return Err(Error::InvalidArgument("start must lie outside the target set".into()));
    }
    let free: Vec<usize> = (0..n).filter(|&i| !in_target(domain.site(i))).collect();
    let mut free_pos = vec![usize::MAX; n];
    free.iter().enumerate().for_each(|(k, &i)| free_pos[i] = k);
    let mut target_pos = vec![usize::MAX; n];
    targets.iter().enumerate().for_each(|(k, &i)| target_pos[i] = k);

    // (I - P̃_UU) H = P̃_UΛ
    let (nu, nt) = (free.len(), targets.len());
    let mut a = DMatrix::<f64>::identity(nu, nu);
    let mut rhs = DMatrix::<f64>::zeros(nu, nt);
    for (k, &i) in free.iter().enumerate() {
        for (j, p) in kernel.row(i) {
            if free_pos[j] != usize::MAX {
                a[(k, free_pos[j])] -= p;
            } else {
                rhs[(k, target_pos[j])] += p;
            }
        }
    }
    let h = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("confined hitting system".into()))?;
    let confined_row = h.row(free_pos[start]);

    let region = domain.restrict(|x| !in_target(x))?;
    let start_pt = domain.site(start);
    let src = region.index_of(start_pt).expect("start lies in the free region");
    let tilt = 1.0 / pair.lambda;
    let green = tilted_green(&region, src, tilt)?;
    let w = tilt / (2 * domain.dim()) as f64;
    let phi = &pair.phi;
    let mut max_deviation = 0.0f64;
    for (k, &z) in targets.iter().enumerate() {
        let mut acc = 0.0;
        for dir in 0..2 * domain.dim() {
            let y = domain.shifted(z, dir);
            if let Some(r) = region.index_of(&y) {
                acc += green[r];
            }
        }
        let killed = phi[z] / phi[start] * w * acc;
        max_deviation = max_deviation.max((confined_row[k] - killed).abs());
    }
    Ok(DoobCheck {
        max_deviation,
        confined_mass: confined_row.iter().sum(),
        targets: nt,
    })
}
