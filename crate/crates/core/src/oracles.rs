//! Independent references: the symmetrized free kernel, a finite-difference
//! solver for two particles, and a Feynman-Kac Monte Carlo estimator.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{all_permutations, Permutation};
use crate::error::{Error, Result};
use crate::particles::ParticleConfig;

/// Heat kernel of `-d^2/dx^2`: variance `2t`.
pub fn heat_kernel(u: f64, t: f64) -> f64 {
    (-u * u / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

fn check_pair(x: &ParticleConfig, y: &ParticleConfig, t: f64) -> Result<()> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::invalid(format!(
            "x and y need the same positive length, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("time must be positive and finite, got {t}")));
    }
    Ok(())
}

fn permuted_free(x: &[f64], y: &[f64], t: f64, p: &Permutation) -> f64 {
    x.iter()
        .enumerate()
        .map(|(j, &xj)| heat_kernel(xj - y[p.apply(j)], t))
        .product()
}

/// `(1/n!) sum_sigma prod_j p_t(x_j - y_sigma(j))`.
pub fn free_propagator(x: &ParticleConfig, y: &ParticleConfig, t: f64) -> Result<f64> {
    check_pair(x, y, t)?;
    let perms = all_permutations(x.len())?;
    let s: f64 = perms
        .iter()
        .map(|p| permuted_free(x.as_slice(), y.as_slice(), t, p))
        .sum();
    Ok(s / perms.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    /// Spatial step in the relative coordinate.
    pub du: f64,
    /// Time step.
    pub dtau: f64,
    /// Domain `[0, U]` for the relative coordinate; `None` picks a width
    /// from `t`, the endpoints and the bound-state length.
    pub half_width: Option<f64>,
    /// Largest accepted step-halving error estimate.
    pub tol: f64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            du: 1e-3,
            dtau: 1e-3,
            half_width: None,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeResult {
    pub value: f64,
    pub error_estimate: f64,
}

/// Two-particle propagator on `x_1 <= x_2` from the centre-of-mass heat
/// kernel times the relative-coordinate kernel, the latter by
/// Crank-Nicolson on `[0, U]` with the Robin condition `g' + (kappa/2) g = 0`
/// at contact and `g = 0` at `U`. Four implicit Euler half steps start the
/// scheme to damp the point-source transient.
pub fn pde_propagator_n2(
    x: &ParticleConfig,
    y: &ParticleConfig,
    t: f64,
    kappa: f64,
    cfg: &PdeConfig,
) -> Result<PdeResult> {
    check_pair(x, y, t)?;
    if x.len() != 2 {
        return Err(Error::invalid("the finite-difference oracle is for n = 2"));
    }
    if !(cfg.du > 0.0 && cfg.dtau > 0.0 && cfg.tol > 0.0) {
        return Err(Error::invalid("du, dtau and tol must be positive"));
    }
    if !kappa.is_finite() {
        return Err(Error::invalid("coupling must be finite"));
    }
    let u_end = x[1] - x[0];
    let u_start = y[1] - y[0];
    let floor = 6.0 * t.sqrt() + u_end + u_start;
    let width = match cfg.half_width {
        Some(w) if w < floor => {
            return Err(Error::invalid(format!(
                "domain width {w} below 6 sqrt(t) + |u0| + |u1| = {floor}"
            )))
        }
        Some(w) => w,
        None => floor + 6.0 * t.sqrt() + 1.0 + if kappa > 0.0 { 20.0 / kappa } else { 0.0 },
    };
    let fine = relative_kernel(u_start, u_end, t, kappa, width, cfg.du, cfg.dtau)?;
    let coarse = relative_kernel(u_start, u_end, t, kappa, width, 2.0 * cfg.du, 2.0 * cfg.dtau)?;
    let dr = 0.5 * (x[0] + x[1]) - 0.5 * (y[0] + y[1]);
    let centre = (-dr * dr / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
    let value = 0.5 * centre * fine;
    // second-order scheme: fine error ~ (fine - coarse) / 3
    let error_estimate = 0.5 * centre * (fine - coarse).abs() / 3.0;
    if error_estimate > cfg.tol {
        return Err(Error::numerical(format!(
            "finite-difference error estimate {error_estimate:e} exceeds tolerance {:e}; refine du/dtau",
            cfg.tol
        )));
    }
    Ok(PdeResult { value, error_estimate })
}

/// Kernel of `d/dtau g = 2 g''` on `u >= 0`, from a unit point source at
/// `u0`, read off at `u1`.
fn relative_kernel(u0: f64, u1: f64, t: f64, kappa: f64, width: f64, du: f64, dtau: f64) -> Result<f64> {
    let cells = (width / du).ceil() as usize;
    let nodes = cells; // node `cells` carries the Dirichlet zero
    if nodes < 8 {
        return Err(Error::invalid("finite-difference grid has fewer than 8 nodes"));
    }
    if nodes > 50_000_000 {
        return Err(Error::resource(format!("finite-difference grid of {nodes} nodes is too large")));
    }
    let h = width / cells as f64;
    // point source spread linearly over the two neighbouring nodes, against
    // the trapezoid weights (half weight at the contact node)
    let mut g = vec![0.0; nodes];
    let pos = u0 / h;
    let i = (pos.floor() as usize).min(nodes - 2);
    let theta = pos - i as f64;
    let weight = |k: usize| if k == 0 { 0.5 * h } else { h };
    g[i] += (1.0 - theta) / weight(i);
    g[i + 1] += theta / weight(i + 1);

    let steps = (t / dtau).ceil().max(4.0) as usize;
    let dt = t / steps as f64;
    let r = 2.0 / (h * h);
    // operator A g = 2 g'': row 0 uses the ghost value g_{-1} = g_1 + kappa h g_0
    let apply = |g: &[f64], out: &mut [f64]| {
        out[0] = r * (2.0 * g[1] - 2.0 * g[0] + kappa * h * g[0]);
        for k in 1..nodes {
            let right = if k + 1 < nodes { g[k + 1] } else { 0.0 };
            out[k] = r * (g[k - 1] - 2.0 * g[k] + right);
        }
    };
    // solve (I - c A) g_new = rhs
    let solve = |c: f64, rhs: &mut [f64]| {
        let mut diag = vec![0.0; nodes];
        let mut upper = vec![0.0; nodes];
        let mut lower = vec![0.0; nodes];
        diag[0] = 1.0 - c * r * (-2.0 + kappa * h);
        upper[0] = -c * r * 2.0;
        for k in 1..nodes {
            lower[k] = -c * r;
            diag[k] = 1.0 + 2.0 * c * r;
            upper[k] = -c * r;
        }
        // Thomas algorithm
        for k in 1..nodes {
            let m = lower[k] / diag[k - 1];
            diag[k] -= m * upper[k - 1];
            rhs[k] -= m * rhs[k - 1];
        }
        rhs[nodes - 1] /= diag[nodes - 1];
        for k in (0..nodes - 1).rev() {
            rhs[k] = (rhs[k] - upper[k] * rhs[k + 1]) / diag[k];
        }
    };
    let mut work = vec![0.0; nodes];
    // four implicit Euler half steps, then Crank-Nicolson
    for _ in 0..4 {
        solve(0.5 * dt, &mut g);
    }
    for _ in 2..steps {
        apply(&g, &mut work);
        for k in 0..nodes {
            work[k] = g[k] + 0.5 * dt * work[k];
        }
        solve(0.5 * dt, &mut work);
        std::mem::swap(&mut g, &mut work);
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("finite-difference solution is not finite"));
    }
    let pos = u1 / h;
    let i = (pos.floor() as usize).min(nodes - 2);
    let theta = pos - i as f64;
    Ok((1.0 - theta) * g[i] + theta * g[i + 1])
}

/// How pair local times are accumulated along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LocalTimeEstimator {
    /// Per step, the local time at zero of the Brownian bridge between the
    /// sampled endpoints is drawn from its exact conditional law.
    #[default]
    Bridge,
    /// Occupation of `|gap| <= h` divided by `2h`, trapezoid in time, at
    /// `h, h/2, h/4`, extrapolated linearly to `h = 0`.
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: u64,
    pub steps: usize,
    /// Local-time kernel half-width; `None` uses `0.05 sqrt(t)`.
    pub bandwidth: Option<f64>,
    pub seed: u64,
    pub antithetic: bool,
    #[serde(default)]
    pub estimator: LocalTimeEstimator,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 1_000_000,
            steps: 2048,
            bandwidth: None,
            seed: 0x5eed,
            antithetic: false,
            estimator: LocalTimeEstimator::Bridge,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 10_000 {
            return Err(Error::invalid(format!("need at least 10^4 paths, got {}", self.paths)));
        }
        if self.steps < 1000 {
            return Err(Error::invalid(format!("need at least 10^3 time steps, got {}", self.steps)));
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthEstimate {
    pub bandwidth: f64,
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub kappa: f64,
    /// Exact-bridge estimate, or the zero-bandwidth extrapolation for the
    /// kernel estimator.
    pub estimate: f64,
    pub std_error: f64,
    pub by_bandwidth: Vec<BandwidthEstimate>,
    pub paths: u64,
    pub steps: usize,
}

const LEVELS: usize = 3;
const CHUNK: u64 = 4096;

/// Intercept weights of the least-squares line through bandwidths
/// `h, h/2, h/4`.
fn extrapolation_weights() -> [f64; LEVELS] {
    let xs = [1.0, 0.5, 0.25];
    let mean = xs.iter().sum::<f64>() / LEVELS as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let mut a = [0.0; LEVELS];
    for (ai, x) in a.iter_mut().zip(xs) {
        *ai = 1.0 / LEVELS as f64 - mean * (x - mean) / sxx;
    }
    a
}

/// Feynman-Kac estimate of the symmetrized kernel
/// `(1/n!) sum_pi E[exp(2 kappa X)] p_t(x - pi y)`, where `X` is the total
/// pair local time at zero of Brownian bridges from `x` to `pi y`.
pub fn feynman_kac_mc(
    x: &ParticleConfig,
    y: &ParticleConfig,
    t: f64,
    kappa: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    Ok(feynman_kac_mc_multi(x, y, t, &[kappa], cfg)?.remove(0))
}

/// As [`feynman_kac_mc`] for several couplings on the same paths.
pub fn feynman_kac_mc_multi(
    x: &ParticleConfig,
    y: &ParticleConfig,
    t: f64,
    kappas: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    check_pair(x, y, t)?;
    cfg.validate()?;
    if kappas.is_empty() || kappas.iter().any(|k| !k.is_finite()) {
        return Err(Error::invalid("need at least one finite coupling"));
    }
    let n = x.len();
    let perms = all_permutations(n)?;
    let h0 = cfg.bandwidth.unwrap_or(0.05 * t.sqrt());
    let sampler = PathSampler::new(x.as_slice(), y.as_slice(), t, &perms, h0, cfg);
    let chunks = cfg.paths.div_ceil(CHUNK);
    let partial: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(cfg.paths);
            let mut acc = Accumulator::new(kappas.len());
            let mut scratch = sampler.scratch();
            for path in lo..hi {
                sampler.sample(path, kappas, &mut scratch, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = Accumulator::new(kappas.len());
    for p in &partial {
        total.merge(p);
    }
    let count = cfg.paths as f64;
    let shift = sampler.reference;
    // sums are of y - shift, so a deterministic weight gives zero spread
    let stats = |s: f64, s2: f64| {
        let mean = s / count;
        let var = (s2 / count - mean * mean).max(0.0);
        (shift + mean, (var / (count - 1.0)).sqrt())
    };
    Ok(kappas
        .iter()
        .enumerate()
        .map(|(i, &kappa)| {
            let (estimate, std_error) = stats(total.sum[i], total.sum_sq[i]);
            let levels = if cfg.estimator == LocalTimeEstimator::Kernel { LEVELS } else { 0 };
            let by_bandwidth = (0..levels)
                .map(|l| {
                    let (e, s) = stats(total.level_sum[i][l], total.level_sq[i][l]);
                    BandwidthEstimate {
                        bandwidth: h0 / (1u32 << l) as f64,
                        estimate: e,
                        std_error: s,
                    }
                })
                .collect();
            McEstimate {
                kappa,
                estimate,
                std_error,
                by_bandwidth,
                paths: cfg.paths,
                steps: cfg.steps,
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
struct Accumulator {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    level_sum: Vec<[f64; LEVELS]>,
    level_sq: Vec<[f64; LEVELS]>,
}

impl Accumulator {
    fn new(k: usize) -> Self {
        Self {
            sum: vec![0.0; k],
            sum_sq: vec![0.0; k],
            level_sum: vec![[0.0; LEVELS]; k],
            level_sq: vec![[0.0; LEVELS]; k],
        }
    }

    fn merge(&mut self, o: &Self) {
        for i in 0..self.sum.len() {
            self.sum[i] += o.sum[i];
            self.sum_sq[i] += o.sum_sq[i];
            for l in 0..LEVELS {
                self.level_sum[i][l] += o.level_sum[i][l];
                self.level_sq[i][l] += o.level_sq[i][l];
            }
        }
    }
}

struct PathSampler {
    n: usize,
    t: f64,
    steps: usize,
    seed: u64,
    antithetic: bool,
    pairs: Vec<(usize, usize)>,
    // per permutation: start and end separations of each pair, free weight
    start_gap: Vec<f64>,
    end_gap: Vec<Vec<f64>>,
    free: Vec<f64>,
    bandwidths: [f64; LEVELS],
    extrapolate: [f64; LEVELS],
    estimator: LocalTimeEstimator,
    // the per-path value at zero coupling
    reference: f64,
}

struct Scratch {
    bridge: Vec<f64>,
    // occupation[sign][perm][level]; the bridge estimator uses level 0 only
    occupation: Vec<Vec<[f64; LEVELS]>>,
    // previous gap [sign][perm][pair]
    gap: Vec<Vec<Vec<f64>>>,
    // one exponential draw per pair and step, shared by permutations and signs
    draws: Vec<Option<f64>>,
}

/// Gap process `b_j - b_k` has variance rate 4, i.e. scale 2.
const GAP_SCALE: f64 = 2.0;

/// Local time at zero (occupation density) of a Brownian motion of scale
/// `GAP_SCALE` over a step of length `tau` from `a` to `b`, given the
/// exponential variate `e`. Uses
/// `P(L > l) = exp(-((|a| + |b| + l)^2 - (b - a)^2) / (2 tau))` in unit scale.
fn bridge_local_time(a: f64, b: f64, tau: f64, e: f64) -> f64 {
    let (a, b) = (a / GAP_SCALE, b / GAP_SCALE);
    let reach = a.abs() + b.abs();
    let d = b - a;
    ((d * d + 2.0 * tau * e).sqrt() - reach).max(0.0) / GAP_SCALE
}

/// Whether the step can touch zero with non-negligible probability.
fn may_touch(a: f64, b: f64, tau: f64) -> bool {
    a * b <= 0.0 || 2.0 * (a * b) / (GAP_SCALE * GAP_SCALE * tau) < 60.0
}

impl PathSampler {
    fn new(x: &[f64], y: &[f64], t: f64, perms: &[Permutation], h: f64, cfg: &McConfig) -> Self {
        let n = x.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|j| ((j + 1)..n).map(move |k| (j, k))).collect();
        let start_gap = pairs.iter().map(|&(j, k)| x[j] - x[k]).collect();
        let end_gap = perms
            .iter()
            .map(|p| pairs.iter().map(|&(j, k)| y[p.apply(j)] - y[p.apply(k)]).collect())
            .collect();
        let free: Vec<f64> = perms.iter().map(|p| permuted_free(x, y, t, p)).collect();
        let signs = if cfg.antithetic { 2 } else { 1 };
        let mut reference = 0.0;
        for _ in 0..signs {
            for f in &free {
                reference += f;
            }
        }
        reference /= (signs * free.len()) as f64;
        Self {
            n,
            t,
            steps: cfg.steps,
            seed: cfg.seed,
            antithetic: cfg.antithetic,
            pairs,
            start_gap,
            end_gap,
            free,
            bandwidths: [h, h / 2.0, h / 4.0],
            extrapolate: extrapolation_weights(),
            estimator: cfg.estimator,
            reference,
        }
    }

    fn scratch(&self) -> Scratch {
        let signs = if self.antithetic { 2 } else { 1 };
        Scratch {
            bridge: vec![0.0; self.n],
            occupation: vec![vec![[0.0; LEVELS]; self.free.len()]; signs],
            gap: vec![vec![vec![0.0; self.pairs.len()]; self.free.len()]; signs],
            draws: vec![None; self.pairs.len()],
        }
    }

    fn sample(&self, path: u64, kappas: &[f64], s: &mut Scratch, acc: &mut Accumulator) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        let k_steps = self.steps;
        let dt = self.t / k_steps as f64;
        s.bridge.iter_mut().for_each(|b| *b = 0.0);
        for occ in s.occupation.iter_mut() {
            occ.iter_mut().for_each(|o| *o = [0.0; LEVELS]);
        }
        for k in 0..=k_steps {
            if k > 0 {
                if k == k_steps {
                    s.bridge.iter_mut().for_each(|b| *b = 0.0);
                } else {
                    // exact bridge transition to s_k, pinned at t
                    let left = (k_steps - k) as f64;
                    let shrink = left / (left + 1.0);
                    let sd = (2.0 * dt * shrink).sqrt();
                    for b in s.bridge.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *b = *b * shrink + sd * z;
                    }
                }
            }
            let frac = k as f64 / k_steps as f64;
            match self.estimator {
                LocalTimeEstimator::Kernel => {
                    let w = if k == 0 || k == k_steps { 0.5 * dt } else { dt };
                    for (sign_idx, occ) in s.occupation.iter_mut().enumerate() {
                        let sign = if sign_idx == 0 { 1.0 } else { -1.0 };
                        for (p, occ_p) in occ.iter_mut().enumerate() {
                            for (q, &(j, l)) in self.pairs.iter().enumerate() {
                                let drift = self.start_gap[q] * (1.0 - frac) + self.end_gap[p][q] * frac;
                                let gap = (drift + sign * (s.bridge[j] - s.bridge[l])).abs();
                                for (lvl, &h) in self.bandwidths.iter().enumerate() {
                                    if gap <= h {
                                        occ_p[lvl] += w;
                                    }
                                }
                            }
                        }
                    }
                }
                LocalTimeEstimator::Bridge => {
                    s.draws.iter_mut().for_each(|d| *d = None);
                    for sign_idx in 0..s.occupation.len() {
                        let sign = if sign_idx == 0 { 1.0 } else { -1.0 };
                        for p in 0..self.free.len() {
                            for (q, &(j, l)) in self.pairs.iter().enumerate() {
                                let drift = self.start_gap[q] * (1.0 - frac) + self.end_gap[p][q] * frac;
                                let gap = drift + sign * (s.bridge[j] - s.bridge[l]);
                                let prev = std::mem::replace(&mut s.gap[sign_idx][p][q], gap);
                                if k == 0 || !may_touch(prev, gap, dt) {
                                    continue;
                                }
                                let e = *s.draws[q].get_or_insert_with(|| {
                                    let u: f64 = rand::Rng::gen(&mut rng);
                                    -(1.0 - u).ln()
                                });
                                s.occupation[sign_idx][p][0] += bridge_local_time(prev, gap, dt, e);
                            }
                        }
                    }
                }
            }
        }
        let signs = s.occupation.len() as f64;
        let perms = self.free.len() as f64;
        let norm = signs * perms;
        for (i, &kappa) in kappas.iter().enumerate() {
            let y = match self.estimator {
                LocalTimeEstimator::Bridge => {
                    let mut total = 0.0;
                    for occ in &s.occupation {
                        for (p, occ_p) in occ.iter().enumerate() {
                            total += self.free[p] * (2.0 * kappa * occ_p[0]).exp();
                        }
                    }
                    total / norm
                }
                LocalTimeEstimator::Kernel => {
                    let mut total = 0.0;
                    let mut levels = [0.0; LEVELS];
                    for occ in &s.occupation {
                        for (p, occ_p) in occ.iter().enumerate() {
                            for lvl in 0..LEVELS {
                                let local_time = occ_p[lvl] / (2.0 * self.bandwidths[lvl]);
                                let v = self.free[p] * (2.0 * kappa * local_time).exp();
                                levels[lvl] += v;
                                total += self.extrapolate[lvl] * v;
                            }
                        }
                    }
                    for lvl in 0..LEVELS {
                        let v = levels[lvl] / norm - self.reference;
                        acc.level_sum[i][lvl] += v;
                        acc.level_sq[i][lvl] += v * v;
                    }
                    total / norm
                }
            };
            let y = y - self.reference;
            acc.sum[i] += y;
            acc.sum_sq[i] += y * y;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(v: &[f64]) -> ParticleConfig {
        ParticleConfig::new(v.to_vec()).unwrap()
    }

    #[test]
    fn free_kernel_values() {
        let one = free_propagator(&cfg(&[0.2]), &cfg(&[0.2]), 1.0).unwrap();
        assert_relative_eq!(one, 1.0 / (4.0 * PI).sqrt(), max_relative = 1e-15);
        let two = free_propagator(&cfg(&[0.0, 0.0]), &cfg(&[0.0, 0.0]), 1.0).unwrap();
        assert_relative_eq!(two, 1.0 / (4.0 * PI), max_relative = 1e-15);
        // six explicit terms
        let (x, y, t) = ([-0.5, 0.1, 0.7], [-0.2, 0.3, 0.4], 0.6);
        let p = |a: f64, b: f64| heat_kernel(a - b, t);
        let idx = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let brute: f64 = idx
            .iter()
            .map(|s| p(x[0], y[s[0]]) * p(x[1], y[s[1]]) * p(x[2], y[s[2]]))
            .sum::<f64>()
            / 6.0;
        assert_relative_eq!(free_propagator(&cfg(&x), &cfg(&y), t).unwrap(), brute, max_relative = 1e-14);
        assert!(free_propagator(&cfg(&x), &cfg(&y), 0.0).is_err());
    }

    #[test]
    fn extrapolation_weights_reproduce_lines() {
        let a = extrapolation_weights();
        assert_relative_eq!(a.iter().sum::<f64>(), 1.0, max_relative = 1e-14);
        // intercept of 3 + 2h is 3
        let v: f64 = a.iter().zip([1.0, 0.5, 0.25]).map(|(w, h)| w * (3.0 + 2.0 * h)).sum();
        assert_relative_eq!(v, 3.0, max_relative = 1e-14);
    }

    #[test]
    fn pde_free_limit() {
        let x = cfg(&[-0.1, 0.3]);
        let y = cfg(&[0.0, 0.5]);
        let pde = pde_propagator_n2(&x, &y, 0.5, 0.0, &PdeConfig::default()).unwrap();
        let free = free_propagator(&x, &y, 0.5).unwrap();
        assert!((pde.value - free).abs() < 1e-4, "{} vs {free}", pde.value);
        let x = cfg(&[0.0, 0.0]);
        let pde = pde_propagator_n2(&x, &x, 1.0, 0.0, &PdeConfig::default()).unwrap();
        assert!((pde.value - 1.0 / (4.0 * PI)).abs() < 1e-4);
    }

    #[test]
    fn pde_rejects_narrow_domain() {
        let x = cfg(&[0.0, 0.0]);
        let c = PdeConfig {
            half_width: Some(1.0),
            ..PdeConfig::default()
        };
        assert!(matches!(pde_propagator_n2(&x, &x, 1.0, 1.0, &c), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pde_flags_coarse_grid() {
        let x = cfg(&[0.0, 0.0]);
        let c = PdeConfig {
            du: 0.2,
            dtau: 0.2,
            half_width: None,
            tol: 1e-9,
        };
        assert!(matches!(pde_propagator_n2(&x, &x, 1.0, 1.0, &c), Err(Error::NumericalFailure { .. })));
    }

    fn small_mc() -> McConfig {
        McConfig {
            paths: 10_000,
            steps: 1000,
            ..McConfig::default()
        }
    }

    #[test]
    fn mc_zero_coupling_is_exact() {
        let x = cfg(&[-0.2, 0.3]);
        let y = cfg(&[0.0, 0.1]);
        let r = feynman_kac_mc(&x, &y, 0.5, 0.0, &small_mc()).unwrap();
        assert_relative_eq!(r.estimate, free_propagator(&x, &y, 0.5).unwrap(), max_relative = 1e-12);
        assert!(r.std_error < 1e-12);
    }

    #[test]
    fn mc_is_deterministic_and_monotone_in_coupling() {
        let x = cfg(&[0.0, 0.0]);
        let c = small_mc();
        let a = feynman_kac_mc_multi(&x, &x, 0.5, &[-1.0, -0.5, 0.5, 1.0], &c).unwrap();
        let b = feynman_kac_mc_multi(&x, &x, 0.5, &[-1.0, -0.5, 0.5, 1.0], &c).unwrap();
        assert_eq!(a, b);
        for w in a.windows(2) {
            assert!(w[0].estimate < w[1].estimate);
        }
        let single = feynman_kac_mc(&x, &x, 0.5, 0.5, &c).unwrap();
        assert_eq!(single, a[2]);
        let kernel = McConfig {
            estimator: LocalTimeEstimator::Kernel,
            ..c
        };
        let k = feynman_kac_mc_multi(&x, &x, 0.5, &[-1.0, -0.5, 0.5, 1.0], &kernel).unwrap();
        for w in k.windows(2) {
            for l in 0..LEVELS {
                assert!(w[0].by_bandwidth[l].estimate < w[1].by_bandwidth[l].estimate);
            }
        }
    }

    #[test]
    fn bridge_local_time_law() {
        // same-sign endpoints far from zero never touch
        assert!(!may_touch(3.0, 3.0, 1e-3));
        assert_eq!(bridge_local_time(0.5, 0.5, 1e-3, 0.0), 0.0);
        // from zero to zero the local time is sqrt(2 tau E) in unit scale
        let l = bridge_local_time(0.0, 0.0, 0.5, 2.0);
        assert_relative_eq!(l, (2.0 * 0.5 * 2.0f64).sqrt() / GAP_SCALE, max_relative = 1e-15);
    }

    #[test]
    fn bridge_local_time_mean_matches_closed_form() {
        // unit-scale bridge 0 -> 0 over tau: E[L] = sqrt(pi tau / 2)
        let tau = 0.3;
        let m = 200_000;
        let mean: f64 = (0..m)
            .map(|i| {
                let u = (i as f64 + 0.5) / m as f64;
                bridge_local_time(0.0, 0.0, tau, -(1.0 - u).ln()) * GAP_SCALE
            })
            .sum::<f64>()
            / m as f64;
        assert_relative_eq!(mean, (PI * tau / 2.0).sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn mc_antithetic_runs() {
        let x = cfg(&[0.0, 0.2]);
        let c = McConfig {
            antithetic: true,
            ..small_mc()
        };
        let r = feynman_kac_mc(&x, &x, 0.5, 0.5, &c).unwrap();
        assert!(r.estimate > free_propagator(&x, &x, 0.5).unwrap());
    }

    #[test]
    fn mc_config_validation() {
        let x = cfg(&[0.0, 0.0]);
        let bad = McConfig {
            paths: 10,
            ..McConfig::default()
        };
        assert!(feynman_kac_mc(&x, &x, 0.5, 0.5, &bad).is_err());
        let bad = McConfig {
            bandwidth: Some(0.0),
            ..small_mc()
        };
        assert!(feynman_kac_mc(&x, &x, 0.5, 0.5, &bad).is_err());
    }
}
