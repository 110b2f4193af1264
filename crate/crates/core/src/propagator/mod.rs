//! Exact evaluators of the imaginary-time propagator on the ordered sector
//! and the long-time decay-rate extractor.
//!
//! All evaluators reduce to Gaussian-weighted momentum integrals; see
//! [`kernel`] for the shared quadrature machinery.

mod kernel;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    all_permutations, enumerate_compositions, enumerate_partitions,
    enumerate_restricted_permutations, Composition, Permutation, PermutationClass,
};
use crate::error::{Error, Result};
use crate::particles::ParticleConfig;
use crate::quadrature::{gauss_legendre_nodes, CompensatedSum};

use kernel::{DeterminantKernel, GridDesign, KernelBuilder, Term};

/// Largest particle number accepted by the momentum-integral evaluators.
pub const MAX_N: usize = 4;
/// Largest particle number for the partition form.
pub const MAX_N_PARTITION: usize = 3;
/// Largest particle number for the coincident-endpoint formula.
pub const MAX_N_ZERO_POINT: usize = 8;
/// Default absolute tolerance target.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Node count times `M^3`, summed over compositions, accepted by the
/// zero-point evaluator.
pub const ZERO_POINT_BUDGET: u64 = 20_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(rename = "tw")]
    TwRepulsive,
    #[serde(rename = "eigen")]
    EigenRepulsive,
    Thm1,
    Thm2,
    #[serde(rename = "partition")]
    PartitionForm,
    ZeroPoint,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::TwRepulsive,
        Method::EigenRepulsive,
        Method::Thm1,
        Method::Thm2,
        Method::PartitionForm,
        Method::ZeroPoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::TwRepulsive => "tw",
            Method::EigenRepulsive => "eigen",
            Method::Thm1 => "thm1",
            Method::Thm2 => "thm2",
            Method::PartitionForm => "partition",
            Method::ZeroPoint => "zero-point",
        }
    }

    pub fn is_repulsive(self) -> bool {
        matches!(self, Method::TwRepulsive | Method::EigenRepulsive)
    }

    /// Whether the method accepts coupling `kappa`.
    pub fn accepts(self, kappa: f64) -> bool {
        if self.is_repulsive() {
            kappa <= 0.0
        } else {
            kappa > 0.0
        }
    }

    pub fn allowed_for(kappa: f64) -> Vec<Method> {
        Self::ALL.into_iter().filter(|m| m.accepts(kappa)).collect()
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .or(match key.as_str() {
                "tw-repulsive" => Some(Method::TwRepulsive),
                "eigen-repulsive" => Some(Method::EigenRepulsive),
                "partition-form" => Some(Method::PartitionForm),
                _ => None,
            })
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
                Error::invalid(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorQuery {
    pub x: ParticleConfig,
    pub y: ParticleConfig,
    pub t: f64,
    pub kappa: f64,
    pub method: Method,
    pub tol: f64,
}

impl PropagatorQuery {
    pub fn new(x: ParticleConfig, y: ParticleConfig, t: f64, kappa: f64, method: Method) -> Result<Self> {
        let q = Self {
            x,
            y,
            t,
            kappa,
            method,
            tol: DEFAULT_TOL,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        self.tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(Error::invalid(format!(
                "x has {} particles but y has {}",
                self.x.len(),
                self.y.len()
            )));
        }
        if self.x.is_empty() {
            return Err(Error::invalid("need at least one particle"));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::invalid(format!("time must be positive and finite, got {}", self.t)));
        }
        if !self.kappa.is_finite() {
            return Err(Error::invalid("coupling must be finite"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::invalid(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if !self.method.accepts(self.kappa) {
            let allowed: Vec<&str> = Method::allowed_for(self.kappa).iter().map(|m| m.name()).collect();
            return Err(Error::invalid(format!(
                "method {} does not accept kappa = {}; allowed: {}",
                self.method,
                self.kappa,
                allowed.join(", ")
            )));
        }
        let cap = match self.method {
            Method::PartitionForm => MAX_N_PARTITION,
            Method::ZeroPoint => MAX_N_ZERO_POINT,
            _ => MAX_N,
        };
        if self.n() > cap {
            return Err(Error::invalid(format!(
                "method {} supports n <= {cap}, got n = {}",
                self.method,
                self.n()
            )));
        }
        if self.method == Method::ZeroPoint && !(self.x.is_origin() && self.y.is_origin()) {
            return Err(Error::invalid("zero-point method requires x = y = 0"));
        }
        Ok(())
    }

    fn design(&self) -> f64 {
        (self.tol * 1e-2).clamp(1e-15, 1e-4)
    }
}

/// Choice of the contour offsets `mu_j` in the double-permutation form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum MuRule {
    /// `mu_j = -(n_j - 1)/2`.
    #[default]
    Symmetric,
    /// `mu_j = 0`.
    Zero,
    /// `mu_j = -fraction * n_j`, `0 <= fraction < 1`.
    Scaled { fraction: f64 },
    /// Per-composition values; compositions not listed use the symmetric rule.
    Explicit { entries: Vec<MuEntry> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuEntry {
    pub parts: Vec<usize>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Thm1Config {
    #[serde(default)]
    pub mu: MuRule,
}

impl Thm1Config {
    pub fn mu_for(&self, c: &Composition) -> Result<Vec<f64>> {
        let symmetric = || c.parts().iter().map(|&nj| -(nj as f64 - 1.0) / 2.0).collect();
        let mu: Vec<f64> = match &self.mu {
            MuRule::Symmetric => symmetric(),
            MuRule::Zero => vec![0.0; c.m()],
            MuRule::Scaled { fraction } => {
                if !(0.0..1.0).contains(fraction) {
                    return Err(Error::invalid(format!("mu fraction must lie in [0, 1), got {fraction}")));
                }
                c.parts().iter().map(|&nj| -fraction * nj as f64).collect()
            }
            MuRule::Explicit { entries } => match entries.iter().find(|e| e.parts == c.parts()) {
                Some(e) => e.mu.clone(),
                None => symmetric(),
            },
        };
        if mu.len() != c.m() {
            return Err(Error::invalid(format!("mu for {c} has length {}, expected {}", mu.len(), c.m())));
        }
        for (&m, &nj) in mu.iter().zip(c.parts()) {
            if !(m <= 0.0 && m > -(nj as f64)) {
                return Err(Error::invalid(format!(
                    "mu = {m} violates -{nj} < mu <= 0 for composition {c}"
                )));
            }
        }
        Ok(mu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PartitionFormConfig {
    /// Contour depths; the first `M` entries are used for `M` blocks.
    /// `None` uses `j/(M+1)`, `j = 1..M`.
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
}

impl PartitionFormConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let Some(eps) = &self.eps else {
            return Ok(());
        };
        if eps.len() < n {
            return Err(Error::invalid(format!("eps needs at least {n} entries, got {}", eps.len())));
        }
        for (i, &e) in eps.iter().enumerate() {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::invalid(format!("eps[{i}] = {e} outside [0, 1)")));
            }
            if eps[..i].contains(&e) {
                return Err(Error::invalid(format!("eps entries must be distinct, {e} repeats")));
            }
        }
        Ok(())
    }

    fn depths(&self, m: usize) -> Vec<f64> {
        match &self.eps {
            Some(e) => e[..m].to_vec(),
            None => (1..=m).map(|j| j as f64 / (m as f64 + 1.0)).collect(),
        }
    }
}

/// Method-specific settings accepted by [`evaluate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalOptions {
    #[serde(default)]
    pub thm1: Thm1Config,
    #[serde(default)]
    pub partition: PartitionFormConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub parts: Vec<usize>,
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub imag_residue: f64,
    pub method: Method,
    pub evaluations: u64,
    pub components: Vec<Component>,
}

impl PropagatorResult {
    fn assemble(method: Method, components: Vec<Component>) -> Self {
        let value = components.iter().map(|c| c.value).collect::<CompensatedSum>().value();
        let error_estimate = components.iter().map(|c| c.error_estimate).sum();
        let evaluations = components.iter().map(|c| c.evaluations).sum();
        for c in &components {
            log::debug!("{method} component {:?}: {} +- {:e}", c.parts, c.value, c.error_estimate);
        }
        Self {
            value,
            error_estimate,
            imag_residue: value.im.abs(),
            method,
            evaluations,
            components,
        }
    }

    pub fn real(&self) -> f64 {
        self.value.re
    }
}

/// Dispatch on `query.method`.
pub fn evaluate(query: &PropagatorQuery, options: &EvalOptions) -> Result<PropagatorResult> {
    query.validate()?;
    match query.method {
        Method::TwRepulsive => propagator_tw_repulsive(query),
        Method::EigenRepulsive => propagator_eigen_repulsive(query),
        Method::Thm1 => propagator_thm1(query, &options.thm1),
        Method::Thm2 => propagator_thm2(query),
        Method::PartitionForm => propagator_partition_form(query, &options.partition),
        Method::ZeroPoint => propagator_zero_point(query.n(), query.t, query.kappa, query.tol),
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn expect_method(query: &PropagatorQuery, method: Method) -> Result<()> {
    let mut q = query.clone();
    q.method = method;
    q.validate()
}

fn component(parts: &[usize], r: crate::quadrature::IntegralResult) -> Component {
    Component {
        parts: parts.to_vec(),
        value: r.value,
        error_estimate: r.error_estimate,
        evaluations: r.evaluations,
    }
}

/// Position maps `sigma^{-1}` of a permutation class.
fn position_maps(c: &Composition, class: PermutationClass) -> Result<Vec<Permutation>> {
    Ok(enumerate_restricted_permutations(c, class)?
        .iter()
        .map(Permutation::inverse)
        .collect())
}

/// Phase `exp(sum_a (i u_{j(a)} - omega_a) * sign * z[pos(a)])` for one
/// permutation of the positions `z`.
fn placed_phase(
    b: &mut KernelBuilder,
    c: &Composition,
    z: &[f64],
    pos: &Permutation,
    omega: &[f64],
    sign: f64,
) -> u32 {
    let cluster = c.cluster_of();
    let mut p = vec![0.0; c.m()];
    let mut log = 0.0;
    for a in 0..c.n() {
        let v = sign * z[pos.apply(a)];
        p[cluster[a]] += v;
        log -= omega[a] * v;
    }
    b.phase(p, log.into())
}

/// Gaussian cross term `exp(-2 i t u_j omega_a + t omega_a^2)` summed over particles.
fn offset_base(c: &Composition, omega: &[f64], t: f64) -> (Vec<f64>, f64) {
    let cluster = c.cluster_of();
    let mut p = vec![0.0; c.m()];
    for (a, w) in omega.iter().enumerate() {
        p[cluster[a]] -= 2.0 * t * w;
    }
    (p, t * omega.iter().map(|w| w * w).sum::<f64>())
}

/// Repulsive propagator as the symmetrized sum over `S_n` with scattering
/// factors on inversions. Contours are lifted to
/// `Im q_a = lambda((n+1)/2 - a)`, which keeps the poles a distance
/// `|kappa| + lambda` from the grid.
pub fn propagator_tw_repulsive(query: &PropagatorQuery) -> Result<PropagatorResult> {
    expect_method(query, Method::TwRepulsive)?;
    let n = query.n();
    let (x, y, t, kappa) = (query.x.as_slice(), query.y.as_slice(), query.t, query.kappa);
    let c = Composition::singletons(n);
    let span = |z: &[f64]| z[n - 1] - z[0];
    let lambda = 1.0f64.min(t.sqrt().recip()).min(4.0 / (1.0 + span(x) + span(y)));
    let omega: Vec<f64> = (0..n).map(|a| lambda * ((n as f64 - 1.0) / 2.0 - a as f64)).collect();
    let mut b = KernelBuilder::new(c.parts());
    let ident = Permutation::identity(n);
    let mut terms = Vec::new();
    for sigma in all_permutations(n)? {
        // particle a sits at position sigma^{-1}(a); endpoint y_a is fixed
        let pos = sigma.inverse();
        let xs = placed_phase(&mut b, &c, x, &pos, &omega, 1.0);
        let ys = placed_phase(&mut b, &c, y, &ident, &omega, -1.0);
        let mut ratios = Vec::new();
        for j in 0..n {
            for k in (j + 1)..n {
                let (a, bb) = (sigma.apply(j), sigma.apply(k));
                if a > bb {
                    let d = omega[a] - omega[bb];
                    ratios.extend(b.ratio(a, bb, d - kappa, d + kappa));
                }
            }
        }
        terms.push(Term {
            coef: 1.0.into(),
            phases: vec![xs, ys],
            ratios,
        });
    }
    b.push_group(terms);
    let (base_p, base_log) = offset_base(&c, &omega, t);
    let pref = 1.0 / (factorial(n) * (2.0 * PI).powi(n as i32));
    let k = b
        .build(t, base_p, base_log.into(), pref)
        .with_guard(1e-7 * kappa.abs());
    let design = GridDesign {
        tol: query.design(),
        pole_distance: if kappa == 0.0 { f64::INFINITY } else { kappa.abs() + lambda },
    };
    let r = k.integrate(design)?;
    Ok(PropagatorResult::assemble(Method::TwRepulsive, vec![component(c.parts(), r)]))
}

/// Repulsive propagator as the eigenfunction expansion over real momenta.
pub fn propagator_eigen_repulsive(query: &PropagatorQuery) -> Result<PropagatorResult> {
    expect_method(query, Method::EigenRepulsive)?;
    let n = query.n();
    let (x, y, t, kappa) = (query.x.as_slice(), query.y.as_slice(), query.t, query.kappa);
    let c = Composition::singletons(n);
    let zero = vec![0.0; n];
    let mut b = KernelBuilder::new(c.parts());
    let side = |b: &mut KernelBuilder, z: &[f64], sign: f64| -> Result<Vec<Term>> {
        let mut terms = Vec::new();
        for sigma in all_permutations(n)? {
            let pos = sigma.inverse();
            let ph = placed_phase(b, &c, z, &pos, &zero, sign);
            let mut ratios = Vec::new();
            for j in 0..n {
                for k in (j + 1)..n {
                    if pos.apply(j) > pos.apply(k) {
                        ratios.extend(b.ratio(j, k, sign * kappa, -sign * kappa));
                    }
                }
            }
            terms.push(Term {
                coef: 1.0.into(),
                phases: vec![ph],
                ratios,
            });
        }
        Ok(terms)
    };
    let xs = side(&mut b, x, 1.0)?;
    let ys = side(&mut b, y, -1.0)?;
    b.push_group(xs);
    b.push_group(ys);
    let nf = factorial(n);
    let pref = 1.0 / (nf * nf * (2.0 * PI).powi(n as i32));
    let k = b
        .build(t, vec![0.0; n], 0.0.into(), pref)
        .with_guard(1e-7 * kappa.abs());
    let design = GridDesign {
        tol: query.design(),
        pole_distance: if kappa == 0.0 { f64::INFINITY } else { kappa.abs() },
    };
    let r = k.integrate(design)?;
    Ok(PropagatorResult::assemble(Method::EigenRepulsive, vec![component(c.parts(), r)]))
}

fn cluster_prefactor_sq(c: &Composition, kappa: f64) -> f64 {
    let blocks: f64 = c
        .parts()
        .iter()
        .map(|&nj| factorial(nj) * factorial(nj - 1))
        .product();
    kappa.powi((c.n() - c.m()) as i32) * blocks / factorial(c.n())
}

/// Attractive propagator, double-permutation form with contour offsets `mu`.
pub fn propagator_thm1(query: &PropagatorQuery, cfg: &Thm1Config) -> Result<PropagatorResult> {
    expect_method(query, Method::Thm1)?;
    let n = query.n();
    let mut components = Vec::new();
    for c in enumerate_compositions(n)? {
        let mu = cfg.mu_for(&c)?;
        components.push(thm1_component(query, &c, &mu)?);
    }
    Ok(PropagatorResult::assemble(Method::Thm1, components))
}

fn thm1_component(query: &PropagatorQuery, c: &Composition, mu: &[f64]) -> Result<Component> {
    let (x, y, t, kappa) = (query.x.as_slice(), query.y.as_slice(), query.t, query.kappa);
    let n = c.n();
    let m = c.m();
    let cluster = c.cluster_of();
    let ranks = c.ranks();
    let omega: Vec<f64> = (0..n)
        .map(|a| kappa * (mu[cluster[a]] + ranks[a] as f64 - 1.0))
        .collect();
    let sig = position_maps(c, PermutationClass::Increasing)?;
    let tau = position_maps(c, PermutationClass::Decreasing)?;
    let mut b = KernelBuilder::new(c.parts());
    let xs: Vec<u32> = sig.iter().map(|ps| placed_phase(&mut b, c, x, ps, &omega, 1.0)).collect();
    let ys: Vec<u32> = tau.iter().map(|pt| placed_phase(&mut b, c, y, pt, &omega, -1.0)).collect();
    let mut terms = Vec::with_capacity(sig.len() * tau.len());
    for (ps, &xp) in sig.iter().zip(&xs) {
        for (pt, &yp) in tau.iter().zip(&ys) {
            let mut ratios = Vec::new();
            for a in 0..n {
                for bb in 0..n {
                    if cluster[a] != cluster[bb] && ps.apply(a) > ps.apply(bb) && pt.apply(a) < pt.apply(bb) {
                        let d = omega[a] - omega[bb];
                        ratios.extend(b.ratio(cluster[a], cluster[bb], d + kappa, d - kappa));
                    }
                }
            }
            terms.push(Term {
                coef: 1.0.into(),
                phases: vec![xp, yp],
                ratios,
            });
        }
    }
    b.push_group(terms);
    let (base_p, base_log) = offset_base(c, &omega, t);
    let pref = cluster_prefactor_sq(c, kappa) / (factorial(m) * (2.0 * PI).powi(m as i32));
    let k = b.build(t, base_p, base_log.into(), pref).with_guard(1e-7 * kappa);
    let parts = c.parts();
    let mut pole = f64::INFINITY;
    for j in 0..m {
        for l in (j + 1)..m {
            let (nj, nl) = (parts[j] as f64, parts[l] as f64);
            pole = pole
                .min(kappa * (mu[l] + nl - mu[j]))
                .min(kappa * (mu[j] + nj - mu[l]));
        }
    }
    let r = k.integrate(GridDesign {
        tol: query.design(),
        pole_distance: pole,
    })?;
    Ok(component(parts, r))
}

/// Attractive propagator as the expansion over string eigenstates.
pub fn propagator_thm2(query: &PropagatorQuery) -> Result<PropagatorResult> {
    expect_method(query, Method::Thm2)?;
    let n = query.n();
    let mut components = Vec::new();
    for c in enumerate_compositions(n)? {
        components.push(thm2_component(query, &c)?);
    }
    Ok(PropagatorResult::assemble(Method::Thm2, components))
}

fn thm2_component(query: &PropagatorQuery, c: &Composition) -> Result<Component> {
    let (x, y, t, kappa) = (query.x.as_slice(), query.y.as_slice(), query.t, query.kappa);
    let n = c.n();
    let m = c.m();
    let cluster = c.cluster_of();
    let ranks = c.ranks();
    let parts = c.parts();
    // plane-wave and scattering offsets of the string, in units of kappa
    let wave: Vec<f64> = (0..n)
        .map(|a| ranks[a] as f64 - parts[cluster[a]] as f64 / 2.0 - 0.5)
        .collect();
    let omega: Vec<f64> = wave.iter().map(|s| kappa * s).collect();
    let conj_omega: Vec<f64> = omega.iter().map(|w| -w).collect();
    let sig = position_maps(c, PermutationClass::Increasing)?;
    let mut b = KernelBuilder::new(parts);
    let side = |b: &mut KernelBuilder, z: &[f64], sign: f64| -> Vec<Term> {
        let om = if sign > 0.0 { &omega } else { &conj_omega };
        sig.iter()
            .map(|ps| {
                let ph = placed_phase(b, c, z, ps, om, sign);
                let mut ratios = Vec::new();
                for a in 0..n {
                    for bb in (a + 1)..n {
                        if cluster[a] < cluster[bb] && ps.apply(a) > ps.apply(bb) {
                            let d = kappa * (wave[a] - wave[bb]);
                            ratios.extend(b.ratio(cluster[a], cluster[bb], sign * (d + kappa), sign * (d - kappa)));
                        }
                    }
                }
                Term {
                    coef: 1.0.into(),
                    phases: vec![ph],
                    ratios,
                }
            })
            .collect()
    };
    let xs = side(&mut b, x, 1.0);
    let ys = side(&mut b, y, -1.0);
    b.push_group(xs);
    b.push_group(ys);
    let growth = t * kappa * kappa * parts.iter().map(|&v| (v.pow(3) - v) as f64).sum::<f64>() / 12.0;
    let pref = cluster_prefactor_sq(c, kappa) / (factorial(m) * (2.0 * PI).powi(m as i32));
    let k = b.build(t, vec![0.0; m], growth.into(), pref).with_guard(1e-7 * kappa);
    let mut pole = f64::INFINITY;
    for j in 0..m {
        for l in (j + 1)..m {
            pole = pole.min(kappa * (parts[j] + parts[l]) as f64 / 2.0);
        }
    }
    let r = k.integrate(GridDesign {
        tol: query.design(),
        pole_distance: pole,
    })?;
    Ok(component(parts, r))
}

/// Attractive propagator as a sum over set partitions of the particle
/// labels, with block momenta on the contours `R - i kappa eps_j`.
pub fn propagator_partition_form(query: &PropagatorQuery, cfg: &PartitionFormConfig) -> Result<PropagatorResult> {
    expect_method(query, Method::PartitionForm)?;
    let n = query.n();
    cfg.validate(n)?;
    let mut components = Vec::new();
    for c in enumerate_compositions(n)? {
        components.push(partition_component(query, &c, &cfg.depths(c.m()))?);
    }
    Ok(PropagatorResult::assemble(Method::PartitionForm, components))
}

fn partition_component(query: &PropagatorQuery, c: &Composition, eps: &[f64]) -> Result<Component> {
    let (x, y, t, kappa) = (query.x.as_slice(), query.y.as_slice(), query.t, query.kappa);
    let n = c.n();
    let m = c.m();
    let perms = all_permutations(n)?;
    let mut b = KernelBuilder::new(c.parts());
    let mut terms = Vec::new();
    let mut base = None;
    let mut pole = f64::INFINITY;
    let ident = Permutation::identity(n);
    // every ordered partition into blocks of sizes c.parts(); the 1/M! below
    // turns the sum over orderings into one over unordered partitions
    for partition in enumerate_partitions(c)? {
        for blocks in partition.arrangements(c) {
            let mut block_of = vec![0usize; n];
            for (j, blk) in blocks.iter().enumerate() {
                for &a in blk {
                    block_of[a] = j;
                }
            }
            let down = crate::combinatorics::down_ranks(&blocks, n);
            let omega: Vec<f64> = (0..n).map(|a| kappa * (down[a] as f64 - eps[block_of[a]])).collect();
            // blocks act as clusters: particle a carries momentum u_{block_of[a]}
            let labels = BlockLabels { block_of: &block_of, m };
            let yp = labels.phase(&mut b, y, &ident, &omega, -1.0);
            if base.is_none() {
                base = Some(labels.base(&omega, t));
            }
            for sigma in &perms {
                let pos = sigma.inverse();
                let same_block_ok = (0..n).all(|a| {
                    ((a + 1)..n).all(|bb| block_of[a] != block_of[bb] || pos.apply(a) > pos.apply(bb))
                });
                if !same_block_ok {
                    continue;
                }
                let xp = labels.phase(&mut b, x, &pos, &omega, 1.0);
                let mut ratios = Vec::new();
                for a in 0..n {
                    for bb in (a + 1)..n {
                        if block_of[a] != block_of[bb] && pos.apply(a) > pos.apply(bb) {
                            let d = omega[a] - omega[bb];
                            pole = pole.min((d - kappa).abs());
                            ratios.extend(b.ratio(block_of[a], block_of[bb], d + kappa, d - kappa));
                        }
                    }
                }
                terms.push(Term {
                    coef: 1.0.into(),
                    phases: vec![xp, yp],
                    ratios,
                });
            }
        }
    }
    b.push_group(terms);
    let (base_p, base_log) = base.expect("at least one partition");
    let pref = cluster_prefactor_sq(c, kappa) / (factorial(m) * (2.0 * PI).powi(m as i32));
    let k = b.build(t, base_p, base_log.into(), pref).with_guard(1e-7 * kappa);
    let r = k.integrate(GridDesign {
        tol: query.design(),
        pole_distance: pole,
    })?;
    Ok(component(c.parts(), r))
}

struct BlockLabels<'a> {
    block_of: &'a [usize],
    m: usize,
}

impl BlockLabels<'_> {
    fn phase(&self, b: &mut KernelBuilder, z: &[f64], pos: &Permutation, omega: &[f64], sign: f64) -> u32 {
        let mut p = vec![0.0; self.m];
        let mut log = 0.0;
        for (a, &j) in self.block_of.iter().enumerate() {
            let v = sign * z[pos.apply(a)];
            p[j] += v;
            log -= omega[a] * v;
        }
        b.phase(p, log.into())
    }

    fn base(&self, omega: &[f64], t: f64) -> (Vec<f64>, f64) {
        let mut p = vec![0.0; self.m];
        for (a, &j) in self.block_of.iter().enumerate() {
            p[j] -= 2.0 * t * omega[a];
        }
        (p, t * omega.iter().map(|w| w * w).sum::<f64>())
    }
}

/// Attractive propagator at coincident endpoints `x = y = 0` as a sum of
/// Cauchy-determinant integrals.
pub fn propagator_zero_point(n: usize, t: f64, kappa: f64, tol: f64) -> Result<PropagatorResult> {
    if n == 0 {
        return Err(Error::invalid("need at least one particle"));
    }
    let origin = ParticleConfig::origin(n);
    let query = PropagatorQuery {
        x: origin.clone(),
        y: origin,
        t,
        kappa,
        method: Method::ZeroPoint,
        tol,
    };
    query.validate()?;
    let mut kernels = Vec::new();
    let mut cost = 0u64;
    for c in enumerate_compositions(n)? {
        let parts = c.parts();
        let m = c.m();
        let growth = t * kappa * kappa * parts.iter().map(|&v| (v.pow(3) - v) as f64).sum::<f64>() / 12.0;
        let pref = factorial(n) * kappa.powi(n as i32) / (factorial(m) * (2.0 * PI).powi(m as i32)) * growth.exp();
        let mut pole = f64::INFINITY;
        for j in 0..m {
            for l in (j + 1)..m {
                pole = pole.min(kappa * (parts[j] + parts[l]) as f64 / 2.0);
            }
        }
        let k = DeterminantKernel::new(parts, t, kappa, pref);
        let design = GridDesign {
            tol: query.design(),
            pole_distance: pole,
        };
        cost = cost.saturating_add(k.cost(design)?);
        kernels.push((c.clone(), k, design));
    }
    if cost > ZERO_POINT_BUDGET {
        return Err(Error::resource(format!(
            "zero-point sum for n = {n} at tol {tol:e} needs about {cost:e} operations, over the budget of \
             {ZERO_POINT_BUDGET:e}; loosen tol"
        )));
    }
    let mut components = Vec::new();
    for (c, k, design) in kernels {
        components.push(component(c.parts(), k.integrate(design)?));
    }
    Ok(PropagatorResult::assemble(Method::ZeroPoint, components))
}

/// Least-squares slope of `-log P(0, 0, t)` over `t_grid`.
pub fn decay_rate(n: usize, kappa: f64, method: Method, t_grid: &[f64], tol: f64) -> Result<f64> {
    Ok(decay_rate_points(n, kappa, method, t_grid, tol)?.0)
}

/// As [`decay_rate`], also returning `-log P(0, 0, t)` at each grid time.
pub fn decay_rate_points(
    n: usize,
    kappa: f64,
    method: Method,
    t_grid: &[f64],
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(kappa > 0.0) {
        return Err(Error::invalid(format!("decay rate needs kappa > 0, got {kappa}")));
    }
    if t_grid.len() < 4 {
        return Err(Error::invalid("decay rate needs at least 4 times"));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    let floor = 2.0 / (kappa * kappa);
    if t_grid[0] < floor {
        return Err(Error::invalid(format!("decay rate needs t >= 2/kappa^2 = {floor}")));
    }
    let mut logs = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let p = point_value(n, t, kappa, method, tol)?;
        if !(p > 0.0) {
            return Err(Error::numerical(format!("propagator value {p} at t = {t} is not positive")));
        }
        logs.push(-p.ln());
    }
    Ok((least_squares_slope(t_grid, &logs), logs))
}

fn point_value(n: usize, t: f64, kappa: f64, method: Method, tol: f64) -> Result<f64> {
    if method == Method::ZeroPoint {
        return Ok(propagator_zero_point(n, t, kappa, tol)?.real());
    }
    let origin = ParticleConfig::origin(n);
    let query = PropagatorQuery::new(origin.clone(), origin, t, kappa, method)?.with_tol(tol)?;
    Ok(evaluate(&query, &EvalOptions::default())?.real())
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `n! * int_{ordered sector} P_t(x, y) dx` for two particles, over the box
/// of half-width `6 sqrt(t)` around `y`, by iterated Gauss-Legendre
/// quadrature that respects `x_1 <= x_2` exactly. Uses the symmetrized-sum
/// evaluator for `kappa <= 0` and the string expansion otherwise.
pub fn completeness_mass(y: &ParticleConfig, t: f64, kappa: f64, nodes: usize, tol: f64) -> Result<f64> {
    if y.len() != 2 {
        return Err(Error::invalid("completeness check is implemented for n = 2"));
    }
    if nodes < 4 {
        return Err(Error::invalid("completeness check needs at least 4 nodes per axis"));
    }
    let method = if kappa > 0.0 { Method::Thm2 } else { Method::TwRepulsive };
    let w = 6.0 * t.sqrt();
    let (gx, gw) = gauss_legendre_nodes(nodes);
    let map = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        gx.iter()
            .zip(&gw)
            .map(|(&s, &wt)| (0.5 * (hi - lo) * s + 0.5 * (hi + lo), 0.5 * (hi - lo) * wt))
            .collect()
    };
    let mut total = 0.0;
    for (x1, w1) in map(y[0] - w, y[0] + w) {
        let lo = x1.max(y[1] - w);
        let hi = y[1] + w;
        if lo >= hi {
            continue;
        }
        for (x2, w2) in map(lo, hi) {
            let x = ParticleConfig::new(vec![x1, x2])?;
            let q = PropagatorQuery::new(x, y.clone(), t, kappa, method)?.with_tol(tol)?;
            total += w1 * w2 * evaluate(&q, &EvalOptions::default())?.real();
        }
    }
    Ok(2.0 * total)
}

#[cfg(test)]
mod tests;
