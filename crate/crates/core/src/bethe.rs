//! Bethe eigenfunctions of the delta-Bose gas on the ordered sector, their
//! energies, the cluster functions used to pass between the two coupling
//! signs, and numerical checks of the algebraic identities behind them.
//!
//! Particle labels inside a composition are zero-based and cluster-ordered:
//! cluster `j` owns the consecutive labels `clusters()[j]`, and label `a`
//! has one-based rank `r(a)` inside its cluster.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    all_permutations, enumerate_restricted_permutations, Composition, Permutation,
    PermutationClass,
};
use crate::error::{Error, Result};
use crate::particles::ParticleConfig;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A string state: one real momentum per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetheState {
    pub composition: Composition,
    pub momenta: Vec<f64>,
    pub kappa: f64,
}

impl BetheState {
    pub fn new(composition: Composition, momenta: Vec<f64>, kappa: f64) -> Result<Self> {
        if momenta.len() != composition.m() {
            return Err(Error::invalid(format!(
                "composition {composition} has {} clusters but {} momenta were given",
                composition.m(),
                momenta.len()
            )));
        }
        if !kappa.is_finite() || momenta.iter().any(|q| !q.is_finite()) {
            return Err(Error::invalid("momenta and coupling must be finite"));
        }
        Ok(Self {
            composition,
            momenta,
            kappa,
        })
    }

    fn complex_momenta(&self) -> Vec<Complex64> {
        self.momenta.iter().map(|&q| q.into()).collect()
    }
}

/// Per-particle rapidities `q_j + i*kappa*(offset_j + r(a))` for a composition.
pub fn rapidities(c: &Composition, q: &[Complex64], kappa: f64, offsets: &[f64]) -> Vec<Complex64> {
    let cluster = c.cluster_of();
    c.ranks()
        .iter()
        .zip(&cluster)
        .map(|(&r, &j)| q[j] + I * kappa * (offsets[j] + r as f64))
        .collect()
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::invalid(format!(
            "{what} has length {got}, expected {want}"
        )));
    }
    Ok(())
}

fn scattering(diff: Complex64, kappa: f64) -> Complex64 {
    let num = diff + I * kappa;
    let den = diff - I * kappa;
    if den == Complex64::new(0.0, 0.0) && num == den {
        // kappa = 0 and coinciding momenta: the factor is identically 1
        return Complex64::new(1.0, 0.0);
    }
    num / den
}

/// Sum over a restricted permutation class shared by the cluster functions.
///
/// `zeta[a]` enters the cross-cluster factors and `zeta[a] - i*kappa` the
/// plane waves. With `sign = -1` every `i` in the summand is conjugated
/// except inside `zeta` itself.
fn cluster_sum(
    x: &[f64],
    c: &Composition,
    zeta: &[Complex64],
    kappa: f64,
    class: PermutationClass,
    sign: f64,
) -> Result<Complex64> {
    let cluster = c.cluster_of();
    let n = c.n();
    let mut total = Complex64::new(0.0, 0.0);
    for sigma in enumerate_restricted_permutations(c, class)? {
        let pos = sigma.inverse();
        let mut phase = Complex64::new(0.0, 0.0);
        for a in 0..n {
            phase += (zeta[a] - I * kappa) * x[pos.apply(a)];
        }
        let mut term = (sign * I * phase).exp();
        for a in 0..n {
            for b in (a + 1)..n {
                if cluster[a] < cluster[b] && pos.apply(a) > pos.apply(b) {
                    let d = zeta[a] - zeta[b];
                    term *= (d + sign * I * kappa) / (d - sign * I * kappa);
                }
            }
        }
        total += term;
    }
    if !total.is_finite() {
        return Err(Error::numerical(format!(
            "cluster function evaluated on a pole (composition {c})"
        )));
    }
    Ok(total)
}

fn cluster_prefactor(c: &Composition, kappa: f64) -> f64 {
    let n = c.n();
    let m = c.m();
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let blocks: f64 = c
        .parts()
        .iter()
        .map(|&nj| (fact(nj) * fact(nj - 1)).sqrt())
        .product();
    kappa.abs().powf((n - m) as f64 / 2.0) * blocks / fact(n).sqrt()
}

/// Repulsive Bethe eigenfunction with the `1/n!` normalization.
pub fn psi_repulsive(x: &ParticleConfig, q: &[f64], kappa: f64) -> Result<Complex64> {
    check_len("momenta", q.len(), x.len())?;
    let n = x.len();
    let qc: Vec<Complex64> = q.iter().map(|&v| v.into()).collect();
    let mut total = Complex64::new(0.0, 0.0);
    for sigma in all_permutations(n)? {
        let pos = sigma.inverse();
        let mut phase = 0.0;
        let mut term = Complex64::new(1.0, 0.0);
        for j in 0..n {
            phase += q[j] * x[pos.apply(j)];
            for k in (j + 1)..n {
                if pos.apply(j) > pos.apply(k) {
                    term *= scattering(qc[j] - qc[k], kappa);
                }
            }
        }
        total += term * Complex64::from_polar(1.0, phase);
    }
    let nf: f64 = (1..=n).map(|v| v as f64).product();
    Ok(total / nf)
}

pub fn energy_repulsive(q: &[f64]) -> f64 {
    q.iter().map(|v| v * v).sum()
}

/// The cluster function with plane waves `q_j + i*kappa*(r(a) - 1)`.
pub fn phi_cluster(
    x: &ParticleConfig,
    c: &Composition,
    q: &[Complex64],
    kappa: f64,
) -> Result<Complex64> {
    check_len("positions", x.len(), c.n())?;
    check_len("momenta", q.len(), c.m())?;
    let zeta = rapidities(c, q, kappa, &vec![0.0; c.m()]);
    let s = cluster_sum(x.as_slice(), c, &zeta, kappa, PermutationClass::Increasing, 1.0)?;
    Ok(s * cluster_prefactor(c, kappa))
}

/// The conjugate-side cluster function, summed over the decreasing class.
pub fn phi_tilde(
    y: &ParticleConfig,
    c: &Composition,
    q: &[Complex64],
    kappa: f64,
) -> Result<Complex64> {
    check_len("positions", y.len(), c.n())?;
    check_len("momenta", q.len(), c.m())?;
    let zeta = rapidities(c, q, kappa, &vec![0.0; c.m()]);
    let s = cluster_sum(y.as_slice(), c, &zeta, kappa, PermutationClass::Decreasing, -1.0)?;
    Ok(s * cluster_prefactor(c, kappa))
}

/// String-centred momenta `q_j - i*kappa*(n_j - 1)/2` at which the cluster
/// function becomes the attractive eigenfunction.
pub fn string_momenta(c: &Composition, q: &[Complex64], kappa: f64) -> Vec<Complex64> {
    q.iter()
        .zip(c.parts())
        .map(|(&qj, &nj)| qj - I * kappa * (nj as f64 - 1.0) / 2.0)
        .collect()
}

/// Attractive Bethe eigenfunction of a string state.
pub fn psi_attractive(x: &ParticleConfig, state: &BetheState) -> Result<Complex64> {
    let shifted = string_momenta(&state.composition, &state.complex_momenta(), state.kappa);
    phi_cluster(x, &state.composition, &shifted, state.kappa)
}

pub fn energy_attractive(state: &BetheState) -> f64 {
    let k2 = state.kappa * state.kappa;
    state
        .composition
        .parts()
        .iter()
        .zip(&state.momenta)
        .map(|(&nj, &q)| {
            let nj = nj as f64;
            nj * q * q - k2 * (nj * nj * nj - nj) / 12.0
        })
        .sum()
}

/// Integrand of the double-permutation representation of the attractive
/// propagator for one composition, without its constant prefactor.
///
/// Momenta may be complex, which is how apparent poles are approached.
pub fn theorem1_integrand(
    x: &[f64],
    y: &[f64],
    c: &Composition,
    mu: &[f64],
    kappa: f64,
    t: f64,
    q: &[Complex64],
) -> Result<Complex64> {
    let n = c.n();
    check_len("x", x.len(), n)?;
    check_len("y", y.len(), n)?;
    check_len("mu", mu.len(), c.m())?;
    check_len("momenta", q.len(), c.m())?;
    let zeta = rapidities(c, q, kappa, mu);
    let xi: Vec<Complex64> = zeta.iter().map(|z| z - I * kappa).collect();
    let cluster = c.cluster_of();
    let gauss = (-t * xi.iter().map(|v| v * v).sum::<Complex64>()).exp();
    let sig: Vec<Permutation> =
        enumerate_restricted_permutations(c, PermutationClass::Increasing)?
            .iter()
            .map(Permutation::inverse)
            .collect();
    let tau: Vec<Permutation> =
        enumerate_restricted_permutations(c, PermutationClass::Decreasing)?
            .iter()
            .map(Permutation::inverse)
            .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for ps in &sig {
        for pt in &tau {
            let mut phase = Complex64::new(0.0, 0.0);
            for a in 0..n {
                phase += xi[a] * (x[ps.apply(a)] - y[pt.apply(a)]);
            }
            let mut term = (I * phase).exp();
            for a in 0..n {
                for b in 0..n {
                    if cluster[a] != cluster[b]
                        && ps.apply(a) > ps.apply(b)
                        && pt.apply(a) < pt.apply(b)
                    {
                        let d = zeta[a] - zeta[b];
                        term *= (d + I * kappa) / (d - I * kappa);
                    }
                }
            }
            total += term;
        }
    }
    Ok(total * gauss)
}

/// Relative residual of the antisymmetrization lemma
/// `sum_s sign(s) prod_{a<b} (xi_s(a) - xi_s(b) + f(a,b)) = n! prod_{a<b} (xi_a - xi_b)`,
/// measured against the largest summand.
pub fn check_vandermonde_lemma(xi: &[Complex64], f: &[Vec<Complex64>]) -> Result<f64> {
    let n = xi.len();
    if n == 0 || n > 6 {
        return Err(Error::invalid(format!("lemma check supports 1 <= n <= 6, got {n}")));
    }
    if f.len() != n || f.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("offset matrix must be n x n"));
    }
    let mut lhs = Complex64::new(0.0, 0.0);
    let mut scale: f64 = 0.0;
    for s in all_permutations(n)? {
        let mut term = Complex64::new(s.sign() as f64, 0.0);
        for a in 0..n {
            for b in (a + 1)..n {
                term *= xi[s.apply(a)] - xi[s.apply(b)] + f[a][b];
            }
        }
        scale = scale.max(term.norm());
        lhs += term;
    }
    let nf: f64 = (1..=n).map(|v| v as f64).product();
    let mut rhs = Complex64::new(nf, 0.0);
    for a in 0..n {
        for b in (a + 1)..n {
            rhs *= xi[a] - xi[b];
        }
    }
    scale = scale.max(rhs.norm());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).norm() / scale)
}

/// Relative residual of the telescoping identity for the product over the
/// rapidity pairs of two clusters of sizes `nj` and `nk`.
pub fn check_telescoping_identity(
    qj: Complex64,
    qk: Complex64,
    nj: usize,
    nk: usize,
    kappa: f64,
) -> Result<f64> {
    if nj == 0 || nk == 0 {
        return Err(Error::invalid("cluster sizes must be positive"));
    }
    let d = qj - qk;
    let (njf, nkf) = (nj as f64, nk as f64);
    let scale = d.norm() + kappa.abs() * (njf + nkf);
    let guard = |z: Complex64| -> Result<Complex64> {
        if z.norm() <= 1e-12 * scale {
            Err(Error::invalid(format!(
                "momentum difference {d} sits on a pole of the telescoping identity"
            )))
        } else {
            Ok(z)
        }
    };
    let mut lhs = Complex64::new(1.0, 0.0);
    for r in 1..=nj {
        for s in 1..=nk {
            let (r, s) = (r as f64, s as f64);
            lhs *= (d + I * kappa * (r - s - 1.0)) / guard(d + I * kappa * (r - s))?;
            lhs *= (d + I * kappa * (njf - nkf - r + s + 1.0))
                / guard(d + I * kappa * (njf - nkf - r + s))?;
        }
    }
    let rhs = (d - I * kappa * nkf) * (d + I * kappa * njf)
        / (guard(d)? * guard(d + I * kappa * (njf - nkf))?);
    Ok((lhs - rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE))
}

/// Residual between the squared-modulus products and the Cauchy determinant
/// for real momenta `q` and cluster sizes `parts`: the two product forms are
/// compared relative to their value, the determinant relative to the larger
/// of its value and its Hadamard bound.
pub fn check_cauchy_determinant(q: &[f64], parts: &[usize], kappa: f64) -> Result<f64> {
    let m = q.len();
    if m == 0 || m > 5 || parts.len() != m {
        return Err(Error::invalid(format!(
            "determinant check needs 1 <= M <= 5 momenta and matching sizes, got {m} and {}",
            parts.len()
        )));
    }
    if kappa == 0.0 || parts.contains(&0) {
        return Err(Error::invalid("coupling must be nonzero and sizes positive"));
    }
    let mut triple = 1.0;
    let mut pairs = 1.0;
    for j in 0..m {
        for k in (j + 1)..m {
            let d = Complex64::new(q[j] - q[k], 0.0);
            let (nj, nk) = (parts[j] as f64, parts[k] as f64);
            for r in 1..=parts[j] {
                for s in 1..=parts[k] {
                    let off = -nj / 2.0 + nk / 2.0 + r as f64 - s as f64;
                    let den = (d + I * kappa * (off - 1.0)).norm_sqr();
                    if den == 0.0 {
                        return Err(Error::invalid("singular denominator in the double product"));
                    }
                    triple *= (d + I * kappa * off).norm_sqr() / den;
                }
            }
            let den = (d - I * kappa * (nj + nk) / 2.0).norm_sqr();
            pairs *= (d - I * kappa * (nj - nk) / 2.0).norm_sqr() / den;
        }
    }
    let mat = DMatrix::from_fn(m, m, |j, k| {
        let nj = parts[j] as f64;
        let nk = parts[k] as f64;
        I * kappa * nj / ((q[j] - q[k]) + I * kappa * (nj + nk) / 2.0)
    });
    let det = mat.determinant();
    // LU rounding scales with the Hadamard bound, not with |det|, which is
    // tiny when two equal-size clusters nearly share a momentum.
    let hadamard: f64 = mat.row_iter().map(|row| row.norm()).product();
    let products = (triple - pairs).abs() / pairs.abs().max(f64::MIN_POSITIVE);
    let determinant = (det - pairs).norm() / hadamard.max(pairs.abs());
    Ok(products.max(determinant))
}

/// Which coincidence of the double-permutation integrand a probe approaches,
/// for clusters `j < k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Coincidence {
    /// `q_j + i k mu_j = q_k + i k mu_k`; the integrand vanishes.
    Bottom { j: usize, k: usize },
    /// `q_j + i k (mu_j + n_j) = q_k + i k (mu_k + n_k)`; vanishes for `n_j = n_k`.
    Top { j: usize, k: usize },
    /// `q_j + i k mu_j = q_k + i k (mu_k + n_k)`; simple pole.
    LowerPole { j: usize, k: usize },
    /// `q_j + i k (mu_j + n_j) = q_k + i k mu_k`; simple pole.
    UpperPole { j: usize, k: usize },
    /// `q_j - q_k = i k s` for an arbitrary integer-spaced offset `s`; apparent pole.
    Offset { j: usize, k: usize, s: f64 },
}

impl Coincidence {
    fn pair(&self) -> (usize, usize) {
        match *self {
            Coincidence::Bottom { j, k }
            | Coincidence::Top { j, k }
            | Coincidence::LowerPole { j, k }
            | Coincidence::UpperPole { j, k }
            | Coincidence::Offset { j, k, .. } => (j, k),
        }
    }

    /// Imaginary offset (in units of kappa) of `q_j - q_k` at the coincidence.
    fn offset(&self, parts: &[usize], mu: &[f64]) -> f64 {
        let (j, k) = self.pair();
        let (nj, nk) = (parts[j] as f64, parts[k] as f64);
        match *self {
            Coincidence::Bottom { .. } => mu[k] - mu[j],
            Coincidence::Top { .. } => mu[k] + nk - mu[j] - nj,
            Coincidence::LowerPole { .. } => mu[k] + nk - mu[j],
            Coincidence::UpperPole { .. } => mu[k] - mu[j] - nj,
            Coincidence::Offset { s, .. } => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Singularity {
    Zero,
    Finite,
    SimplePole,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub composition: Composition,
    pub mu: Vec<f64>,
    pub kappa: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Real momenta of all clusters; `q_k` anchors the approach and `q_j` is replaced.
    pub base: Vec<f64>,
    pub target: Coincidence,
    pub initial_step: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub steps: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Fitted exponent `p` in `|f(h)| ~ h^p` over the finest levels.
    pub order: f64,
    /// Extrapolated limit of `f` (finite case) or of `h*f` (pole case).
    pub limit: Complex64,
    pub verdict: Singularity,
}

/// Approach a coincidence of the double-permutation integrand along
/// `h, h/2, h/4, ...` and classify the behaviour.
pub fn probe_removable_singularity(spec: &ProbeSpec) -> Result<ProbeResult> {
    let c = &spec.composition;
    let (j, k) = spec.target.pair();
    if j >= k || k >= c.m() {
        return Err(Error::invalid(format!(
            "probe needs cluster indices j < k < {}, got ({j}, {k})",
            c.m()
        )));
    }
    check_len("base momenta", spec.base.len(), c.m())?;
    if spec.levels < 4 || !(spec.initial_step > 0.0) {
        return Err(Error::invalid("probe needs at least 4 levels and a positive step"));
    }
    let offset = spec.target.offset(c.parts(), &spec.mu);
    // fixed oblique direction so no other coincidence is met on the way
    let dir = Complex64::from_polar(1.0, 0.377);
    let mut steps = Vec::with_capacity(spec.levels);
    let mut values = Vec::with_capacity(spec.levels);
    for level in 0..spec.levels {
        let h = spec.initial_step / 2f64.powi(level as i32);
        let mut q: Vec<Complex64> = spec.base.iter().map(|&v| v.into()).collect();
        q[j] = q[k] + I * spec.kappa * offset + dir * h;
        let v = theorem1_integrand(&spec.x, &spec.y, c, &spec.mu, spec.kappa, spec.t, &q)?;
        steps.push(h);
        values.push(v);
    }
    let magnitudes: Vec<f64> = values.iter().map(|v| v.norm()).collect();
    let last = spec.levels - 1;
    let tiny = 1e-13 * magnitudes.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let order = if magnitudes[last] <= tiny && magnitudes[last - 1] <= tiny {
        f64::INFINITY
    } else {
        // least squares of log|f| against log h over the finest three levels
        let pts: Vec<(f64, f64)> = (last - 2..=last)
            .map(|i| (steps[i].ln(), magnitudes[i].max(1e-300).ln()))
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    let (verdict, limit) = if order > 0.6 {
        (Singularity::Zero, Complex64::new(0.0, 0.0))
    } else if order.abs() <= 0.4 {
        (
            Singularity::Finite,
            2.0 * values[last] - values[last - 1],
        )
    } else if (order + 1.0).abs() <= 0.4 {
        let a = values[last] * steps[last];
        let b = values[last - 1] * steps[last - 1];
        let converged = (a - b).norm() <= 0.05 * a.norm();
        (
            if converged {
                Singularity::SimplePole
            } else {
                Singularity::Unclassified
            },
            2.0 * a - b,
        )
    } else {
        (Singularity::Unclassified, values[last])
    };
    Ok(ProbeResult {
        steps,
        magnitudes,
        order,
        limit,
        verdict,
    })
}
