//! Shared machinery for the momentum-space evaluators.
//!
//! Every evaluator integrates, over one real momentum `u_j` per cluster, a
//! Gaussian `exp(-t sum_j n_j u_j^2)` times a product of groups, each group a
//! sum of terms `coef * prod(phases) * prod(ratios)`. A phase is
//! `exp(log + i sum_j p_j u_j)`; a ratio is `(D + i num) / (D + i den)` with
//! `D = u_j - u_k`. Imaginary contour offsets are folded into these constants
//! by the callers, so all grids are real.
//!
//! The centre of mass `Q` is integrated in closed form and the remaining
//! `M - 1` Jacobi coordinates by the trapezoid rule.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::Result;
use crate::quadrature::{integrate, truncation_radius, Axis, GridSpec, IntegralResult};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Mass-weighted Jacobi coordinates for clusters of sizes `parts`.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub parts: Vec<f64>,
    /// `u_j - Q = sum_m coef[j][m] * rho_m`.
    pub coef: Vec<Vec<f64>>,
    pub reduced: Vec<f64>,
}

impl Frame {
    pub fn new(parts: &[usize]) -> Self {
        let m = parts.len();
        let masses: Vec<f64> = parts.iter().map(|&v| v as f64).collect();
        let partial: Vec<f64> = masses
            .iter()
            .scan(0.0, |s, v| {
                *s += v;
                Some(*s)
            })
            .collect();
        let reduced = (0..m.saturating_sub(1))
            .map(|k| partial[k] * masses[k + 1] / partial[k + 1])
            .collect();
        let mut coef = vec![vec![0.0; m.saturating_sub(1)]; m];
        for unit in 0..m.saturating_sub(1) {
            let rho: Vec<f64> = (0..m - 1).map(|k| if k == unit { 1.0 } else { 0.0 }).collect();
            let mut u = vec![0.0; m];
            let mut centre = 0.0;
            for k in (0..m - 1).rev() {
                centre += masses[k + 1] / partial[k + 1] * rho[k];
                u[k + 1] = centre - rho[k];
            }
            u[0] = centre;
            for j in 0..m {
                coef[j][unit] = u[j];
            }
        }
        Self {
            parts: masses,
            coef,
            reduced,
        }
    }

    pub fn m(&self) -> usize {
        self.parts.len()
    }

    pub fn n(&self) -> f64 {
        self.parts.iter().sum()
    }

    pub fn relative(&self, rho: &[f64], out: &mut [f64]) {
        for (j, row) in self.coef.iter().enumerate() {
            out[j] = row.iter().zip(rho).map(|(c, r)| c * r).sum();
        }
    }

    /// Frequency of `sum_j p_j u_j` along Jacobi axis `m`.
    fn axis_frequency(&self, p: &[f64], m: usize) -> f64 {
        self.coef.iter().zip(p).map(|(row, pj)| row[m] * pj).sum()
    }
}

#[derive(Debug, Clone)]
struct Phase {
    p: Vec<f64>,
    log: Complex64,
}

#[derive(Debug, Clone, Copy)]
struct Ratio {
    pair: usize,
    num: f64,
    den: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub coef: Complex64,
    pub phases: Vec<u32>,
    pub ratios: Vec<u32>,
}

/// Flattened group: term `i` uses `index[start[i]..start[i+1]]`, phases first.
#[derive(Debug, Clone, Default)]
struct Group {
    coef: Vec<Complex64>,
    n_phases: Vec<u8>,
    start: Vec<u32>,
    index: Vec<u32>,
    // sum_j p_j of the terms, equal across the group
    total: f64,
    freq: Vec<f64>,
}

#[derive(Debug)]
pub(crate) struct KernelBuilder {
    frame: Frame,
    phases: Vec<Phase>,
    phase_keys: HashMap<Vec<u64>, u32>,
    pairs: Vec<(usize, usize)>,
    ratios: Vec<Ratio>,
    ratio_keys: HashMap<(usize, usize, u64, u64), u32>,
    groups: Vec<Vec<Term>>,
}

impl KernelBuilder {
    pub fn new(parts: &[usize]) -> Self {
        Self {
            frame: Frame::new(parts),
            phases: Vec::new(),
            phase_keys: HashMap::new(),
            pairs: Vec::new(),
            ratios: Vec::new(),
            ratio_keys: HashMap::new(),
            groups: Vec::new(),
        }
    }

    pub fn phase(&mut self, p: Vec<f64>, log: Complex64) -> u32 {
        let mut key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
        key.push((log.re + 0.0).to_bits());
        key.push((log.im + 0.0).to_bits());
        if let Some(&i) = self.phase_keys.get(&key) {
            return i;
        }
        let i = self.phases.len() as u32;
        self.phases.push(Phase { p, log });
        self.phase_keys.insert(key, i);
        i
    }

    /// `(u_j - u_k + i num) / (u_j - u_k + i den)`; `None` when identically one.
    pub fn ratio(&mut self, j: usize, k: usize, num: f64, den: f64) -> Option<u32> {
        if num == den {
            return None;
        }
        let key = (j, k, (num + 0.0).to_bits(), (den + 0.0).to_bits());
        if let Some(&i) = self.ratio_keys.get(&key) {
            return Some(i);
        }
        let pair = match self.pairs.iter().position(|&p| p == (j, k)) {
            Some(p) => p,
            None => {
                self.pairs.push((j, k));
                self.pairs.len() - 1
            }
        };
        let i = self.ratios.len() as u32;
        self.ratios.push(Ratio { pair, num, den });
        self.ratio_keys.insert(key, i);
        Some(i)
    }

    pub fn push_group(&mut self, terms: Vec<Term>) {
        self.groups.push(terms);
    }

    /// Finish the kernel. `base` is a phase applied once per node and
    /// `prefactor` a constant multiplying the integral.
    pub fn build(self, t: f64, base_p: Vec<f64>, base_log: Complex64, prefactor: f64) -> Kernel {
        let frame = self.frame;
        let dims = frame.m() - 1;
        let phase_total = |ph: &Phase| ph.p.iter().sum::<f64>();
        let mut groups = Vec::with_capacity(self.groups.len());
        for terms in &self.groups {
            let mut g = Group {
                freq: vec![0.0; dims],
                ..Group::default()
            };
            g.start.push(0);
            for (i, term) in terms.iter().enumerate() {
                let total: f64 = term.phases.iter().map(|&p| phase_total(&self.phases[p as usize])).sum();
                if i == 0 {
                    g.total = total;
                }
                debug_assert!((total - g.total).abs() <= 1e-9 * (1.0 + total.abs()));
                for (m, f) in g.freq.iter_mut().enumerate() {
                    let w: f64 = term
                        .phases
                        .iter()
                        .map(|&p| frame.axis_frequency(&self.phases[p as usize].p, m))
                        .sum();
                    *f = f.max(w.abs());
                }
                g.coef.push(term.coef);
                g.n_phases.push(term.phases.len() as u8);
                g.index.extend(&term.phases);
                g.index.extend(&term.ratios);
                g.start.push(g.index.len() as u32);
            }
            groups.push(g);
        }
        let mut freq: Vec<f64> = (0..dims).map(|m| frame.axis_frequency(&base_p, m).abs()).collect();
        for g in &groups {
            for (f, gf) in freq.iter_mut().zip(&g.freq) {
                *f += gf;
            }
        }
        let total = base_p.iter().sum::<f64>() + groups.iter().map(|g| g.total).sum::<f64>();
        let n = frame.n();
        let centre = (PI / (t * n)).sqrt() * (-total * total / (4.0 * t * n)).exp();
        Kernel {
            frame,
            t,
            phases: self.phases,
            pairs: self.pairs,
            ratios: self.ratios,
            groups,
            base: Phase { p: base_p, log: base_log },
            multiplier: prefactor * centre,
            freq,
            guard: 0.0,
        }
    }
}

#[derive(Debug)]
pub(crate) struct Kernel {
    frame: Frame,
    t: f64,
    phases: Vec<Phase>,
    pairs: Vec<(usize, usize)>,
    ratios: Vec<Ratio>,
    groups: Vec<Group>,
    base: Phase,
    multiplier: f64,
    freq: Vec<f64>,
    guard: f64,
}

#[derive(Default)]
struct Scratch {
    rel: Vec<f64>,
    diff: Vec<f64>,
    phase: Vec<Complex64>,
    ratio: Vec<Complex64>,
    rho: Vec<f64>,
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

/// Grid-design parameters shared by the evaluators.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GridDesign {
    pub tol: f64,
    /// Distance from the real axis of the nearest genuine pole in `u_j - u_k`.
    pub pole_distance: f64,
}

impl Kernel {
    /// Near-coincidence threshold below which the removable-singularity
    /// guard replaces a node value by a symmetric two-point average.
    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    pub fn dims(&self) -> usize {
        self.frame.m() - 1
    }

    fn eval_raw(&self, rho: &[f64], s: &mut Scratch) -> (Complex64, f64) {
        let m = self.frame.m();
        s.rel.resize(m, 0.0);
        self.frame.relative(rho, &mut s.rel);
        s.diff.clear();
        s.diff.extend(self.pairs.iter().map(|&(j, k)| s.rel[j] - s.rel[k]));
        let mut nearest = f64::INFINITY;
        s.ratio.clear();
        for r in &self.ratios {
            let d = s.diff[r.pair];
            let den = Complex64::new(d, r.den);
            nearest = nearest.min(den.norm());
            s.ratio.push(Complex64::new(d, r.num) / den);
        }
        let phase_of = |ph: &Phase, rel: &[f64]| -> Complex64 {
            let arg: f64 = ph.p.iter().zip(rel).map(|(p, u)| p * u).sum();
            (ph.log + I * arg).exp()
        };
        s.phase.clear();
        for ph in &self.phases {
            s.phase.push(phase_of(ph, &s.rel));
        }
        let mut value = phase_of(&self.base, &s.rel);
        let gauss: f64 = self
            .frame
            .reduced
            .iter()
            .zip(rho)
            .map(|(mu, r)| mu * r * r)
            .sum();
        value *= (-self.t * gauss).exp();
        for g in &self.groups {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..g.coef.len() {
                let lo = g.start[i] as usize;
                let hi = g.start[i + 1] as usize;
                let np = g.n_phases[i] as usize;
                let mut term = g.coef[i];
                for &p in &g.index[lo..lo + np] {
                    term *= s.phase[p as usize];
                }
                for &r in &g.index[lo + np..hi] {
                    term *= s.ratio[r as usize];
                }
                acc += term;
            }
            value *= acc;
        }
        (value, nearest)
    }

    pub fn eval(&self, rho: &[Complex64]) -> Complex64 {
        SCRATCH.with(|cell| {
            let mut s = cell.borrow_mut();
            let mut point = std::mem::take(&mut s.rho);
            point.clear();
            point.extend(rho.iter().map(|z| z.re));
            let (v, nearest) = self.eval_raw(&point, &mut s);
            let out = if nearest < self.guard {
                // removable singularity on the grid: average two displaced points
                let eta = 1e-5 * (1.0 + point.iter().fold(0.0f64, |a, r| a.max(r.abs())));
                let dir = guard_direction(point.len());
                let plus: Vec<f64> = point.iter().zip(&dir).map(|(r, d)| r + eta * d).collect();
                let minus: Vec<f64> = point.iter().zip(&dir).map(|(r, d)| r - eta * d).collect();
                let (a, _) = self.eval_raw(&plus, &mut s);
                let (b, _) = self.eval_raw(&minus, &mut s);
                0.5 * (a + b)
            } else {
                v
            };
            s.rho = point;
            out
        })
    }

    pub fn grid(&self, design: GridDesign) -> Result<GridSpec> {
        let axes = (0..self.dims())
            .map(|m| plan_axis(self.t * self.frame.reduced[m], self.freq[m], design))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridSpec::trapezoid(axes))
    }

    pub fn integrate(&self, design: GridDesign) -> Result<IntegralResult> {
        let spec = self.grid(design)?;
        let r = integrate(|q| self.eval(q), &spec)?;
        Ok(IntegralResult {
            value: r.value * self.multiplier,
            error_estimate: r.error_estimate * self.multiplier.abs(),
            evaluations: r.evaluations,
        })
    }
}

fn guard_direction(dims: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..dims).map(|k| 1.0 + (k as f64 + 1.0) * 0.618_033_988_7).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter().map(|v| v / norm).collect()
}

/// One Jacobi axis for the Gaussian weight `exp(-a rho^2)`, an oscillation of
/// frequency at most `freq`, and analyticity in a strip of half-width
/// `design.pole_distance`.
pub(crate) fn plan_axis(a: f64, freq: f64, design: GridDesign) -> Result<Axis> {
    let half_width = truncation_radius(a, 0.0, 0, design.tol)?;
    let log_tol = design.tol.recip().ln();
    // twice the Gaussian resolution, so the half grid behind the error
    // estimate is itself converged when no pole limits the spacing
    let mut resolve = 2.0 * (4.0 * a * log_tol).sqrt();
    if design.pole_distance.is_finite() {
        resolve = resolve.max((log_tol + 5.0) / design.pole_distance);
    }
    let h = 2.0 * PI / (freq + resolve);
    Ok(Axis::with_spacing(half_width, h))
}

/// Determinant integrand of the coincident-endpoint formula, integrated in
/// the same Jacobi frame.
#[derive(Debug)]
pub(crate) struct DeterminantKernel {
    frame: Frame,
    t: f64,
    kappa: f64,
    multiplier: f64,
}

impl DeterminantKernel {
    pub fn new(parts: &[usize], t: f64, kappa: f64, prefactor: f64) -> Self {
        let frame = Frame::new(parts);
        let n = frame.n();
        let multiplier = prefactor * (PI / (t * n)).sqrt();
        Self {
            frame,
            t,
            kappa,
            multiplier,
        }
    }

    fn eval(&self, rho: &[Complex64]) -> Complex64 {
        let m = self.frame.m();
        let point: Vec<f64> = rho.iter().map(|z| z.re).collect();
        let mut rel = vec![0.0; m];
        self.frame.relative(&point, &mut rel);
        let mut a = vec![Complex64::new(0.0, 0.0); m * m];
        for j in 0..m {
            for k in 0..m {
                let c = 0.5 * self.kappa * (self.frame.parts[j] + self.frame.parts[k]);
                a[j * m + k] = Complex64::new(c, -(rel[j] - rel[k])).inv();
            }
        }
        let gauss: f64 = self
            .frame
            .reduced
            .iter()
            .zip(&point)
            .map(|(mu, r)| mu * r * r)
            .sum();
        determinant(&mut a, m) * (-self.t * gauss).exp()
    }

    fn grid(&self, design: GridDesign) -> Result<GridSpec> {
        let axes = (0..self.frame.m() - 1)
            .map(|m| plan_axis(self.t * self.frame.reduced[m], 0.0, design))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridSpec::trapezoid(axes))
    }

    /// Nodes of the grid `integrate` would use, times `M^3` for the LU cost.
    pub fn cost(&self, design: GridDesign) -> Result<u64> {
        let m = self.frame.m() as u64;
        Ok(self.grid(design)?.total_nodes().saturating_mul(m * m * m))
    }

    pub fn integrate(&self, design: GridDesign) -> Result<IntegralResult> {
        let r = integrate(|q| self.eval(q), &self.grid(design)?)?;
        Ok(IntegralResult {
            value: r.value * self.multiplier,
            error_estimate: r.error_estimate * self.multiplier.abs(),
            evaluations: r.evaluations,
        })
    }
}

/// In-place LU with partial pivoting on a row-major `m x m` matrix.
fn determinant(a: &mut [Complex64], m: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&r1, &r2| a[r1 * m + col].norm().total_cmp(&a[r2 * m + col].norm()))
            .unwrap_or(col);
        if a[pivot * m + col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            for k in 0..m {
                a.swap(pivot * m + k, col * m + k);
            }
            det = -det;
        }
        let p = a[col * m + col];
        det *= p;
        for r in col + 1..m {
            let factor = a[r * m + col] / p;
            for k in col..m {
                let v = a[col * m + k];
                a[r * m + k] -= factor * v;
            }
        }
    }
    det
}
