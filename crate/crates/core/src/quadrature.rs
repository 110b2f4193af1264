//! Tensor-product quadrature of smooth complex integrands with Gaussian
//! decay over boxes in `R^M`, optionally on contours shifted parallel to
//! the real axis.
//!
//! The default trapezoid rule is spectrally accurate for such integrands.
//! Its error estimate compares the full grid against the sub-grid made of
//! every other node, which is computed in the same sweep.
//!
//! Work is split into one chunk per node of the first axis. Chunks may be
//! evaluated on any number of threads but are always reduced in chunk
//! order with compensated summation, so results are bit-stable for a
//! given [`GridSpec`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of integrand evaluations in one call.
pub const MAX_NODES: u64 = 600_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Trapezoid,
    GaussLegendre,
}

/// One axis of the grid: nodes `u + i*shift` for `u` in `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub half_width: f64,
    pub nodes: usize,
    /// Constant imaginary part of the contour.
    pub shift: f64,
}

impl Axis {
    pub fn new(half_width: f64, nodes: usize) -> Self {
        Self {
            half_width,
            nodes,
            shift: 0.0,
        }
    }

    pub fn shifted(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    /// Smallest odd node count giving spacing at most `h`.
    pub fn with_spacing(half_width: f64, h: f64) -> Self {
        let half = (half_width / h).ceil().max(1.0) as usize;
        Self::new(half_width, 2 * half + 1)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.nodes - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
    pub rule: Rule,
}

impl GridSpec {
    pub fn trapezoid(axes: Vec<Axis>) -> Self {
        Self {
            axes,
            rule: Rule::Trapezoid,
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn total_nodes(&self) -> u64 {
        self.axes
            .iter()
            .fold(1u64, |acc, a| acc.saturating_mul(a.nodes as u64))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.axes.iter().enumerate() {
            if !(a.half_width > 0.0 && a.half_width.is_finite()) {
                return Err(Error::invalid(format!(
                    "axis {i}: half width must be positive, got {}",
                    a.half_width
                )));
            }
            if a.nodes < 3 || a.nodes % 2 == 0 {
                return Err(Error::invalid(format!(
                    "axis {i}: node count must be odd and at least 3, got {}",
                    a.nodes
                )));
            }
            if !a.shift.is_finite() {
                return Err(Error::invalid(format!("axis {i}: shift is not finite")));
            }
        }
        let total = self.total_nodes();
        if total > MAX_NODES {
            return Err(Error::resource(format!(
                "grid with {total} nodes exceeds the budget of {MAX_NODES}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: Complex64,
    pub error_estimate: f64,
    pub evaluations: u64,
}

/// Truncation radius `L` with `exp(-t L^2) <= tol`, widened by `n|kappa| + 1`
/// to leave room for imaginary momentum offsets of size up to `n kappa`.
pub fn truncation_radius(t: f64, kappa: f64, n: usize, tol: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be positive, got {t}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(format!("tolerance must lie in (0,1), got {tol}")));
    }
    Ok((tol.recip().ln() / t).sqrt() + n as f64 * kappa.abs() + 1.0)
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: Complex64) {
        self.sum.re = neumaier(self.sum.re, v.re, &mut self.comp.re);
        self.sum.im = neumaier(self.sum.im, v.im, &mut self.comp.im);
    }

    pub fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

fn neumaier(sum: f64, v: f64, comp: &mut f64) -> f64 {
    let t = sum + v;
    if sum.abs() >= v.abs() {
        *comp += (sum - t) + v;
    } else {
        *comp += (v - t) + sum;
    }
    t
}

impl std::iter::FromIterator<Complex64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut s = Self::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Integrate `f` over the grid described by `spec`.
pub fn integrate<F>(f: F, spec: &GridSpec) -> Result<IntegralResult>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    spec.validate()?;
    match spec.rule {
        Rule::Trapezoid => trapezoid(&f, spec),
        Rule::GaussLegendre => gauss_legendre(&f, spec),
    }
}

struct AxisNodes {
    coords: Vec<Complex64>,
    weights: Vec<f64>,
    // Weight on the coarse sub-grid; zero for nodes outside it.
    coarse: Vec<f64>,
}

fn trapezoid_axis(a: &Axis) -> AxisNodes {
    let h = a.spacing();
    let last = a.nodes - 1;
    let coords = (0..a.nodes)
        .map(|i| Complex64::new(-a.half_width + i as f64 * h, a.shift))
        .collect();
    let weights = (0..a.nodes)
        .map(|i| if i == 0 || i == last { 0.5 * h } else { h })
        .collect();
    let coarse = (0..a.nodes)
        .map(|i| match (i % 2, i == 0 || i == last) {
            (0, true) => h,
            (0, false) => 2.0 * h,
            _ => 0.0,
        })
        .collect();
    AxisNodes {
        coords,
        weights,
        coarse,
    }
}

fn trapezoid<F>(f: &F, spec: &GridSpec) -> Result<IntegralResult>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let axes: Vec<AxisNodes> = spec.axes.iter().map(trapezoid_axis).collect();
    let (fine, coarse, abs) = tensor_sum(f, &axes, true)?;
    Ok(IntegralResult {
        value: fine,
        error_estimate: spectral_error(fine, coarse, abs),
        evaluations: spec.total_nodes(),
    })
}

fn gauss_legendre<F>(f: &F, spec: &GridSpec) -> Result<IntegralResult>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let build = |half: bool| -> Vec<AxisNodes> {
        spec.axes
            .iter()
            .map(|a| {
                let count = if half { a.nodes.div_ceil(2) } else { a.nodes };
                let (x, w) = gauss_legendre_nodes(count);
                AxisNodes {
                    coords: x
                        .iter()
                        .map(|&u| Complex64::new(u * a.half_width, a.shift))
                        .collect(),
                    weights: w.iter().map(|&v| v * a.half_width).collect(),
                    coarse: vec![0.0; count],
                }
            })
            .collect()
    };
    let (fine, _, abs) = tensor_sum(f, &build(false), false)?;
    let (coarse, _, _) = tensor_sum(f, &build(true), false)?;
    let evaluations = spec.total_nodes()
        + spec
            .axes
            .iter()
            .fold(1u64, |acc, a| acc * (a.nodes as u64).div_ceil(2));
    Ok(IntegralResult {
        value: fine,
        error_estimate: spectral_error(fine, coarse, abs),
        evaluations,
    })
}

/// Error of the fine value from its difference to the coarse one. Both rules
/// converge geometrically for the analytic integrands used here, so the fine
/// error is about the square of the coarse one in relative terms. A floor of
/// a few ulps of `sum |w f|` covers rounding.
fn spectral_error(fine: Complex64, coarse: Complex64, abs: f64) -> f64 {
    let d = (fine - coarse).norm();
    let scale = fine.norm();
    let truncation = if scale > 0.0 { d.min(d * d / scale) } else { d };
    truncation + 64.0 * f64::EPSILON * abs
}

type Sums = (Complex64, Complex64, f64);

fn tensor_sum<F>(f: &F, axes: &[AxisNodes], with_coarse: bool) -> Result<Sums>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let dim = axes.len();
    if dim == 0 {
        let v = f(&[]);
        check_finite(v, &[])?;
        return Ok((v, v, v.norm()));
    }
    let chunks: Vec<Result<Sums>> = (0..axes[0].coords.len())
        .into_par_iter()
        .map(|i0| {
            let mut idx = vec![0usize; dim];
            idx[0] = i0;
            let mut q: Vec<Complex64> = axes.iter().map(|a| a.coords[0]).collect();
            q[0] = axes[0].coords[i0];
            let mut fine = CompensatedSum::new();
            let mut coarse = CompensatedSum::new();
            let mut abs = 0.0;
            loop {
                let v = f(&q);
                if !v.is_finite() {
                    check_finite(v, &q)?;
                }
                let mut w = 1.0;
                let mut wc = 1.0;
                for (k, &i) in idx.iter().enumerate() {
                    w *= axes[k].weights[i];
                    if with_coarse {
                        wc *= axes[k].coarse[i];
                    }
                }
                fine.add(v * w);
                abs += v.norm() * w.abs();
                if with_coarse && wc != 0.0 {
                    coarse.add(v * wc);
                }
                // odometer over axes 1..dim
                let mut k = dim - 1;
                loop {
                    if k == 0 {
                        return Ok((fine.value(), coarse.value(), abs));
                    }
                    idx[k] += 1;
                    if idx[k] < axes[k].coords.len() {
                        q[k] = axes[k].coords[idx[k]];
                        break;
                    }
                    idx[k] = 0;
                    q[k] = axes[k].coords[0];
                    k -= 1;
                }
            }
        })
        .collect();
    let mut fine = CompensatedSum::new();
    let mut coarse = CompensatedSum::new();
    let mut abs = 0.0;
    for c in chunks {
        let (a, b, m) = c?;
        fine.add(a);
        coarse.add(b);
        abs += m;
    }
    Ok((fine.value(), coarse.value(), abs))
}

fn check_finite(v: Complex64, q: &[Complex64]) -> Result<()> {
    if v.is_finite() {
        return Ok(());
    }
    let mut node = Vec::with_capacity(2 * q.len());
    for z in q {
        node.push(z.re);
        node.push(z.im);
    }
    Err(Error::NumericalFailure {
        message: format!("integrand is not finite ({v})"),
        node: Some(node),
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre_nodes(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; count];
    let mut w = vec![0.0; count];
    let nf = count as f64;
    for i in 0..(count + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=count {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if count == 0 { 1.0 } else { p1 };
            let pm1 = if count == 1 { 1.0 } else { p0 };
            dp = nf * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[count - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[count - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn radius_formula() {
        let l = truncation_radius(1.0, 0.0, 1, 1e-16).unwrap();
        assert_abs_diff_eq!(l, (16.0 * 10f64.ln()).sqrt() + 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l, 7.0697, epsilon = 1e-3);
        let l2 = truncation_radius(1.0, 1.0, 2, 1e-16).unwrap();
        assert_abs_diff_eq!(l2 - l, 2.0, epsilon = 1e-12);
        let near_one = truncation_radius(1.0, 0.5, 3, 1.0 - 1e-15).unwrap();
        assert_abs_diff_eq!(near_one, 2.5, epsilon = 1e-6);
        assert!(matches!(
            truncation_radius(0.0, 0.0, 1, 0.1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gaussian_1d() {
        let spec = GridSpec::trapezoid(vec![Axis::new(8.0, 129)]);
        let r = integrate(|q| (-q[0] * q[0]).exp(), &spec).unwrap();
        assert_abs_diff_eq!(r.value.re, PI.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.value.im, 0.0, epsilon = 1e-12);
        assert!(r.error_estimate >= 0.0);
        assert_eq!(r.evaluations, 129);
    }

    #[test]
    fn gaussian_fourier_1d() {
        // closed form: sqrt(pi) exp(-1/4)
        let spec = GridSpec::trapezoid(vec![Axis::new(8.0, 129)]);
        let i = Complex64::i();
        let r = integrate(|q| (-q[0] * q[0] + i * q[0]).exp(), &spec).unwrap();
        assert_abs_diff_eq!(r.value.re, PI.sqrt() * (-0.25f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.value.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_2d() {
        let spec = GridSpec::trapezoid(vec![Axis::new(8.0, 129); 2]);
        let r = integrate(|q| (-(q[0] * q[0] + q[1] * q[1])).exp(), &spec).unwrap();
        assert_abs_diff_eq!(r.value.re, PI, epsilon = 1e-10);
    }

    #[test]
    fn gauss_legendre_cross_check() {
        let (x, w) = gauss_legendre_nodes(5);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        // exact for x^8 with 5 nodes
        let m8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_abs_diff_eq!(m8, 2.0 / 9.0, epsilon = 1e-14);
        let spec = GridSpec {
            axes: vec![Axis::new(8.0, 81)],
            rule: Rule::GaussLegendre,
        };
        let r = integrate(|q| (-q[0] * q[0]).exp(), &spec).unwrap();
        assert_abs_diff_eq!(r.value.re, PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn doubling_reduces_estimate() {
        let i = Complex64::i();
        let fs: [Box<dyn Fn(&[Complex64]) -> Complex64 + Sync>; 3] = [
            Box::new(|q: &[Complex64]| (-q[0] * q[0]).exp()),
            Box::new(move |q: &[Complex64]| (-q[0] * q[0] + i * q[0]).exp()),
            Box::new(|q: &[Complex64]| (-(q[0] * q[0] + q[1] * q[1])).exp()),
        ];
        for (k, f) in fs.iter().enumerate() {
            let dim = if k == 2 { 2 } else { 1 };
            let mut last = f64::INFINITY;
            for nodes in [9, 17, 33] {
                let spec = GridSpec::trapezoid(vec![Axis::new(6.0, nodes); dim]);
                let r = integrate(f, &spec).unwrap();
                assert!(r.error_estimate < last, "integrand {k}, nodes {nodes}");
                last = r.error_estimate;
            }
        }
    }

    #[test]
    fn shifted_contour_agrees() {
        // entire integrand: the contour R - i*kappa*eps gives the same value
        let i = Complex64::i();
        let f = |q: &[Complex64]| (-q[0] * q[0] + 0.7 * i * q[0]).exp() * (q[0] + 2.0);
        let real = integrate(f, &GridSpec::trapezoid(vec![Axis::new(9.0, 161)])).unwrap();
        for eps in [0.0, 0.3, 0.99] {
            let spec = GridSpec::trapezoid(vec![Axis::new(9.0, 161).shifted(-0.8 * eps)]);
            let shifted = integrate(f, &spec).unwrap();
            assert!((shifted.value - real.value).norm() < 1e-12);
        }
    }

    #[test]
    fn non_finite_reports_node() {
        let spec = GridSpec::trapezoid(vec![Axis::new(1.0, 3)]);
        let err = integrate(|q| c(1.0) / q[0], &spec).unwrap_err();
        match err {
            Error::NumericalFailure { node: Some(node), .. } => assert_eq!(node, vec![0.0, 0.0]),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn validation() {
        assert!(GridSpec::trapezoid(vec![Axis::new(1.0, 4)]).validate().is_err());
        assert!(GridSpec::trapezoid(vec![Axis::new(-1.0, 5)]).validate().is_err());
        let huge = GridSpec::trapezoid(vec![Axis::new(1.0, 100_001); 2]);
        assert!(matches!(huge.validate(), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn zero_dimensional() {
        let r = integrate(|_| c(2.5), &GridSpec::trapezoid(vec![])).unwrap();
        assert_eq!(r.value, c(2.5));
        assert!(r.error_estimate <= 1e-13);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let spec = GridSpec::trapezoid(vec![Axis::new(5.0, 41); 3]);
        let f = |q: &[Complex64]| (-(q[0] * q[0] + q[1] * q[1] + q[2] * q[2])).exp() * (q[0] + 1.3);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| integrate(f, &spec).unwrap());
        let b = three.install(|| integrate(f, &spec).unwrap());
        assert_eq!(a.value.re.to_bits(), b.value.re.to_bits());
        assert_eq!(a.value.im.to_bits(), b.value.im.to_bits());
    }

    proptest::proptest! {
        #[test]
        fn linearity(a in -2.0f64..2.0, b in -2.0f64..2.0, s in 0.2f64..2.0, w in -3.0f64..3.0) {
            let i = Complex64::i();
            let spec = GridSpec::trapezoid(vec![Axis::new(10.0, 121)]);
            let f = move |q: &[Complex64]| (-s * q[0] * q[0]).exp();
            let g = move |q: &[Complex64]| (-q[0] * q[0] + i * w * q[0]).exp() * q[0];
            let lhs = integrate(|q| a * f(q) + b * g(q), &spec).unwrap().value;
            let rhs = a * integrate(f, &spec).unwrap().value + b * integrate(g, &spec).unwrap().value;
            let scale = lhs.norm().max(1.0);
            proptest::prop_assert!((lhs - rhs).norm() <= 1e-13 * scale);
        }
    }
}
