//! Command drivers: turn a [`JobSpec`] into a report.

use std::time::Instant;

use deltabose::oracles::{feynman_kac_mc, pde_propagator_n2};
use deltabose::propagator::{decay_rate_points, evaluate};
use deltabose::{Error, EvalOptions, Method, ParticleConfig, PropagatorQuery, Result};
use serde::{Deserialize, Serialize};

use crate::job::{
    Command, Estimator, Format, JobSpec, SweepParam, DEFAULT_COMPARE_TOL, DEFAULT_DECAY_GRID, MC_SIGMAS,
    PDE_REL_TOL,
};
use crate::output::{fmt_f64, to_json, Record, Table};
use crate::verify::{run_verify, VerifyReport};

/// Evaluate one estimator at one query.
pub fn estimate(
    job: &JobSpec,
    est: Estimator,
    x: &ParticleConfig,
    y: &ParticleConfig,
    t: f64,
    kappa: f64,
) -> Result<Record> {
    let start = Instant::now();
    let mut rec = Record {
        method: est.name().to_string(),
        n: x.len(),
        t,
        kappa,
        x: x.as_slice().to_vec(),
        y: y.as_slice().to_vec(),
        value: 0.0,
        value_imag: 0.0,
        error_estimate: 0.0,
        imag_residue: 0.0,
        evaluations: None,
        steps: None,
        seed: None,
        timing_ms: None,
    };
    match est {
        Estimator::Exact(method) => {
            let q = PropagatorQuery::new(x.clone(), y.clone(), t, kappa, method)?.with_tol(job.tol())?;
            let r = evaluate(&q, &EvalOptions::default())?;
            rec.value = r.value.re;
            rec.value_imag = r.value.im;
            rec.error_estimate = r.error_estimate;
            rec.imag_residue = r.imag_residue;
            rec.evaluations = Some(r.evaluations);
        }
        Estimator::Mc => {
            let cfg = job.mc_config();
            let r = feynman_kac_mc(x, y, t, kappa, &cfg)?;
            rec.value = r.estimate;
            rec.error_estimate = r.std_error;
            rec.evaluations = Some(r.paths);
            rec.steps = Some(r.steps as u64);
            rec.seed = Some(cfg.seed);
        }
        Estimator::Pde => {
            let cfg = job.pde_config();
            let r = pde_propagator_n2(x, y, t, kappa, &cfg)?;
            rec.value = r.value;
            rec.error_estimate = r.error_estimate;
            rec.steps = Some((t / cfg.dtau).ceil() as u64);
        }
    }
    if job.timing {
        rec.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(rec)
}

pub fn run_eval(job: &JobSpec) -> Result<Record> {
    let (x, y) = job.endpoints()?;
    let kappa = job.coupling()?;
    let est = job.single_estimator(kappa)?;
    estimate(job, est, &x, &y, job.time()?, kappa)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiff {
    pub a: String,
    pub b: String,
    pub abs_diff: f64,
    pub rel_diff: f64,
    /// Largest accepted absolute difference for this pair.
    pub allowed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub records: Vec<Record>,
    pub pairs: Vec<PairDiff>,
    pub max_rel_diff: f64,
    pub compare_tol: f64,
    pub pass: bool,
}

/// Accepted absolute difference between two records: the relative
/// tolerance when both are exact, otherwise the oracles' own allowances.
fn allowance(a: &Record, b: &Record, tol: f64) -> f64 {
    let own = |r: &Record| match r.method.as_str() {
        "mc" => MC_SIGMAS * r.error_estimate,
        "pde" => PDE_REL_TOL * r.value.abs(),
        _ => 0.0,
    };
    let is_oracle = |r: &Record| matches!(r.method.as_str(), "mc" | "pde");
    if is_oracle(a) || is_oracle(b) {
        own(a) + own(b)
    } else {
        tol * a.value.abs().max(b.value.abs())
    }
}

pub fn compare_records(records: Vec<Record>, tol: f64) -> CompareReport {
    let mut pairs = Vec::new();
    for (i, a) in records.iter().enumerate() {
        for b in &records[i + 1..] {
            let abs_diff = (a.value - b.value).abs();
            let scale = a.value.abs().max(b.value.abs());
            let rel_diff = if scale > 0.0 { abs_diff / scale } else { 0.0 };
            let allowed = allowance(a, b, tol);
            pairs.push(PairDiff {
                a: a.method.clone(),
                b: b.method.clone(),
                abs_diff,
                rel_diff,
                allowed,
                pass: abs_diff <= allowed,
            });
        }
    }
    CompareReport {
        max_rel_diff: pairs.iter().map(|p| p.rel_diff).fold(0.0, f64::max),
        pass: pairs.iter().all(|p| p.pass),
        records,
        pairs,
        compare_tol: tol,
    }
}

pub fn run_compare(job: &JobSpec) -> Result<CompareReport> {
    let (x, y) = job.endpoints()?;
    let (t, kappa) = (job.time()?, job.coupling()?);
    let ests = job.estimators(kappa, x.len(), x.is_origin() && y.is_origin());
    if ests.len() < 2 {
        return Err(Error::invalid("compare needs at least two methods"));
    }
    check_signs(&ests, kappa)?;
    let records = ests
        .iter()
        .map(|&e| estimate(job, e, &x, &y, t, kappa))
        .collect::<Result<Vec<_>>>()?;
    Ok(compare_records(records, job.compare_tol.unwrap_or(DEFAULT_COMPARE_TOL)))
}

fn check_signs(ests: &[Estimator], kappa: f64) -> Result<()> {
    for e in ests {
        if let Estimator::Exact(m) = e {
            if !m.accepts(kappa) {
                let mut allowed: Vec<&str> = Method::allowed_for(kappa).iter().map(|m| m.name()).collect();
                allowed.extend(["mc", "pde"]);
                return Err(Error::invalid(format!(
                    "method {m} does not accept kappa = {kappa}; allowed: {}",
                    allowed.join(", ")
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub records: Vec<Record>,
}

pub fn run_sweep(job: &JobSpec) -> Result<SweepReport> {
    let sweep = job.sweep.as_ref().ok_or_else(|| Error::invalid("sweep needs a parameter and values"))?;
    if sweep.values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    let (x, y) = job.endpoints()?;
    let origin = x.is_origin() && y.is_origin();
    let mut records = Vec::new();
    for &v in &sweep.values {
        let (t, kappa) = match sweep.param {
            SweepParam::T => (v, job.coupling()?),
            SweepParam::Kappa => (job.time()?, v),
        };
        let ests = job.estimators(kappa, x.len(), origin);
        check_signs(&ests, kappa)?;
        for e in ests {
            records.push(estimate(job, e, &x, &y, t, kappa)?);
        }
    }
    Ok(SweepReport {
        param: sweep.param,
        values: sweep.values.clone(),
        records,
    })
}

impl SweepReport {
    /// One row per parameter value with a value and error column per method.
    pub fn columns(&self) -> Table {
        let mut methods: Vec<&str> = Vec::new();
        for r in &self.records {
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }
        let pname = match self.param {
            SweepParam::T => "t",
            SweepParam::Kappa => "kappa",
        };
        let mut header = vec![pname.to_string()];
        for m in &methods {
            header.push(m.to_string());
            header.push(format!("{m}_err"));
        }
        let mut table = Table::new(header);
        for &v in &self.values {
            let mut row = vec![fmt_f64(v)];
            for m in &methods {
                let hit = self.records.iter().find(|r| {
                    r.method == *m
                        && match self.param {
                            SweepParam::T => r.t == v,
                            SweepParam::Kappa => r.kappa == v,
                        }
                });
                match hit {
                    Some(r) => {
                        row.push(fmt_f64(r.value));
                        row.push(fmt_f64(r.error_estimate));
                    }
                    None => row.extend(["nan".to_string(), "nan".to_string()]),
                }
            }
            table.rows.push(row);
        }
        table
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub n: usize,
    pub kappa: f64,
    pub method: String,
    pub t_grid: Vec<f64>,
    pub minus_log_p: Vec<f64>,
    pub slope: f64,
    /// Ground-state energy `-kappa^2 (n^3 - n) / 12`.
    pub target: f64,
    pub relative_error: f64,
}

pub fn run_decay(job: &JobSpec) -> Result<DecayReport> {
    let n = job.particles()?;
    let kappa = job.coupling()?;
    let method = match job.methods.as_slice() {
        [] => Method::ZeroPoint,
        [Estimator::Exact(m)] => *m,
        _ => return Err(Error::invalid("decay takes one exact method")),
    };
    let grid = job.t_grid.clone().unwrap_or_else(|| DEFAULT_DECAY_GRID.to_vec());
    let (slope, minus_log_p) = decay_rate_points(n, kappa, method, &grid, job.tol())?;
    let nf = n as f64;
    let target = -kappa * kappa * (nf * nf * nf - nf) / 12.0;
    Ok(DecayReport {
        n,
        kappa,
        method: method.name().to_string(),
        t_grid: grid,
        minus_log_p,
        slope,
        target,
        relative_error: (slope - target).abs() / target.abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Report {
    Eval(Record),
    Compare(CompareReport),
    Sweep(SweepReport),
    Verify(VerifyReport),
    Decay(DecayReport),
}

pub fn run(job: &JobSpec) -> Result<Report> {
    Ok(match job.command()? {
        Command::Eval => Report::Eval(run_eval(job)?),
        Command::Compare => Report::Compare(run_compare(job)?),
        Command::Sweep => Report::Sweep(run_sweep(job)?),
        Command::Decay => Report::Decay(run_decay(job)?),
        Command::Verify => {
            let suite = job.suite.ok_or_else(|| Error::invalid("verify needs a suite"))?;
            Report::Verify(run_verify(suite, job.seed.unwrap_or(1))?)
        }
    })
}

impl Report {
    /// Whether every check in the report passed; plain evaluations always do.
    pub fn passed(&self) -> bool {
        match self {
            Report::Verify(v) => v.pass,
            _ => true,
        }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => to_json(self),
            Format::Csv => self.table().to_csv(),
            Format::Dat => match self {
                Report::Sweep(s) => Ok(s.columns().to_dat()),
                _ => Err(Error::invalid("dat output is only available for sweeps")),
            },
        }
    }

    fn table(&self) -> Table {
        match self {
            Report::Eval(r) => Table::records(std::slice::from_ref(r)),
            Report::Sweep(s) => Table::records(&s.records),
            Report::Compare(c) => {
                let mut t = Table::records(&c.records);
                t.header.extend(["max_rel_diff".into(), "pass".into()]);
                for (row, r) in t.rows.iter_mut().zip(&c.records) {
                    let mine = c.pairs.iter().filter(|p| p.a == r.method || p.b == r.method);
                    let (worst, ok) = mine.fold((0.0f64, true), |(w, ok), p| (w.max(p.rel_diff), ok && p.pass));
                    row.push(fmt_f64(worst));
                    row.push(ok.to_string());
                }
                t
            }
            Report::Verify(v) => v.table(),
            Report::Decay(d) => {
                let mut t = Table::new(["t", "minus_log_p"]);
                for (t_i, v) in d.t_grid.iter().zip(&d.minus_log_p) {
                    t.rows.push(vec![fmt_f64(*t_i), fmt_f64(*v)]);
                }
                t
            }
        }
    }
}
