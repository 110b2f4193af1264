//! Job specifications: everything one invocation computes, in a form that
//! both the flag parser and `--job` JSON files produce.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use deltabose::oracles::LocalTimeEstimator;
use deltabose::{Error, McConfig, Method, ParticleConfig, PdeConfig, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Eval,
    Compare,
    Sweep,
    Verify,
    Decay,
}

/// An exact evaluator or one of the two oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Estimator {
    Exact(Method),
    Mc,
    Pde,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Exact(m) => m.name(),
            Estimator::Mc => "mc",
            Estimator::Pde => "pde",
        }
    }

    pub fn is_exact(self) -> bool {
        matches!(self, Estimator::Exact(_))
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mc" | "monte-carlo" => Ok(Estimator::Mc),
            "pde" | "fd" => Ok(Estimator::Pde),
            _ => s.parse::<Method>().map(Estimator::Exact).map_err(|_| {
                let mut names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                names.extend(["mc", "pde"]);
                Error::invalid(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
            }),
        }
    }
}

impl TryFrom<String> for Estimator {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Estimator> for String {
    fn from(e: Estimator) -> String {
        e.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    /// Whitespace-delimited columns behind a `#` header (sweeps only).
    Dat,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "dat" | "gnuplot" => Ok(Format::Dat),
            _ => Err(Error::invalid(format!("unknown format {s:?}; expected json, csv or dat"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Poles,
    Completeness,
    Decay,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identities" => Ok(Suite::Identities),
            "poles" => Ok(Suite::Poles),
            "completeness" => Ok(Suite::Completeness),
            "decay" => Ok(Suite::Decay),
            _ => Err(Error::invalid(format!(
                "unknown suite {s:?}; expected identities, poles, completeness or decay"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    T,
    Kappa,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(SweepParam::T),
            "kappa" => Ok(SweepParam::Kappa),
            _ => Err(Error::invalid(format!("sweep parameter must be t or kappa, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JobSpec {
    pub command: Option<Command>,
    pub n: Option<usize>,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub t: Option<f64>,
    pub kappa: Option<f64>,
    /// `eval` and `decay` use the first entry.
    pub methods: Vec<Estimator>,
    pub zero_point: bool,
    pub tol: Option<f64>,
    /// Relative tolerance for exact-vs-exact pairs in `compare`.
    pub compare_tol: Option<f64>,
    pub sweep: Option<SweepSpec>,
    pub suite: Option<Suite>,
    pub t_grid: Option<Vec<f64>>,
    pub mc_paths: Option<u64>,
    pub mc_steps: Option<usize>,
    pub mc_antithetic: Option<bool>,
    pub mc_estimator: Option<LocalTimeEstimator>,
    pub mc_bandwidth: Option<f64>,
    pub pde_du: Option<f64>,
    pub pde_dtau: Option<f64>,
    pub pde_half_width: Option<f64>,
    pub seed: Option<u64>,
    pub format: Format,
    pub output: Option<PathBuf>,
    /// Add wall-clock timings to records; off by default so output is reproducible.
    pub timing: bool,
}

pub const DEFAULT_COMPARE_TOL: f64 = 1e-7;
pub const DEFAULT_DECAY_GRID: [f64; 5] = [4.0, 5.0, 6.0, 7.0, 8.0];
/// Relative tolerance granted to the finite-difference oracle in comparisons.
pub const PDE_REL_TOL: f64 = 1e-3;
/// Standard errors granted to the Monte Carlo oracle in comparisons.
pub const MC_SIGMAS: f64 = 3.0;

impl JobSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("job file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read job file {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn command(&self) -> Result<Command> {
        self.command.ok_or_else(|| Error::invalid("job has no command"))
    }

    /// Particle count from `n`, `x` or `y`, checked for consistency.
    pub fn particles(&self) -> Result<usize> {
        let lens = [self.n, self.x.as_ref().map(Vec::len), self.y.as_ref().map(Vec::len)];
        let mut found: Option<usize> = None;
        for len in lens.into_iter().flatten() {
            match found {
                Some(n) if n != len => {
                    return Err(Error::invalid(format!(
                        "inconsistent particle counts: n, x and y give {n} and {len}"
                    )))
                }
                _ => found = Some(len),
            }
        }
        match found {
            Some(0) => Err(Error::invalid("need at least one particle")),
            Some(n) => Ok(n),
            None => Err(Error::invalid("give n or the positions x and y")),
        }
    }

    /// Endpoints; a missing side defaults to the origin.
    pub fn endpoints(&self) -> Result<(ParticleConfig, ParticleConfig)> {
        let n = self.particles()?;
        let side = |v: &Option<Vec<f64>>, name: &str| -> Result<ParticleConfig> {
            match v {
                None => Ok(ParticleConfig::origin(n)),
                Some(v) => ParticleConfig::new(v.clone()).map_err(|e| match e {
                    Error::InvalidArgument(msg) => Error::invalid(format!("{name}: {msg}")),
                    other => other,
                }),
            }
        };
        if self.zero_point && (self.x.iter().chain(&self.y).flatten().any(|&v| v != 0.0)) {
            return Err(Error::invalid("zero-point evaluation requires x = y = 0"));
        }
        Ok((side(&self.x, "x")?, side(&self.y, "y")?))
    }

    pub fn time(&self) -> Result<f64> {
        self.t.ok_or_else(|| Error::invalid("missing time t"))
    }

    pub fn coupling(&self) -> Result<f64> {
        self.kappa.ok_or_else(|| Error::invalid("missing coupling kappa"))
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(deltabose::propagator::DEFAULT_TOL)
    }

    /// The single estimator of `eval`: `--zero-point` wins, then the first
    /// listed method, then the first exact method accepting `kappa`.
    pub fn single_estimator(&self, kappa: f64) -> Result<Estimator> {
        if self.zero_point {
            return Ok(Estimator::Exact(Method::ZeroPoint));
        }
        match self.methods.as_slice() {
            [] => Ok(Estimator::Exact(Method::allowed_for(kappa)[0])),
            [one] => Ok(*one),
            many => Err(Error::invalid(format!(
                "this command takes one method, got {}",
                many.len()
            ))),
        }
    }

    /// Estimators for `compare` and `sweep`; defaults to every exact method
    /// usable for the query.
    pub fn estimators(&self, kappa: f64, n: usize, at_origin: bool) -> Vec<Estimator> {
        if !self.methods.is_empty() {
            return self.methods.clone();
        }
        Method::allowed_for(kappa)
            .into_iter()
            .filter(|&m| match m {
                Method::ZeroPoint => at_origin,
                Method::PartitionForm => n <= deltabose::propagator::MAX_N_PARTITION,
                _ => n <= deltabose::propagator::MAX_N,
            })
            .map(Estimator::Exact)
            .collect()
    }

    pub fn mc_config(&self) -> McConfig {
        let d = McConfig::default();
        McConfig {
            paths: self.mc_paths.unwrap_or(d.paths),
            steps: self.mc_steps.unwrap_or(d.steps),
            bandwidth: self.mc_bandwidth.or(d.bandwidth),
            seed: self.seed.unwrap_or(d.seed),
            antithetic: self.mc_antithetic.unwrap_or(d.antithetic),
            estimator: self.mc_estimator.unwrap_or(d.estimator),
        }
    }

    pub fn pde_config(&self) -> PdeConfig {
        let d = PdeConfig::default();
        PdeConfig {
            du: self.pde_du.unwrap_or(d.du),
            dtau: self.pde_dtau.unwrap_or(d.dtau),
            half_width: self.pde_half_width.or(d.half_width),
            tol: d.tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_names_round_trip() {
        for m in Method::ALL {
            let e = Estimator::Exact(m);
            assert_eq!(e.name().parse::<Estimator>().unwrap(), e);
        }
        assert_eq!("MC".parse::<Estimator>().unwrap(), Estimator::Mc);
        let err = "thm9".parse::<Estimator>().unwrap_err().to_string();
        assert!(err.contains("pde") && err.contains("thm2"), "{err}");
    }

    #[test]
    fn json_job_parses() {
        let job = JobSpec::from_json(
            r#"{"command":"compare","x":[0,0.5],"y":[0,0.5],"t":1,"kappa":1,
                "methods":["thm1","thm2","pde"],"format":"csv","seed":7}"#,
        )
        .unwrap();
        assert_eq!(job.command().unwrap(), Command::Compare);
        assert_eq!(job.particles().unwrap(), 2);
        assert_eq!(job.methods[2], Estimator::Pde);
        assert_eq!(job.mc_config().seed, 7);
        let back = JobSpec::from_json(&serde_json::to_string(&job).unwrap()).unwrap();
        assert_eq!(back, job);
    }

    #[test]
    fn bad_jobs_are_rejected() {
        assert!(JobSpec::from_json(r#"{"command":"eval","bogus":1}"#).is_err());
        assert!(JobSpec::from_json(r#"{"methods":["thm7"]}"#).is_err());
        let job = JobSpec { n: Some(3), x: Some(vec![0.0, 1.0]), ..Default::default() };
        assert!(job.particles().is_err());
        let job = JobSpec { x: Some(vec![1.0, 0.0]), ..Default::default() };
        let msg = job.endpoints().unwrap_err().to_string();
        assert!(msg.contains("ordered sector"), "{msg}");
    }

    #[test]
    fn default_estimators_follow_the_coupling() {
        let job = JobSpec::default();
        let names: Vec<&str> = job.estimators(1.0, 2, false).iter().map(|e| e.name()).collect();
        assert_eq!(names, ["thm1", "thm2", "partition"]);
        let names: Vec<&str> = job.estimators(-1.0, 4, true).iter().map(|e| e.name()).collect();
        assert_eq!(names, ["tw", "eigen"]);
    }
}
