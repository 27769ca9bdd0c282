use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ProblemKind, ProblemSpec, ScaleMode, SolverKind};
use crate::error::{Error, Result};

/// Partially specified run settings. Layers are combined with
/// [`RunOptions::or`], so command line values win over a config file, which
/// wins over per-problem defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub problem: Option<ProblemKind>,
    pub solver: Option<SolverKind>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub m_count: Option<usize>,
    pub tau: Option<f64>,
    pub beta: Option<f64>,
    pub memory: Option<usize>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub warm_start: Option<bool>,
    pub scale: Option<ScaleMode>,
    pub out: Option<PathBuf>,
}

/// Parse `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("line {}: expected key=value, got '{line}'", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::InvalidInput(format!("line {}: empty key", i + 1)));
        }
        out.push((k.replace('_', "-"), v.to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidInput(format!("{key}: cannot parse '{v}'")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::InvalidInput(format!("{key}: expected true or false, got '{v}'"))),
    }
}

impl RunOptions {
    /// Options from the contents of a key=value file.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut o = RunOptions::default();
        for (k, v) in parse_kv(text)? {
            let v = v.as_str();
            match k.as_str() {
                "problem" => o.problem = Some(v.parse()?),
                "solver" => o.solver = Some(v.parse()?),
                "n" => o.n = Some(num(&k, v)?),
                "p" => o.p = Some(num(&k, v)?),
                "k" => o.k = Some(num(&k, v)?),
                "m-count" => o.m_count = Some(num(&k, v)?),
                "tau" => o.tau = Some(num(&k, v)?),
                "beta" => o.beta = Some(num(&k, v)?),
                "memory" => o.memory = Some(num(&k, v)?),
                "max-iter" => o.max_iter = Some(num(&k, v)?),
                "tol" => o.tol = Some(num(&k, v)?),
                "trials" => o.trials = Some(num(&k, v)?),
                "seed" => o.seed = Some(num(&k, v)?),
                "warm-start" => o.warm_start = Some(flag(&k, v)?),
                "scale" => o.scale = Some(v.parse()?),
                "out" => o.out = Some(PathBuf::from(v)),
                _ => return Err(Error::InvalidInput(format!("unknown config key '{k}'"))),
            }
        }
        Ok(o)
    }

    /// Field-wise `self` if set, else `lower`.
    pub fn or(self, lower: RunOptions) -> RunOptions {
        RunOptions {
            problem: self.problem.or(lower.problem),
            solver: self.solver.or(lower.solver),
            n: self.n.or(lower.n),
            p: self.p.or(lower.p),
            k: self.k.or(lower.k),
            m_count: self.m_count.or(lower.m_count),
            tau: self.tau.or(lower.tau),
            beta: self.beta.or(lower.beta),
            memory: self.memory.or(lower.memory),
            max_iter: self.max_iter.or(lower.max_iter),
            tol: self.tol.or(lower.tol),
            trials: self.trials.or(lower.trials),
            seed: self.seed.or(lower.seed),
            warm_start: self.warm_start.or(lower.warm_start),
            scale: self.scale.or(lower.scale),
            out: self.out.or(lower.out),
        }
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let kind = self
            .problem
            .ok_or_else(|| Error::InvalidInput("no problem given".into()))?;
        let d = ProblemSpec::default_for(kind);
        let n = self.n.unwrap_or(d.n);
        let m = match kind {
            ProblemKind::Matcomp => self.m_count.unwrap_or(n),
            _ => self.m_count.unwrap_or(d.m),
        };
        let spec = ProblemSpec {
            kind,
            n,
            p: self.p.unwrap_or(d.p),
            k: self.k.unwrap_or(d.k),
            m,
            tau: self.tau.unwrap_or(d.tau),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Resolve every unset field to its default.
    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let solver = self
            .solver
            .ok_or_else(|| Error::InvalidInput("no solver given".into()))?;
        let mut cfg = ExperimentConfig::new(self.problem_spec()?, solver);
        if let Some(v) = self.beta {
            cfg.beta = v;
        }
        if let Some(v) = self.memory {
            cfg.memory = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.seed {
            cfg.seed_base = v;
        }
        if let Some(v) = self.warm_start {
            cfg.warm_start = v;
        }
        if let Some(v) = self.scale {
            cfg.scale = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
