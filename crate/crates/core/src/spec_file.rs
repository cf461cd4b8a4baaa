//! TOML experiment specifications: parameters, optional feasibility
//! predicate, and how to evaluate a point.

use std::path::Path;
use std::time::Duration;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::orchestrator::{AppCommand, Objective};
use crate::space::{DomainKind, Level, ParamDomain, SearchSpace};

#[derive(Debug, Clone, PartialEq)]
pub enum AppSpec {
    Command {
        template: String,
        objective: Objective,
        timeout: Option<Duration>,
        parallelism: Option<usize>,
    },
    /// A synthetic landscape subject.
    Builtin {
        family: String,
        family_seed: u64,
        subject: usize,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub space: SearchSpace,
    pub app: Option<AppSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamToml {
    name: String,
    kind: String,
    values: Vec<toml::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AppToml {
    command: Option<String>,
    objective: Option<String>,
    objective_file: Option<String>,
    timeout_secs: Option<f64>,
    parallelism: Option<usize>,
    builtin: Option<String>,
    family_seed: Option<u64>,
    subject: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecToml {
    name: Option<String>,
    feasible: Option<String>,
    #[serde(default)]
    param: Vec<ParamToml>,
    app: Option<AppToml>,
}

fn level(v: &toml::Value, param: &str) -> Result<Level> {
    match v {
        toml::Value::Integer(i) => Ok(Level::Num(*i as f64)),
        toml::Value::Float(f) => Ok(Level::Num(*f)),
        toml::Value::String(s) => Ok(Level::Label(s.clone())),
        other => Err(Error::SpecFile(format!(
            "parameter `{param}`: unsupported value {other}"
        ))),
    }
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: SpecToml = toml::from_str(text).map_err(|e| Error::SpecFile(e.to_string()))?;
        let mut domains = Vec::with_capacity(raw.param.len());
        for p in &raw.param {
            let kind = DomainKind::parse(&p.kind).ok_or_else(|| {
                Error::SpecFile(format!("parameter `{}`: unknown kind `{}`", p.name, p.kind))
            })?;
            let values = p
                .values
                .iter()
                .map(|v| level(v, &p.name))
                .collect::<Result<Vec<_>>>()?;
            domains.push(ParamDomain::new(p.name.clone(), kind, values)?);
        }
        let mut space = SearchSpace::new(domains)?;
        if let Some(src) = &raw.feasible {
            space = space.with_feasibility(src)?;
        }
        let app = raw.app.map(|a| app_spec(a)).transpose()?;
        Ok(Self {
            name: raw.name.unwrap_or_else(|| "experiment".to_owned()),
            space,
            app,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The external command, validated against the parameters.
    pub fn command(&self) -> Result<Option<AppCommand>> {
        match &self.app {
            Some(AppSpec::Command {
                template,
                objective,
                timeout,
                parallelism,
            }) => {
                let mut cmd = AppCommand::new(template, &self.space, objective.clone(), *timeout)?;
                if let Some(n) = parallelism {
                    cmd = cmd.with_parallelism(*n);
                }
                Ok(Some(cmd))
            }
            _ => Ok(None),
        }
    }
}

fn app_spec(a: AppToml) -> Result<AppSpec> {
    match (a.command, a.builtin) {
        (Some(template), None) => {
            let objective = match (a.objective.as_deref().unwrap_or("stdout"), a.objective_file) {
                ("stdout", None) => Objective::Stdout,
                ("file", Some(path)) => Objective::File(path),
                ("file", None) => {
                    return Err(Error::SpecFile("objective = \"file\" needs objective_file".into()))
                }
                ("stdout", Some(_)) => {
                    return Err(Error::SpecFile("objective_file needs objective = \"file\"".into()))
                }
                (other, _) => return Err(Error::SpecFile(format!("unknown objective `{other}`"))),
            };
            let timeout = match a.timeout_secs {
                Some(t) if t > 0.0 && t.is_finite() => Some(Duration::from_secs_f64(t)),
                Some(t) => return Err(Error::SpecFile(format!("timeout_secs {t} must be positive"))),
                None => None,
            };
            Ok(AppSpec::Command {
                template,
                objective,
                timeout,
                parallelism: a.parallelism,
            })
        }
        (None, Some(family)) => Ok(AppSpec::Builtin {
            family,
            family_seed: a.family_seed.unwrap_or(0),
            subject: a.subject.unwrap_or(0),
        }),
        (Some(_), Some(_)) => Err(Error::SpecFile("[app] takes either command or builtin".into())),
        (None, None) => Err(Error::SpecFile("[app] needs command or builtin".into())),
    }
}
