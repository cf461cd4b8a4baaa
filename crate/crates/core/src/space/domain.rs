use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single discrete value a parameter can take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Level {
    Num(f64),
    Label(String),
}

impl Level {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Level::Num(v) => Some(*v),
            Level::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Level::Num(_) => None,
            Level::Label(s) => Some(s),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::Num(v) => write!(f, "{v}"),
            Level::Label(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Level {
    fn from(v: f64) -> Self {
        Level::Num(v)
    }
}

impl From<&str> for Level {
    fn from(s: &str) -> Self {
        Level::Label(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Ordinal,
    Categorical,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Ordinal => "ordinal",
            DomainKind::Categorical => "categorical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ordinal" => Some(DomainKind::Ordinal),
            "categorical" => Some(DomainKind::Categorical),
            _ => None,
        }
    }
}

/// Ordered finite domain of one parameter.
///
/// Ordinal domains hold strictly increasing numeric levels. Categorical
/// domains hold distinct levels, all numeric or all labels, and use their
/// declaration order as index order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDomain {
    name: String,
    kind: DomainKind,
    values: Vec<Level>,
}

impl ParamDomain {
    pub fn new(name: impl Into<String>, kind: DomainKind, values: Vec<Level>) -> Result<Self> {
        let name = name.into();
        let invalid = |reason: &str| Error::InvalidDomain {
            name: name.clone(),
            reason: reason.to_owned(),
        };
        if name.is_empty() {
            return Err(invalid("empty parameter name"));
        }
        if values.is_empty() {
            return Err(invalid("no values"));
        }
        match kind {
            DomainKind::Ordinal => {
                let mut prev: Option<f64> = None;
                for v in &values {
                    let x = v
                        .as_num()
                        .ok_or_else(|| invalid("ordinal values must be numeric"))?;
                    if !x.is_finite() {
                        return Err(invalid("ordinal values must be finite"));
                    }
                    if let Some(p) = prev {
                        if x == p {
                            return Err(invalid("duplicate value"));
                        }
                        if x < p {
                            return Err(invalid("ordinal values must be sorted ascending"));
                        }
                    }
                    prev = Some(x);
                }
            }
            DomainKind::Categorical => {
                let numeric = values.iter().filter(|v| v.as_num().is_some()).count();
                if numeric != 0 && numeric != values.len() {
                    return Err(invalid("categorical values must be all numeric or all labels"));
                }
                for (i, a) in values.iter().enumerate() {
                    if values[..i].contains(a) {
                        return Err(invalid("duplicate value"));
                    }
                }
            }
        }
        Ok(Self { name, kind, values })
    }

    pub fn ordinal(name: impl Into<String>, levels: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::new(
            name,
            DomainKind::Ordinal,
            levels.into_iter().map(Level::Num).collect(),
        )
    }

    /// Ordinal domain with levels `0, 1, ..., n - 1`.
    pub fn ordinal_range(name: impl Into<String>, n: usize) -> Result<Self> {
        Self::ordinal(name, (0..n).map(|i| i as f64))
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        Self::new(
            name,
            DomainKind::Categorical,
            labels.into_iter().map(|s| Level::Label(s.into())).collect(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn values(&self) -> &[Level] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when every level is numeric.
    pub fn is_numeric(&self) -> bool {
        self.values.iter().all(|v| v.as_num().is_some())
    }

    pub fn index_of(&self, level: &Level) -> Option<usize> {
        self.values.iter().position(|v| v == level)
    }
}
