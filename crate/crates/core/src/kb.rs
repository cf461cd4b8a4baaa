//! Knowledge-base storage: one JSON document per experiment.
//!
//! Floats are written in shortest round-trip form, so reloading restores
//! every output bit for bit.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use crate::error::{Error, Result};
use crate::space::{DomainKind, ExperimentRecord, Job, Level, ParamDomain, Point, SearchSpace};
use crate::surrogate::{Metric, SurrogateSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub application: String,
    /// Seconds since the Unix epoch.
    #[serde(default)]
    pub created_unix: u64,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbEntry {
    pub schema_version: u32,
    pub record: ExperimentRecord<f64>,
    pub metadata: Metadata,
}

impl KbEntry {
    pub fn new(record: ExperimentRecord<f64>, metadata: Metadata) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            record,
            metadata,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DomainDoc {
    name: String,
    kind: DomainKind,
    values: Vec<Level>,
}

#[derive(Serialize, Deserialize)]
struct SurrogateDoc {
    k: usize,
    metric: String,
}

#[derive(Deserialize)]
struct Document {
    version: u32,
    id: String,
    domains: Vec<DomainDoc>,
    #[serde(default)]
    feasibility: Option<String>,
    jobs: Vec<Vec<Number>>,
    #[serde(default)]
    surrogate: Option<SurrogateDoc>,
    #[serde(default)]
    metadata: Metadata,
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// Document text: pretty-printed, one job per line.
pub fn to_json(entry: &KbEntry) -> Result<String> {
    let r = &entry.record;
    let space = r.space();
    let domains: Vec<DomainDoc> = space
        .domains()
        .iter()
        .map(|d| DomainDoc {
            name: d.name().to_owned(),
            kind: d.kind(),
            values: d.values().to_vec(),
        })
        .collect();
    let surrogate = r.surrogate_spec().map(|spec| SurrogateDoc {
        k: spec.k,
        metric: spec.metric.id().to_owned(),
    });
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"version\": {},\n", entry.schema_version));
    out.push_str(&format!("  \"id\": {},\n", json(&r.id())));
    out.push_str("  \"domains\": [\n");
    for (i, d) in domains.iter().enumerate() {
        let sep = if i + 1 < domains.len() { "," } else { "" };
        out.push_str(&format!("    {}{sep}\n", json(d)));
    }
    out.push_str("  ],\n");
    out.push_str(&format!(
        "  \"feasibility\": {},\n",
        json(&space.feasibility().map(|f| f.source()))
    ));
    out.push_str("  \"jobs\": [");
    for (i, job) in r.jobs().iter().enumerate() {
        let mut row: Vec<Value> = job.point.coords().iter().map(|&c| Value::from(c)).collect();
        let out_num = Number::from_f64(job.output).ok_or_else(|| Error::KbFormat {
            path: PathBuf::from(r.id()),
            reason: "non-finite output".into(),
        })?;
        row.push(Value::Number(out_num));
        out.push_str(if i == 0 { "\n    " } else { ",\n    " });
        out.push_str(&json(&row));
    }
    out.push_str(if r.jobs().is_empty() { "],\n" } else { "\n  ],\n" });
    out.push_str(&format!("  \"surrogate\": {},\n", json(&surrogate)));
    out.push_str(&format!(
        "  \"metadata\": {}\n",
        serde_json::to_string_pretty(&entry.metadata)
            .expect("plain data serializes")
            .replace('\n', "\n  ")
    ));
    out.push_str("}\n");
    Ok(out)
}

pub fn from_json(text: &str, origin: &Path) -> Result<KbEntry> {
    let bad = |reason: String| Error::KbFormat {
        path: origin.to_path_buf(),
        reason,
    };
    let doc: Document = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if doc.version != SCHEMA_VERSION {
        return Err(bad(format!("unsupported schema version {}", doc.version)));
    }
    let domains = doc
        .domains
        .into_iter()
        .map(|d| ParamDomain::new(d.name, d.kind, d.values))
        .collect::<Result<Vec<_>>>()?;
    let dims = domains.len();
    let mut space = SearchSpace::new(domains)?;
    if let Some(src) = &doc.feasibility {
        space = space.with_feasibility(src)?;
    }
    let mut jobs = Vec::with_capacity(doc.jobs.len());
    for (i, row) in doc.jobs.iter().enumerate() {
        if row.len() != dims + 1 {
            return Err(bad(format!("job {i} has {} entries, expected {}", row.len(), dims + 1)));
        }
        let coords = row[..dims]
            .iter()
            .map(|n| n.as_u64().map(|c| c as usize))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(format!("job {i} has a non-integer index")))?;
        let output = row[dims].as_f64().ok_or_else(|| bad(format!("job {i} output")))?;
        jobs.push(Job::done(Point::new(coords), output));
    }
    let surrogate = match doc.surrogate {
        Some(s) => Some(SurrogateSpec {
            k: s.k,
            metric: Metric::parse(&s.metric)
                .ok_or_else(|| bad(format!("unknown metric `{}`", s.metric)))?,
        }),
        None => None,
    };
    let record = ExperimentRecord::new(doc.id, space, jobs, surrogate)?;
    Ok(KbEntry {
        schema_version: doc.version,
        record,
        metadata: doc.metadata,
    })
}

fn file_name(id: &str) -> Result<String> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || "._-".contains(c));
    if !ok {
        return Err(Error::InvalidExperiment {
            id: id.to_owned(),
            reason: "ids used as file names may only contain letters, digits, `.`, `_` and `-`"
                .into(),
        });
    }
    Ok(format!("{id}.json"))
}

/// Writes `{id}.json` in `dir`, replacing any previous version atomically.
pub fn save(entry: &KbEntry, dir: &Path) -> Result<PathBuf> {
    let name = file_name(entry.record.id())?;
    let text = to_json(entry)?;
    fs::create_dir_all(dir)?;
    let path = dir.join(&name);
    let tmp = dir.join(format!("{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

pub fn load_entry(path: &Path) -> Result<KbEntry> {
    let text = fs::read_to_string(path)?;
    from_json(&text, path)
}

#[derive(Debug, Default)]
pub struct LoadedKb {
    pub entries: Vec<KbEntry>,
    /// One message per skipped file.
    pub warnings: Vec<String>,
}

/// Loads every `*.json` file of `dir` in name order, skipping files that do
/// not parse or validate.
pub fn load_kb(dir: &Path) -> Result<LoadedKb> {
    if !dir.is_dir() {
        return Err(Error::MissingKb(dir.to_path_buf()));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = LoadedKb::default();
    for p in paths {
        match load_entry(&p) {
            Ok(e) => out.entries.push(e),
            Err(e) => out.warnings.push(format!("skipped {}: {e}", p.display())),
        }
    }
    Ok(out)
}
