//! Running the user application for one parameter point.

use std::collections::HashMap;
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::space::{Point, SearchSpace};

/// Evaluates the objective at a point. Failures carry a message and never
/// abort a batch.
pub trait Evaluator: Sync {
    fn evaluate(&self, space: &SearchSpace, point: &Point, job: usize) -> Result<f64, String>;

    /// Jobs run concurrently within a batch.
    fn parallelism(&self) -> usize {
        1
    }
}

/// Adapts a closure over the point.
pub struct FnEvaluator<F>(pub F);

impl<F> Evaluator for FnEvaluator<F>
where
    F: Fn(&Point) -> Result<f64, String> + Sync,
{
    fn evaluate(&self, _: &SearchSpace, point: &Point, _: usize) -> Result<f64, String> {
        (self.0)(point)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Last non-empty line of standard output.
    Stdout,
    /// File holding a single number; the path may use the same
    /// placeholders as the command.
    File(String),
}

/// External command run once per job, without a shell.
///
/// `{name}` in the template is replaced by the value of parameter `name`
/// and `{job}` by the job number. Every parameter must appear exactly once.
#[derive(Debug, Clone)]
pub struct AppCommand {
    argv: Vec<String>,
    objective: Objective,
    timeout: Option<Duration>,
    parallelism: usize,
    workdir: Option<PathBuf>,
}

fn placeholders(s: &str) -> Result<Vec<&str>> {
    let mut out = Vec::new();
    let mut rest = s;
    while let Some(open) = rest.find('{') {
        let tail = &rest[open + 1..];
        let close = tail
            .find('}')
            .ok_or_else(|| Error::SpecFile(format!("unclosed placeholder in `{s}`")))?;
        out.push(&tail[..close]);
        rest = &tail[close + 1..];
    }
    Ok(out)
}

fn fill(token: &str, values: &HashMap<&str, String>) -> String {
    let mut out = String::with_capacity(token.len());
    let mut rest = token;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        let close = tail.find('}').expect("validated on construction");
        out.push_str(&values[&tail[..close]]);
        rest = &tail[close + 1..];
    }
    out.push_str(rest);
    out
}

impl AppCommand {
    pub fn new(
        template: &str,
        space: &SearchSpace,
        objective: Objective,
        timeout: Option<Duration>,
    ) -> Result<Self> {
        let argv = shlex::split(template)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| Error::SpecFile(format!("cannot split command `{template}`")))?;
        let names: Vec<&str> = space.domains().iter().map(|d| d.name()).collect();
        let mut uses: HashMap<&str, usize> = names.iter().map(|&n| (n, 0)).collect();
        for arg in &argv {
            for p in placeholders(arg)? {
                if p == "job" {
                    continue;
                }
                *uses
                    .get_mut(p)
                    .ok_or_else(|| Error::SpecFile(format!("unknown placeholder `{{{p}}}`")))? += 1;
            }
        }
        for n in &names {
            match uses[n] {
                1 => {}
                0 => return Err(Error::SpecFile(format!("command never uses `{{{n}}}`"))),
                k => return Err(Error::SpecFile(format!("command uses `{{{n}}}` {k} times"))),
            }
        }
        if let Objective::File(path) = &objective {
            for p in placeholders(path)? {
                if p != "job" && !names.contains(&p) {
                    return Err(Error::SpecFile(format!("unknown placeholder `{{{p}}}`")));
                }
            }
        }
        Ok(Self {
            argv,
            objective,
            timeout,
            parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
            workdir: None,
        })
    }

    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.parallelism = n.max(1);
        self
    }

    pub fn with_workdir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.workdir = Some(dir.into());
        self
    }

    fn values<'a>(&self, space: &'a SearchSpace, point: &Point, job: usize) -> HashMap<&'a str, String> {
        let mut values: HashMap<&str, String> = space
            .domains()
            .iter()
            .zip(space.resolve(point))
            .map(|(d, v)| (d.name(), v.to_string()))
            .collect();
        values.insert("job", job.to_string());
        values
    }

    /// Argument vector for one job.
    pub fn render(&self, space: &SearchSpace, point: &Point, job: usize) -> Vec<String> {
        let values = self.values(space, point, job);
        self.argv.iter().map(|a| fill(a, &values)).collect()
    }

    fn run(&self, space: &SearchSpace, point: &Point, job: usize) -> Result<f64, String> {
        let argv = self.render(space, point, job);
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        if let Some(dir) = &self.workdir {
            cmd.current_dir(dir);
        }
        let mut child = cmd.spawn().map_err(|e| format!("cannot launch `{}`: {e}", argv[0]))?;
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let reader = std::thread::spawn(move || {
            let mut s = String::new();
            stdout.read_to_string(&mut s).map(|_| s)
        });
        let status = match self.timeout {
            Some(t) => match child.wait_timeout(t).map_err(|e| e.to_string())? {
                Some(s) => s,
                None => {
                    // the reader ends once every holder of the pipe exits
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(format!("timed out after {}s", t.as_secs_f64()));
                }
            },
            None => child.wait().map_err(|e| e.to_string())?,
        };
        let out = reader
            .join()
            .map_err(|_| "stdout reader panicked".to_owned())?
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("exited with {status}"));
        }
        let text = match &self.objective {
            Objective::Stdout => out,
            Objective::File(path) => {
                let mut path = PathBuf::from(fill(path, &self.values(space, point, job)));
                if let (Some(dir), true) = (&self.workdir, path.is_relative()) {
                    path = dir.join(path);
                }
                std::fs::read_to_string(&path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?
            }
        };
        let line = text
            .lines()
            .map(str::trim)
            .rfind(|l| !l.is_empty())
            .ok_or_else(|| "empty objective output".to_owned())?;
        let v: f64 = line
            .parse()
            .map_err(|_| format!("objective `{line}` is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("objective `{line}` is not finite"))
        }
    }
}

impl Evaluator for AppCommand {
    fn evaluate(&self, space: &SearchSpace, point: &Point, job: usize) -> Result<f64, String> {
        self.run(space, point, job)
    }

    fn parallelism(&self) -> usize {
        self.parallelism
    }
}

/// Evaluates `points` with up to `app.parallelism()` concurrent jobs; job
/// numbers start at `first_job`. Results follow input order.
pub fn evaluate_all(
    app: &dyn Evaluator,
    space: &SearchSpace,
    points: &[Point],
    first_job: usize,
) -> Vec<Result<f64, String>> {
    let workers = app.parallelism().min(points.len());
    if workers <= 1 {
        return points
            .iter()
            .enumerate()
            .map(|(i, p)| app.evaluate(space, p, first_job + i))
            .collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<f64, String>>> = vec![None; points.len()];
    let done: Vec<Vec<(usize, Result<f64, String>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(p) = points.get(i) else { break };
                        mine.push((i, app.evaluate(space, p, first_job + i)));
                    }
                    mine
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_default())
            .collect()
    });
    for (i, r) in done.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots
        .into_iter()
        .map(|r| r.unwrap_or_else(|| Err("worker panicked".to_owned())))
        .collect()
}
