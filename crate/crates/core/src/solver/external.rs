use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{verify_model, SolveResult, SolveStats, SolverError, Verdict};
use crate::cnf::read_dimacs;

/// The `s` status and `v` values of a solver run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverOutput {
    pub status: Option<Verdict>,
    /// DIMACS literals from `v` lines, without the terminating 0.
    pub values: Vec<i32>,
}

/// Parses SAT competition output. Lines other than `s` and `v` are ignored.
pub fn parse_solver_output(text: &str) -> Result<SolverOutput, SolverError> {
    let mut status = None;
    let mut values = Vec::new();
    for line in text.lines() {
        let line = line.trim_end();
        if let Some(rest) = line.strip_prefix("s ") {
            let verdict = match rest.trim() {
                "SATISFIABLE" => Verdict::Sat,
                "UNSATISFIABLE" => Verdict::Unsat,
                "UNKNOWN" | "INDETERMINATE" => Verdict::Unknown,
                other => return Err(SolverError::Output(format!("unknown status `{other}`"))),
            };
            if status.is_some_and(|s| s != verdict) {
                return Err(SolverError::Output("conflicting status lines".into()));
            }
            status = Some(verdict);
        } else if let Some(rest) = line.strip_prefix('v') {
            for tok in rest.split_whitespace() {
                let v: i32 = tok
                    .parse()
                    .map_err(|_| SolverError::Output(format!("invalid value `{tok}` in v line")))?;
                if v != 0 {
                    values.push(v);
                }
            }
        }
    }
    Ok(SolverOutput { status, values })
}

fn split_template(template: &str, path: &Path) -> Result<Vec<String>, SolverError> {
    let file = path.to_string_lossy();
    let args: Vec<String> = template
        .split_whitespace()
        .map(|tok| tok.replace("{file}", &file))
        .collect();
    if args.is_empty() {
        return Err(SolverError::EmptyCommand);
    }
    Ok(args)
}

fn drain<R: Read + Send + 'static>(reader: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut r) = reader {
            let _ = r.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

/// Runs an external solver on a DIMACS file.
///
/// `template` is split on whitespace and every `{file}` is replaced by the
/// path. A run that times out or never prints an `s` line is `Unknown`;
/// SAT answers are only accepted with a model that satisfies the file.
pub fn solve_external(
    dimacs: &Path,
    template: &str,
    timeout: Duration,
) -> Result<SolveResult, SolverError> {
    let args = split_template(template, dimacs)?;
    let start = Instant::now();
    let mut child = Command::new(&args[0])
        .args(&args[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| SolverError::Spawn {
            command: args.join(" "),
            source,
        })?;
    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());

    let mut timed_out = false;
    loop {
        if child.try_wait()?.is_some() {
            break;
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            timed_out = true;
            break;
        }
        thread::sleep(Duration::from_millis(2));
    }
    let out = stdout.join().unwrap_or_default();
    let err = stderr.join().unwrap_or_default();
    let stats = SolveStats {
        elapsed: start.elapsed(),
        ..SolveStats::default()
    };
    let captured = if err.is_empty() {
        out.clone()
    } else {
        format!("{out}{err}")
    };
    let unknown = |stats: SolveStats| SolveResult {
        verdict: Verdict::Unknown,
        model: None,
        stats,
        output: Some(captured.clone()),
    };
    if timed_out {
        return Ok(unknown(stats));
    }

    let parsed = parse_solver_output(&out)?;
    match parsed.status {
        None | Some(Verdict::Unknown) => Ok(unknown(stats)),
        Some(Verdict::Unsat) => Ok(SolveResult {
            verdict: Verdict::Unsat,
            model: None,
            stats,
            output: Some(captured),
        }),
        Some(Verdict::Sat) => {
            let formula = read_dimacs(BufReader::new(File::open(dimacs)?))?;
            let mut model = vec![false; formula.num_vars() as usize];
            for v in parsed.values {
                let var = v.unsigned_abs() as usize;
                if var > model.len() {
                    return Err(SolverError::BadModel(format!(
                        "value {v} exceeds {} variables",
                        model.len()
                    )));
                }
                model[var - 1] = v > 0;
            }
            if !verify_model(&formula, &model)? {
                return Err(SolverError::BadModel("some clause is falsified".into()));
            }
            Ok(SolveResult {
                verdict: Verdict::Sat,
                model: Some(model),
                stats,
                output: Some(captured),
            })
        }
    }
}
