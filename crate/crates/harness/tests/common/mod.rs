#![allow(dead_code)]

use std::env;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_c3dsm")
}

pub fn c3dsm<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(bin()).args(args).output().expect("c3dsm runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix(": "))
}

fn on_path(name: &str) -> bool {
    env::var_os("PATH")
        .is_some_and(|paths| env::split_paths(&paths).any(|dir| dir.join(name).is_file()))
}

fn wrapper_script() -> PathBuf {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts/pysat_solve.py");
    path.canonicalize().unwrap_or(path)
}

/// A solver command template, probing $C3DSM_SOLVER_CMD, native solvers on
/// PATH and finally the PySAT wrapper script.
pub fn external_solver() -> Option<String> {
    if let Ok(cmd) = env::var("C3DSM_SOLVER_CMD") {
        if !cmd.trim().is_empty() {
            return Some(cmd);
        }
    }
    for (name, template) in [
        ("kissat", "kissat -q {file}"),
        ("cadical", "cadical -q {file}"),
        ("glucose", "glucose -model {file}"),
    ] {
        if on_path(name) {
            return Some(template.to_string());
        }
    }
    let pysat = Command::new("python3")
        .args(["-c", "import pysat.solvers"])
        .output()
        .is_ok_and(|o| o.status.success());
    let script = wrapper_script();
    (pysat && script.is_file()).then(|| format!("python3 {} {{file}}", script.display()))
}
