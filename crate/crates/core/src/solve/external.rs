//! Running an outside MILP solver through an MPS file.
//!
//! The command template is run with `sh -c` after substitution of
//! `{mps}` (model file), `{sol}` (solution file to produce),
//! `{time_limit}`, `{threads}` and `{seed}`.
//!
//! Solution file contract, one entry per line:
//!
//! ```text
//! # comment
//! =status= optimal        (optional: optimal | feasible-gap | infeasible | timeout)
//! =obj= 3                 (optional)
//! =gap= 0                 (optional, relative)
//! u[0,0,1] 1
//! P[0,1,1] 1
//! ```
//!
//! Columns absent from the file are zero.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::mps::{write_mps, MpsNames, DEFAULT_NAME_LEN};
use super::{validate_solution, Solution, SolveLimits, SolveStatus};
use crate::error::{Error, Result};
use crate::model::MilpModel;

/// Extra wall-clock time granted to the outside solver beyond the limit.
const GRACE: Duration = Duration::from_secs(30);
const INTEGRALITY_TOL: f64 = 1e-6;

/// A parsed solution file.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedSolution {
    pub values: Vec<f64>,
    pub status: Option<SolveStatus>,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
}

/// Parses a solution file against the column names of an export.
pub fn parse_solution_file(text: &str, names: &MpsNames) -> Result<ParsedSolution> {
    let mut parsed = ParsedSolution {
        values: vec![0.0; names.columns.len()],
        status: None,
        objective: None,
        gap: None,
    };
    let bad = |line: usize, msg: String| Error::ExternalOutput(format!("line {line}: {msg}"));
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let [key, value] = toks[..] else {
            return Err(bad(line, format!("expected `name value`, got {raw:?}")));
        };
        if key == "=status=" {
            let status = match value {
                "optimal" => SolveStatus::Optimal,
                "feasible-gap" => SolveStatus::FeasibleGap,
                "infeasible" => SolveStatus::Infeasible,
                "timeout" => SolveStatus::Timeout,
                other => return Err(bad(line, format!("unknown status {other:?}"))),
            };
            parsed.status = Some(status);
            continue;
        }
        let x: f64 = value
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| bad(line, format!("bad value {value:?}")))?;
        match key {
            "=obj=" => parsed.objective = Some(x),
            "=gap=" => parsed.gap = Some(x),
            name => {
                let col = names
                    .column(name)
                    .ok_or_else(|| bad(line, format!("unknown column {name:?}")))?;
                parsed.values[col] = x;
            }
        }
    }
    Ok(parsed)
}

/// Builds a plan from a full assignment, rounding binaries.
///
/// # Errors
///
/// [`Error::ExternalOutput`] when a binary is not within 1e-6 of 0 or 1.
pub fn solution_from_assignment(model: &MilpModel, values: &[f64], gap: f64) -> Result<Solution> {
    let mut x = values.to_vec();
    for (var, v) in model.variables().iter().zip(x.iter_mut()) {
        if var.domain.is_integer() {
            let rounded = v.round();
            if (*v - rounded).abs() > INTEGRALITY_TOL {
                return Err(Error::ExternalOutput(format!("{} = {v} is not integral", var.name)));
            }
            *v = rounded;
        }
    }
    let mut sol = Solution::from_values(model, &x);
    if gap > 0.0 {
        sol.status = SolveStatus::FeasibleGap;
        sol.gap = gap;
        sol.lower_bound = sol.objective * (1.0 - gap);
    }
    Ok(sol)
}

fn quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

/// Solves `model` with an outside solver.
///
/// # Errors
///
/// [`Error::Parameter`] for a template without both placeholders,
/// [`Error::ExternalExit`] for a failing command, [`Error::ExternalOutput`]
/// for an unreadable solution file and [`Error::Validation`] when the
/// returned plan breaks a planning rule.
pub fn run_external(model: &MilpModel, command_template: &str, limits: &SolveLimits) -> Result<Solution> {
    limits.validate()?;
    if !command_template.contains("{mps}") || !command_template.contains("{sol}") {
        return Err(Error::Parameter(
            "solver command must contain {mps} and {sol}".into(),
        ));
    }
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let mps_path = dir.path().join("model.mps");
    let sol_path = dir.path().join("model.sol");
    let mut buf = Vec::new();
    let names = write_mps(model, &mut buf, DEFAULT_NAME_LEN)?;
    std::fs::write(&mps_path, buf).map_err(|e| Error::io(&mps_path, e))?;

    let command = command_template
        .replace("{mps}", &quote(&mps_path))
        .replace("{sol}", &quote(&sol_path))
        .replace("{time_limit}", &limits.time_limit_s.to_string())
        .replace("{threads}", &limits.threads.to_string())
        .replace("{seed}", &limits.seed.to_string());
    log::info!("running external solver: {command}");
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::io("sh", e))?;
    let mut stderr_pipe = child.stderr.take().expect("stderr is piped");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr_pipe.read_to_string(&mut s);
        s
    });
    let deadline = Instant::now() + Duration::from_secs_f64(limits.time_limit_s) + GRACE;
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| Error::io("sh", e))? {
            break Some(status);
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    let stderr = reader.join().unwrap_or_default();
    let Some(status) = status else {
        log::warn!("external solver killed after the time limit");
        return Ok(Solution::empty(model.params().redundancy, SolveStatus::Timeout));
    };
    if !status.success() {
        return Err(Error::ExternalExit {
            status: status.code().unwrap_or(-1),
            stderr,
        });
    }
    let text = std::fs::read_to_string(&sol_path)
        .map_err(|e| Error::ExternalOutput(format!("no solution file: {e}")))?;
    let parsed = parse_solution_file(&text, &names)?;
    match parsed.status {
        Some(s @ (SolveStatus::Infeasible | SolveStatus::Timeout)) => {
            return Ok(Solution::empty(model.params().redundancy, s));
        }
        _ => {}
    }
    let gap = parsed.gap.unwrap_or(0.0).max(0.0);
    let mut sol = solution_from_assignment(model, &parsed.values, gap)?;
    if parsed.status == Some(SolveStatus::FeasibleGap) && sol.status == SolveStatus::Optimal {
        sol.status = SolveStatus::FeasibleGap;
    }
    if let Some(obj) = parsed.objective {
        if (obj - sol.objective).abs() > 1e-6 * (1.0 + obj.abs()) {
            log::warn!("solver reports objective {obj}, assignment gives {}", sol.objective);
        }
    }
    let report = validate_solution(model.graph(), model.params(), &sol);
    if !report.passed() {
        return Err(Error::Validation(report.to_string()));
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelParams};
    use crate::scenario::{Gnb, Position, ScenarioGraph};

    fn lone_model() -> MilpModel {
        let mut g = Gnb::new(7, Position::new(0.0, 0.0, 10.0));
        g.demand_mbps = Some(50.0);
        let graph = ScenarioGraph::new(1000.0, 1.0, vec![g], vec![]).unwrap();
        build_model(&graph, &ModelParams::new(2, 4, 1)).unwrap()
    }

    #[test]
    fn stub_adapter_with_known_assignment() {
        let m = lone_model();
        let sol = run_external(&m, "printf '=obj= 1\\nu[7,0,1] 1\\n' > {sol} && test -s {mps}", &SolveLimits::default())
            .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.donor_set(), vec![7]);
    }

    #[test]
    fn infeasible_assignment_fails_validation() {
        let m = lone_model();
        let err = run_external(&m, "echo '# nothing' > {sol}; cat {mps} >/dev/null", &SolveLimits::default())
            .unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn errors_are_distinct() {
        let m = lone_model();
        let limits = SolveLimits::default();
        assert!(matches!(run_external(&m, "true", &limits), Err(Error::Parameter(_))));
        assert!(matches!(
            run_external(&m, "echo boom >&2; exit 3 # {mps} {sol}", &limits),
            Err(Error::ExternalExit { status: 3, .. })
        ));
        assert!(matches!(
            run_external(&m, "echo 'u[7,0,1] maybe' > {sol} # {mps}", &limits),
            Err(Error::ExternalOutput(_))
        ));
        assert!(matches!(
            run_external(&m, "echo 'u[7,0,1] 0.5' > {sol} # {mps}", &limits),
            Err(Error::ExternalOutput(_))
        ));
    }

    #[test]
    fn reported_infeasibility_passes_through() {
        let m = lone_model();
        let sol = run_external(&m, "echo '=status= infeasible' > {sol} # {mps}", &SolveLimits::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }
}
