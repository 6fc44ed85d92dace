//! External SMT solver invoked as a subprocess on a script file.

use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::OptimizerError;

/// Environment variable naming the solver executable.
pub const SOLVER_ENV: &str = "FGAC_SOLVER";
pub const DEFAULT_SOLVER: &str = "z3";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Sat,
    Unsat,
    Unknown,
    Timeout,
}

/// What the solver said about one script, and how long it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverRun {
    pub verdict: Verdict,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct Solver {
    pub command: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl Default for Solver {
    fn default() -> Solver {
        Solver::new(DEFAULT_SOLVER)
    }
}

impl Solver {
    pub fn new(command: impl Into<PathBuf>) -> Solver {
        Solver {
            command: command.into(),
            args: Vec::new(),
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// The solver named by `FGAC_SOLVER`, else `z3` from the search path.
    pub fn from_env() -> Solver {
        match std::env::var_os(SOLVER_ENV) {
            Some(s) if !s.is_empty() => Solver::new(s),
            _ => Solver::default(),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Solver {
        self.timeout = timeout;
        self
    }

    /// Writes `script` to a temporary file and runs the solver on it.
    pub fn run(&self, script: &str) -> Result<SolverRun, OptimizerError> {
        let file = tempfile::Builder::new()
            .prefix("fgac-")
            .suffix(".smt2")
            .tempfile()
            .and_then(|mut f| {
                std::io::Write::write_all(&mut f, script.as_bytes())?;
                Ok(f)
            })
            .map_err(|e| OptimizerError::Io(e.to_string()))?;
        let unavailable = |reason: String| OptimizerError::SolverUnavailable {
            solver: self.command.display().to_string(),
            reason,
        };
        let start = Instant::now();
        let mut child = Command::new(&self.command)
            .args(&self.args)
            .arg(file.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| unavailable(e.to_string()))?;
        loop {
            if child.try_wait().map_err(|e| unavailable(e.to_string()))?.is_some() {
                break;
            }
            if start.elapsed() >= self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(SolverRun {
                    verdict: Verdict::Timeout,
                    elapsed: start.elapsed(),
                });
            }
            std::thread::sleep(Duration::from_millis(2));
        }
        let elapsed = start.elapsed();
        let mut out = String::new();
        if let Some(mut s) = child.stdout.take() {
            s.read_to_string(&mut out).map_err(|e| OptimizerError::Io(e.to_string()))?;
        }
        let verdict = parse_answer(&out)?;
        Ok(SolverRun { verdict, elapsed })
    }
}

/// The first non-empty output line must be the `check-sat` answer.
pub fn parse_answer(out: &str) -> Result<Verdict, OptimizerError> {
    match out.lines().map(str::trim).find(|l| !l.is_empty()) {
        Some("sat") => Ok(Verdict::Sat),
        Some("unsat") => Ok(Verdict::Unsat),
        Some("unknown") => Ok(Verdict::Unknown),
        _ => Err(OptimizerError::SolverProtocolError(out.to_string())),
    }
}
