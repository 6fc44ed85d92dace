//! `fgac`: batch front end for schema export, secured-procedure generation,
//! check elimination and execution in the in-memory harness.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fgac_core::harness::{exec_procedure, exec_query, Database, ExecResult};
use fgac_core::model::{DataModel, ObjectRef, Scenario};
use fgac_core::ocl::{eval_ocl, parse_ocl, Binding, KeywordRole, Keywords};
use fgac_core::ocl2sql::Registry;
use fgac_core::optimizer::{self, elimination_problem_for, load_facts, Solver, Verdict};
use fgac_core::policy::{Resource, SecurityModel};
use fgac_core::secquery::{secure_query_text, SecuredQuery};
use fgac_core::sql::parse_sql;

#[derive(Parser)]
#[command(name = "fgac", version, about = "Fine-grained access control for SQL queries")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the DDL of a data model.
    Schema {
        #[arg(long)]
        model: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate the secured procedure and authorization functions of a query.
    Compile {
        #[command(flatten)]
        secure: SecureArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Try to remove checks from a secured procedure using known facts.
    Optimize {
        #[command(flatten)]
        secure: SecureArgs,
        #[arg(long)]
        facts: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Solver processes run at once.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Directory for the elimination scripts and the optimized script.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Decide one elimination problem, given as a script or built from a
    /// policy rule and facts.
    Prove {
        /// An SMT-LIB script to run as is.
        #[arg(long, conflicts_with_all = ["model", "policy", "resource", "facts"])]
        script: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// `Class:attribute` or an association name.
        #[arg(long)]
        resource: Option<String>,
        #[arg(long)]
        role: Option<String>,
        #[arg(long)]
        facts: Option<PathBuf>,
        /// Write the generated script here.
        #[arg(long)]
        emit: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Execute a query, secured unless `--unsecured`, against a scenario.
    Run {
        #[command(flatten)]
        secure: SecureArgs,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        caller: String,
        #[arg(long)]
        role: String,
        /// Optimize with these facts before running.
        #[arg(long)]
        facts: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        unsecured: bool,
    },
    /// Evaluate an OCL expression on a scenario.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// The expression.
        ocl: String,
        /// Keyword bindings `name=Class:id`.
        #[arg(long = "bind", value_name = "NAME=CLASS:ID")]
        bindings: Vec<String>,
    },
}

#[derive(Args)]
struct SecureArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Hand-written SQL implementations of constraints.
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    /// Solver executable; falls back to FGAC_SOLVER, then `z3`.
    #[arg(long)]
    solver: Option<PathBuf>,
    /// Seconds per problem.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
}

impl SolverArgs {
    fn solver(&self) -> Result<Solver> {
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(Usage("timeout must be a positive number of seconds".into()).into());
        }
        let s = match &self.solver {
            Some(p) => Solver::new(p),
            None => Solver::from_env(),
        };
        Ok(s.with_timeout(Duration::from_secs_f64(self.timeout)))
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<Arc<DataModel>> {
    Ok(Arc::new(DataModel::from_json(&read(path)?)?))
}

fn load_policy(path: &Path, dm: Arc<DataModel>) -> Result<SecurityModel> {
    Ok(SecurityModel::from_json(&read(path)?, dm)?)
}

impl SecureArgs {
    fn load(&self) -> Result<(SecurityModel, SecuredQuery)> {
        let dm = load_model(&self.model)?;
        let policy = load_policy(&self.policy, dm)?;
        let registry = match &self.registry {
            Some(p) => Registry::from_json(&read(p)?)?,
            None => Registry::new(),
        };
        let sq = secure_query_text(&policy, &registry, &read(&self.query)?)?;
        Ok((policy, sq))
    }
}

fn optimized(
    policy: &SecurityModel,
    sq: &SecuredQuery,
    facts: &Path,
    solver: &Solver,
    jobs: usize,
) -> Result<optimizer::Optimized> {
    let facts = load_facts(&read(facts)?, &policy.data_model)?;
    Ok(optimizer::optimize(policy, sq, &facts, solver, jobs)?)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Sat => "sat",
        Verdict::Unsat => "unsat",
        Verdict::Unknown => "unknown",
        Verdict::Timeout => "timeout",
    }
}

fn parse_binding(s: &str) -> Result<(String, ObjectRef)> {
    let (name, obj) = s.split_once('=').ok_or_else(|| anyhow!("binding `{s}` is not NAME=CLASS:ID"))?;
    let (class, id) = obj.split_once(':').ok_or_else(|| anyhow!("binding `{s}` is not NAME=CLASS:ID"))?;
    Ok((name.to_string(), ObjectRef::new(id, class)))
}

fn run(cli: Cli) -> Result<()> {
    let log = |msg: &str| {
        if cli.verbose {
            eprintln!("fgac: {msg}");
        }
    };
    match &cli.command {
        Command::Schema { model, output } => {
            let dm = load_model(model)?;
            emit(output.as_deref(), &dm.sql_schema()?.to_string())
        }
        Command::Compile { secure, output } => {
            let (_, sq) = secure.load()?;
            log(&format!("generated {}", sq.procedure.name));
            emit(output.as_deref(), &sq.script())
        }
        Command::Optimize {
            secure,
            facts,
            solver,
            jobs,
            out_dir,
        } => {
            let (policy, sq) = secure.load()?;
            let o = optimized(&policy, &sq, facts, &solver.solver()?, *jobs)?;
            for r in &o.reports {
                println!("{r}");
            }
            match out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                    for r in &o.reports {
                        let site = &r.problem.site;
                        let name = format!("{}_{}_{}.smt2", site.table, site.resource, site.role).replace(':', "_");
                        write(&dir.join(name), &r.problem.script.to_string())?;
                    }
                    let path = dir.join(format!("{}.sql", o.secured.procedure.name));
                    log(&format!("writing {}", path.display()));
                    write(&path, &o.secured.script())
                }
                None => {
                    println!();
                    print!("{}", o.secured.script());
                    Ok(())
                }
            }
        }
        Command::Prove {
            script,
            model,
            policy,
            resource,
            role,
            facts,
            emit: emit_to,
            solver,
        } => {
            let text = match script {
                Some(p) => read(p)?,
                None => {
                    let (Some(model), Some(policy), Some(resource), Some(role)) = (model, policy, resource, role) else {
                        return Err(Usage("prove needs --script, or --model, --policy, --resource and --role".into()).into());
                    };
                    let dm = load_model(model)?;
                    let policy = load_policy(policy, dm)?;
                    let resource: Resource = resource.parse()?;
                    let facts = match facts {
                        Some(f) => load_facts(&read(f)?, &policy.data_model)?,
                        None => Vec::new(),
                    };
                    elimination_problem_for(&policy, &resource, role, &facts)?.script.to_string()
                }
            };
            if let Some(p) = emit_to {
                write(p, &text)?;
            }
            let r = solver.solver()?.run(&text)?;
            log(&format!("solved in {} ms", r.elapsed.as_millis()));
            println!("{}", verdict_name(r.verdict));
            Ok(())
        }
        Command::Run {
            secure,
            scenario,
            caller,
            role,
            facts,
            solver,
            unsecured,
        } => {
            let (policy, mut sq) = secure.load()?;
            let sc = Scenario::from_json(&read(scenario)?, &policy.data_model)?;
            let db = Database::from_scenario(policy.data_model.clone(), &sc)?;
            let result = if *unsecured {
                exec_query(&db, &parse_sql(&read(&secure.query)?)?, caller, role)
            } else {
                if let Some(f) = facts {
                    sq = optimized(&policy, &sq, f, &solver.solver()?, 1)?.secured;
                }
                let (r, stats) = exec_procedure(&db, &sq, caller, role);
                log(&format!("{} authorization calls", stats.total_calls()));
                r
            };
            match result {
                ExecResult::Rows(rel) => {
                    print!("{rel}");
                    Ok(())
                }
                ExecResult::SecurityError(f) => bail!("security error: access denied by {f}"),
                ExecResult::SqlError(e) => bail!("SQL error: {e}"),
            }
        }
        Command::Eval {
            model,
            scenario,
            ocl,
            bindings,
        } => {
            let dm = load_model(model)?;
            let sc = Scenario::from_json(&read(scenario)?, &dm)?;
            let mut kw = Keywords::new();
            let mut binding = Binding::new();
            for b in bindings {
                let (name, obj) = parse_binding(b)?;
                let role = match name.as_str() {
                    "caller" => KeywordRole::Caller,
                    "self" => KeywordRole::SelfObject,
                    _ => KeywordRole::AssociationEnd,
                };
                kw.insert(&name, &obj.class, role);
                binding.insert(name, obj);
            }
            let e = parse_ocl(ocl, &dm, &kw)?;
            println!("{}", eval_ocl(&dm, &sc, &e, &binding)?);
            Ok(())
        }
    }
}

/// A usage error detected after argument parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
