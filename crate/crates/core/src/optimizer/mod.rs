//! Removing authorization checks that known facts make redundant.
//!
//! For every checked step of a secured procedure, every resource checked
//! in it and every role, the optimizer asks the solver whether the facts
//! assumed about the calling context imply the role's constraint. When the
//! answer is `unsat` the step is wrapped in a runtime test of those facts:
//! the THEN branch reads without the proven checks and the ELSE branch is
//! the original step.

mod solver;

use std::collections::BTreeSet;
use std::fmt;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::model::DataModel;
use crate::msfol::{elimination_problem, MsfolError, SmtScript};
use crate::ocl::{parse_ocl, parse_ocl_syntax, OclError, OclExpr};
use crate::ocl2sql::unresolved_names;
use crate::policy::{PolicyError, Resource, SecurityModel};
use crate::secquery::{Guard, SecuredQuery, Step, TempTableDef};
use crate::sql::{parse_sql_expr, Expr, Query, SelectItem, SqlError, PARAMETERS};

pub use solver::{parse_answer, Solver, SolverRun, Verdict, DEFAULT_SOLVER, DEFAULT_TIMEOUT, SOLVER_ENV};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OptimizerError {
    #[error("malformed facts document: {0}")]
    Facts(String),
    #[error("fact `{description}`: {source}")]
    FactOcl { description: String, source: OclError },
    #[error("fact `{description}`: guard: {source}")]
    FactGuard { description: String, source: SqlError },
    #[error("fact `{description}` has no SQL guard")]
    MissingGuard { description: String },
    #[error("fact `{description}`: guard refers to `{name}`, which is neither a column nor caller/role")]
    GuardParameter { description: String, name: String },
    #[error("fact `{description}`: unknown resource {resource}")]
    FactResource { description: String, resource: String },
    #[error(transparent)]
    Msfol(#[from] MsfolError),
    #[error(transparent)]
    Policy(Box<PolicyError>),
    #[error("solver {solver} unavailable: {reason}")]
    SolverUnavailable { solver: String, reason: String },
    #[error("unexpected solver output: {0:?}")]
    SolverProtocolError(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("no check of {resource} in step {table}")]
    InconsistentChecks { table: String, resource: Resource },
}

impl From<PolicyError> for OptimizerError {
    fn from(e: PolicyError) -> OptimizerError {
        OptimizerError::Policy(Box::new(e))
    }
}

/// A property assumed to hold whenever the procedure runs, with the SQL
/// test that confirms it at runtime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextFact {
    pub description: String,
    /// OCL source; parsed against the keywords of each resource it serves.
    pub ocl: String,
    pub sql_guard: Expr,
    /// Resources the fact is meant for; `None` means wherever it parses.
    pub applies_to: Option<Vec<Resource>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FactDoc {
    description: String,
    ocl: String,
    #[serde(rename = "sqlGuard")]
    sql_guard: Option<String>,
    #[serde(rename = "appliesTo")]
    applies_to: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FactsDoc {
    facts: Vec<FactDoc>,
}

impl ContextFact {
    fn applies(&self, r: &Resource) -> bool {
        self.applies_to.as_ref().is_none_or(|rs| rs.contains(r))
    }

    /// The fact over the keywords of `resource`, if it serves it.
    fn for_resource(&self, policy: &SecurityModel, resource: &Resource) -> Result<Option<OclExpr>, OptimizerError> {
        if !self.applies(resource) {
            return Ok(None);
        }
        let kw = policy.keywords(resource)?;
        match parse_ocl(&self.ocl, &policy.data_model, &kw) {
            Ok(e) => Ok(Some(e)),
            Err(_) if self.applies_to.is_none() => Ok(None),
            Err(source) => Err(OptimizerError::FactOcl {
                description: self.description.clone(),
                source,
            }),
        }
    }

    fn is_vacuous(&self) -> bool {
        self.sql_guard == Expr::Bool(true)
    }
}

/// Loads `{"facts": [{description, ocl, sqlGuard, appliesTo?}]}`.
pub fn load_facts(text: &str, dm: &DataModel) -> Result<Vec<ContextFact>, OptimizerError> {
    let doc: FactsDoc = serde_json::from_str(text).map_err(|e| OptimizerError::Facts(e.to_string()))?;
    doc.facts
        .into_iter()
        .map(|f| {
            let description = f.description;
            parse_ocl_syntax(&f.ocl).map_err(|source| OptimizerError::FactOcl {
                description: description.clone(),
                source,
            })?;
            let Some(guard) = f.sql_guard.filter(|g| !g.trim().is_empty()) else {
                return Err(OptimizerError::MissingGuard { description });
            };
            let guard_err = |source| OptimizerError::FactGuard {
                description: description.clone(),
                source,
            };
            let sql_guard = parse_sql_expr(&guard).map_err(guard_err)?;
            let free = unresolved_names(&sql_guard, dm).map_err(guard_err)?;
            if let Some(name) = free.into_iter().find(|n| !PARAMETERS.contains(&n.as_str())) {
                return Err(OptimizerError::GuardParameter { description, name });
            }
            let applies_to = f
                .applies_to
                .map(|rs| {
                    rs.iter()
                        .map(|r| {
                            let res: Resource = r.parse().map_err(|_| OptimizerError::FactResource {
                                description: description.clone(),
                                resource: r.clone(),
                            })?;
                            res.validate(dm)?;
                            Ok(res)
                        })
                        .collect::<Result<Vec<_>, OptimizerError>>()
                })
                .transpose()?;
            Ok(ContextFact {
                description,
                ocl: f.ocl,
                sql_guard,
                applies_to,
            })
        })
        .collect()
}

/// One check whose necessity is in question: a resource checked in a step,
/// for one role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckSite {
    pub step: usize,
    pub table: String,
    pub resource: Resource,
    pub role: String,
}

impl fmt::Display for CheckSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.table, self.resource, self.role)
    }
}

/// An elimination problem together with the facts it assumes.
#[derive(Debug, Clone)]
pub struct EliminationProblem {
    pub site: CheckSite,
    /// Indices into the fact list.
    pub facts: Vec<usize>,
    pub script: SmtScript,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NotProvenReason {
    Sat,
    Unknown,
    Timeout,
    SolverError(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProofOutcome {
    Proven { elapsed: Duration },
    NotProven { reason: NotProvenReason, elapsed: Duration },
}

impl ProofOutcome {
    pub fn is_proven(&self) -> bool {
        matches!(self, ProofOutcome::Proven { .. })
    }

    pub fn elapsed(&self) -> Duration {
        match self {
            ProofOutcome::Proven { elapsed } | ProofOutcome::NotProven { elapsed, .. } => *elapsed,
        }
    }

    fn from_run(run: &SolverRun) -> ProofOutcome {
        let elapsed = run.elapsed;
        let reason = match run.verdict {
            Verdict::Unsat => return ProofOutcome::Proven { elapsed },
            Verdict::Sat => NotProvenReason::Sat,
            Verdict::Unknown => NotProvenReason::Unknown,
            Verdict::Timeout => NotProvenReason::Timeout,
        };
        ProofOutcome::NotProven { reason, elapsed }
    }
}

/// What happened to one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    /// Skipped whenever the role matches.
    Removed,
    /// Skipped when the role matches and the runtime guard holds.
    Guarded,
    Kept,
}

impl fmt::Display for Disposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Disposition::Removed => "REMOVED",
            Disposition::Guarded => "GUARDED",
            Disposition::Kept => "KEPT",
        })
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub problem: EliminationProblem,
    /// Descriptions of the facts assumed.
    pub facts: Vec<String>,
    pub outcome: ProofOutcome,
    pub disposition: Disposition,
}

impl CheckReport {
    /// Short solver verdict: `unsat`, `sat`, `unknown`, `timeout` or `error`.
    pub fn verdict(&self) -> &'static str {
        match &self.outcome {
            ProofOutcome::Proven { .. } => "unsat",
            ProofOutcome::NotProven { reason, .. } => match reason {
                NotProvenReason::Sat => "sat",
                NotProvenReason::Unknown => "unknown",
                NotProvenReason::Timeout => "timeout",
                NotProvenReason::SolverError(_) => "error",
            },
        }
    }
}

/// One line: check id, resource, facts, verdict, elapsed ms, action.
impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let site = &self.problem.site;
        write!(
            f,
            "{}/{}\t{}\t[{}]\t{}\t{} ms\t{}",
            site.table,
            site.role,
            site.resource,
            self.facts.join("; "),
            self.verdict(),
            self.outcome.elapsed().as_millis(),
            self.disposition
        )
    }
}

#[derive(Debug, Clone)]
pub struct Optimized {
    pub secured: SecuredQuery,
    pub reports: Vec<CheckReport>,
}

/// Resources checked in a step body, in order of appearance.
pub fn checked_resources(sq: &SecuredQuery, body: &Query) -> Vec<Resource> {
    let mut out = Vec::new();
    for_each_expr(body, &mut |e| {
        e.walk_shallow(&mut |x| {
            if let Expr::Checked(c) = x {
                if let Some(f) = sq.function(&c.func) {
                    if !out.contains(&f.resource) {
                        out.push(f.resource.clone());
                    }
                }
            }
        })
    });
    out
}

fn for_each_expr(q: &Query, f: &mut impl FnMut(&Expr)) {
    for it in &q.items {
        if let SelectItem::Expr { expr, .. } = it {
            f(expr);
        }
    }
    for j in &q.joins {
        f(&j.on);
    }
    if let Some(w) = &q.selection {
        f(w);
    }
}

fn map_exprs(q: Query, f: &impl Fn(Expr) -> Expr) -> Query {
    Query {
        items: q
            .items
            .into_iter()
            .map(|it| match it {
                SelectItem::Expr { expr, alias } => SelectItem::Expr { expr: f(expr), alias },
                w => w,
            })
            .collect(),
        joins: q
            .joins
            .into_iter()
            .map(|mut j| {
                j.on = f(j.on);
                j
            })
            .collect(),
        selection: q.selection.map(f),
        ..q
    }
}

/// Facts serving `resource`, as indices and parsed expressions.
fn facts_for(
    policy: &SecurityModel,
    resource: &Resource,
    facts: &[ContextFact],
) -> Result<(Vec<usize>, Vec<OclExpr>), OptimizerError> {
    let mut used = Vec::new();
    let mut assumed = Vec::new();
    for (k, fact) in facts.iter().enumerate() {
        if let Some(e) = fact.for_resource(policy, resource)? {
            used.push(k);
            assumed.push(e);
        }
    }
    Ok((used, assumed))
}

/// The elimination problem of one rule, outside any procedure.
pub fn elimination_problem_for(
    policy: &SecurityModel,
    resource: &Resource,
    role: &str,
    facts: &[ContextFact],
) -> Result<EliminationProblem, OptimizerError> {
    let kw = policy.keywords(resource)?;
    let (used, assumed) = facts_for(policy, resource, facts)?;
    let auth = policy.lookup_auth(role, resource)?;
    Ok(EliminationProblem {
        site: CheckSite {
            step: 0,
            table: String::new(),
            resource: resource.clone(),
            role: role.to_string(),
        },
        facts: used,
        script: elimination_problem(&policy.data_model, &kw, &assumed, &auth)?,
    })
}

/// Builds the elimination problem of every (step, resource, role) site.
pub fn elimination_problems(
    policy: &SecurityModel,
    sq: &SecuredQuery,
    facts: &[ContextFact],
) -> Result<Vec<EliminationProblem>, OptimizerError> {
    let dm = &policy.data_model;
    let mut out = Vec::new();
    for (i, step) in sq.procedure.steps.iter().enumerate() {
        let def = step.checked_body();
        for resource in checked_resources(sq, &def.body) {
            let kw = policy.keywords(&resource)?;
            let (used, assumed) = facts_for(policy, &resource, facts)?;
            for role in &policy.roles {
                let auth = policy.lookup_auth(role, &resource)?;
                out.push(EliminationProblem {
                    site: CheckSite {
                        step: i,
                        table: def.name.clone(),
                        resource: resource.clone(),
                        role: role.clone(),
                    },
                    facts: used.clone(),
                    script: elimination_problem(dm, &kw, &assumed, &auth)?,
                });
            }
        }
    }
    Ok(out)
}

/// Runs the solver on every problem, at most `jobs` at a time. A solver
/// that cannot be started aborts the run; any other failure only keeps the
/// check.
pub fn prove_all(
    problems: &[EliminationProblem],
    solver: &Solver,
    jobs: usize,
) -> Result<Vec<ProofOutcome>, OptimizerError> {
    let mut results: Vec<Result<SolverRun, OptimizerError>> = Vec::new();
    for chunk in problems.chunks(jobs.max(1)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|p| s.spawn(move || solver.run(&p.script.to_string())))
                .collect();
            results.extend(handles.into_iter().map(|h| h.join().expect("solver thread panicked")));
        });
    }
    results
        .into_iter()
        .map(|r| match r {
            Ok(run) => Ok(ProofOutcome::from_run(&run)),
            Err(e @ OptimizerError::SolverUnavailable { .. }) => Err(e),
            Err(e) => Ok(ProofOutcome::NotProven {
                reason: NotProvenReason::SolverError(e.to_string()),
                elapsed: Duration::ZERO,
            }),
        })
        .collect()
}

/// Rewrites the procedure so that proven checks are skipped under their
/// runtime guards. Steps without proven checks are left as generated.
pub fn gen_optimized_proc(
    sq: &SecuredQuery,
    facts: &[ContextFact],
    checks: &[(EliminationProblem, ProofOutcome)],
) -> Result<(SecuredQuery, Vec<Disposition>), OptimizerError> {
    for (p, _) in checks {
        let step = sq.procedure.steps.get(p.site.step);
        let present = step.is_some_and(|s| {
            s.table() == p.site.table && checked_resources(sq, &s.checked_body().body).contains(&p.site.resource)
        });
        if !present {
            return Err(OptimizerError::InconsistentChecks {
                table: p.site.table.clone(),
                resource: p.site.resource.clone(),
            });
        }
    }
    let mut out = sq.clone();
    let mut dispositions = vec![Disposition::Kept; checks.len()];
    for (i, step) in out.procedure.steps.iter_mut().enumerate() {
        let def = step.checked_body().clone();
        let mut roles: Vec<&str> = Vec::new();
        for (p, _) in checks.iter().filter(|(p, o)| p.site.step == i && o.is_proven()) {
            if !roles.contains(&p.site.role.as_str()) {
                roles.push(&p.site.role);
            }
        }
        let mut branches = Vec::new();
        for role in roles {
            let mut proven = BTreeSet::new();
            let mut guards: Vec<Expr> = Vec::new();
            for (k, (p, o)) in checks.iter().enumerate() {
                if p.site.step != i || p.site.role != role || !o.is_proven() {
                    continue;
                }
                proven.insert(p.site.resource.clone());
                let runtime: Vec<&ContextFact> =
                    p.facts.iter().map(|&f| &facts[f]).filter(|f| !f.is_vacuous()).collect();
                dispositions[k] = if runtime.is_empty() {
                    Disposition::Removed
                } else {
                    Disposition::Guarded
                };
                for f in runtime {
                    if !guards.contains(&f.sql_guard) {
                        guards.push(f.sql_guard.clone());
                    }
                }
            }
            let keep = |c: &crate::sql::Checked| sq.function(&c.func).is_none_or(|f| !proven.contains(&f.resource));
            let body = drop_self_aliases(map_exprs(def.body.clone(), &|e| e.strip_checks(&keep)));
            branches.push((
                Guard {
                    role: role.to_string(),
                    facts: guards,
                },
                TempTableDef {
                    name: def.name.clone(),
                    body,
                },
            ));
        }
        if !branches.is_empty() {
            *step = Step::Guarded {
                branches,
                otherwise: def,
            };
        }
    }
    Ok((out, dispositions))
}

/// `SELECT x AS x` becomes `SELECT x`.
fn drop_self_aliases(q: Query) -> Query {
    Query {
        items: q
            .items
            .into_iter()
            .map(|it| match it {
                SelectItem::Expr {
                    expr: Expr::Column { qualifier, name },
                    alias: Some(a),
                } if a == name => SelectItem::Expr {
                    expr: Expr::Column { qualifier, name },
                    alias: None,
                },
                it => it,
            })
            .collect(),
        ..q
    }
}

/// Builds, proves and applies every elimination problem of `sq`.
pub fn optimize(
    policy: &SecurityModel,
    sq: &SecuredQuery,
    facts: &[ContextFact],
    solver: &Solver,
    jobs: usize,
) -> Result<Optimized, OptimizerError> {
    let problems = elimination_problems(policy, sq, facts)?;
    let outcomes = prove_all(&problems, solver, jobs)?;
    let checks: Vec<_> = problems.into_iter().zip(outcomes).collect();
    let (secured, dispositions) = gen_optimized_proc(sq, facts, &checks)?;
    let reports = checks
        .into_iter()
        .zip(dispositions)
        .map(|((problem, outcome), disposition)| CheckReport {
            facts: problem.facts.iter().map(|&k| facts[k].description.clone()).collect(),
            problem,
            outcome,
            disposition,
        })
        .collect();
    Ok(Optimized { secured, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ocl2sql::Registry;
    use crate::secquery::secure_query_text;

    fn secured(policy: &SecurityModel, n: usize) -> SecuredQuery {
        let reg = Registry::from_json(fixtures::REGISTRY_JSON).unwrap();
        secure_query_text(policy, &reg, fixtures::query(n)).unwrap()
    }

    fn proven(problems: &[EliminationProblem], table: &str) -> Vec<(EliminationProblem, ProofOutcome)> {
        problems
            .iter()
            .map(|p| {
                let outcome = if p.site.table == table {
                    ProofOutcome::Proven { elapsed: Duration::ZERO }
                } else {
                    ProofOutcome::NotProven {
                        reason: NotProvenReason::Sat,
                        elapsed: Duration::ZERO,
                    }
                };
                (p.clone(), outcome)
            })
            .collect()
    }

    #[test]
    fn facts_load_and_validate() {
        let dm = fixtures::university();
        let f = load_facts(fixtures::OLDEST_LECTURER_FACTS, &dm).unwrap();
        assert_eq!(f.len(), 1);
        assert!(f[0].applies_to.is_none());
        let f = load_facts(fixtures::OWN_ENROLMENTS_FACTS, &dm).unwrap();
        assert_eq!(f[1].applies_to, Some(vec![Resource::attribute("Student", "age")]));
        assert!(f[1].is_vacuous());
        let missing = r#"{"facts":[{"description":"d","ocl":"true"}]}"#;
        assert!(matches!(load_facts(missing, &dm), Err(OptimizerError::MissingGuard { .. })));
        let free = r#"{"facts":[{"description":"d","ocl":"true","sqlGuard":"x = caller"}]}"#;
        assert!(matches!(load_facts(free, &dm), Err(OptimizerError::GuardParameter { .. })));
    }

    #[test]
    fn problems_per_site() {
        let p = fixtures::secvgu2();
        let sq = secured(&p, 6);
        let facts = load_facts(fixtures::OWN_ENROLMENTS_FACTS, &p.data_model).unwrap();
        let probs = elimination_problems(&p, &sq, &facts).unwrap();
        let sites: Vec<String> = probs.iter().map(|x| x.site.to_string()).collect();
        assert_eq!(sites, ["TEMP2 Enrolment Lecturer", "TEMP5 Student:age Lecturer"]);
        assert_eq!(probs[0].facts, [0]);
        assert_eq!(probs[1].facts, [1]);
    }

    #[test]
    fn unproven_checks_leave_the_procedure_unchanged() {
        let p = fixtures::secvgu2();
        let sq = secured(&p, 4);
        let facts = load_facts(fixtures::OLDEST_LECTURER_FACTS, &p.data_model).unwrap();
        let probs = elimination_problems(&p, &sq, &facts).unwrap();
        let (opt, disp) = gen_optimized_proc(&sq, &facts, &proven(&probs, "none")).unwrap();
        assert_eq!(opt, sq);
        assert!(disp.iter().all(|d| *d == Disposition::Kept));
    }

    #[test]
    fn proven_check_is_guarded() {
        let p = fixtures::secvgu1();
        let sq = secured(&p, 4);
        let facts = load_facts(fixtures::OLDEST_LECTURER_FACTS, &p.data_model).unwrap();
        let probs = elimination_problems(&p, &sq, &facts).unwrap();
        let (opt, disp) = gen_optimized_proc(&sq, &facts, &proven(&probs, "TEMP1")).unwrap();
        assert_eq!(disp, [Disposition::Guarded]);
        let Step::Guarded { branches, otherwise } = &opt.procedure.steps[0] else {
            panic!("step not guarded")
        };
        assert_eq!(otherwise, sq.procedure.steps[0].checked_body());
        assert_eq!(branches[0].1.body.to_string(), "SELECT * FROM Student WHERE age > 18");
        assert_eq!(branches[0].0.facts, [facts[0].sql_guard.clone()]);
    }

    #[test]
    fn inconsistent_sites_are_rejected() {
        let p = fixtures::secvgu1();
        let sq = secured(&p, 4);
        let mut probs = elimination_problems(&p, &sq, &[]).unwrap();
        probs[0].site.table = "TEMP9".into();
        assert!(matches!(
            gen_optimized_proc(&sq, &[], &proven(&probs, "TEMP9")),
            Err(OptimizerError::InconsistentChecks { .. })
        ));
    }
}
