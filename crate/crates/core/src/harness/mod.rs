//! In-memory execution of queries and secured procedures.
//!
//! The engine covers the `SELECT` subset of the frontend with MySQL-style
//! semantics where they matter here: three-valued logic, integers as truth
//! values, procedure and function parameters shadowing column names, and
//! scalar subqueries that fail on more than one row. Temporary tables live
//! for one procedure run.

mod eval;
mod reference;
mod script;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{id_column, DataModel, ModelError, ObjectRecord, Scenario, TableKind, Value};
use crate::secquery::{SecuredQuery, Step};
use crate::sql::{Expr, Lineage, Query, SqlError};

pub use reference::auth_query_ref;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    /// An authorization check failed.
    #[error("access denied by {0}")]
    Security(String),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("{0}")]
    Runtime(String),
    #[error("script statement {statement}: {message}")]
    Script { statement: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("policy evaluation failed: {0}")]
    Policy(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SqlValue {
    Null,
    Int(i64),
    Str(String),
    Bool(bool),
}

impl SqlValue {
    /// MySQL truth value; `None` for NULL.
    pub fn truth(&self) -> Option<bool> {
        match self {
            SqlValue::Null => None,
            SqlValue::Bool(b) => Some(*b),
            SqlValue::Int(i) => Some(*i != 0),
            SqlValue::Str(s) => Some(leading_int(s) != 0),
        }
    }

    fn number(&self) -> Option<i64> {
        match self {
            SqlValue::Null => None,
            SqlValue::Bool(b) => Some(*b as i64),
            SqlValue::Int(i) => Some(*i),
            SqlValue::Str(s) => Some(leading_int(s)),
        }
    }

    /// Comparison with MySQL coercions; `None` when either side is NULL.
    pub fn compare(&self, other: &SqlValue) -> Option<std::cmp::Ordering> {
        match (self, other) {
            (SqlValue::Null, _) | (_, SqlValue::Null) => None,
            (SqlValue::Str(a), SqlValue::Str(b)) => Some(a.cmp(b)),
            _ => Some(self.number()?.cmp(&other.number()?)),
        }
    }

    pub fn from_value(v: &Value) -> SqlValue {
        match v {
            Value::Null => SqlValue::Null,
            Value::Int(i) => SqlValue::Int(*i),
            Value::Str(s) => SqlValue::Str(s.clone()),
        }
    }
}

fn leading_int(s: &str) -> i64 {
    let t = s.trim_start();
    let end = t
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || (i == 0 && (c == '-' || c == '+'))))
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    t[..end].parse().unwrap_or(0)
}

impl fmt::Display for SqlValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SqlValue::Null => f.write_str("NULL"),
            SqlValue::Int(i) => write!(f, "{i}"),
            SqlValue::Str(s) => f.write_str(s),
            SqlValue::Bool(b) => write!(f, "{}", *b as i64),
        }
    }
}

/// Rows with named columns. Lineage records which class attribute or
/// association end a column carries, for the reference checker.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Relation {
    pub columns: Vec<(String, Lineage)>,
    pub rows: Vec<Vec<SqlValue>>,
}

impl Relation {
    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Rows in a canonical order, for comparisons that ignore order.
    pub fn sorted_rows(&self) -> Vec<Vec<SqlValue>> {
        let mut r = self.rows.clone();
        r.sort();
        r
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.column_names().join("\t"))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", cells.join("\t"))?;
        }
        Ok(())
    }
}

/// Base tables of a relational image.
#[derive(Debug, Clone)]
pub struct Database {
    pub data_model: Arc<DataModel>,
    tables: BTreeMap<String, Relation>,
}

impl Database {
    /// Runs a script of `CREATE TABLE` and `INSERT INTO ... VALUES`
    /// statements, as produced by the schema and scenario exporters.
    pub fn from_script(dm: Arc<DataModel>, text: &str) -> Result<Database, HarnessError> {
        let mut db = Database {
            data_model: dm,
            tables: BTreeMap::new(),
        };
        script::run(&mut db, text)?;
        Ok(db)
    }

    pub fn from_scenario(dm: Arc<DataModel>, sc: &Scenario) -> Result<Database, HarnessError> {
        let text = format!("{}{}", dm.sql_schema()?, sc.to_inserts(&dm)?);
        Database::from_script(dm, &text)
    }

    pub fn table(&self, name: &str) -> Option<&Relation> {
        self.tables.get(name)
    }

    /// Reads the tables back as a scenario.
    pub fn to_scenario(&self) -> Result<Scenario, HarnessError> {
        let dm = &self.data_model;
        let mut sc = Scenario::default();
        for (name, rel) in &self.tables {
            let col = |c: &str| rel.columns.iter().position(|(n, _)| n == c);
            match dm.table_kind(name) {
                Some(TableKind::Class(c)) => {
                    let idc = col(&id_column(&c.name)).ok_or_else(|| HarnessError::Runtime(format!("{name} has no id")))?;
                    for row in &rel.rows {
                        let SqlValue::Str(id) = &row[idc] else {
                            return Err(HarnessError::Runtime(format!("non-string id in {name}")));
                        };
                        let mut rec = ObjectRecord::new();
                        for a in &c.attributes {
                            let v = match col(&a.name).map(|i| &row[i]) {
                                None | Some(SqlValue::Null) => continue,
                                Some(SqlValue::Str(s)) => Value::Str(s.clone()),
                                Some(v) => Value::Int(v.number().unwrap_or_default()),
                            };
                            rec.insert(a.name.clone(), v);
                        }
                        sc.objects.entry(c.name.clone()).or_default().insert(id.clone(), rec);
                    }
                }
                Some(TableKind::Association(a)) => {
                    let (i, j) = match (col(&a.end1.name), col(&a.end2.name)) {
                        (Some(i), Some(j)) => (i, j),
                        _ => return Err(HarnessError::Runtime(format!("{name} lacks end columns"))),
                    };
                    for row in &rel.rows {
                        sc.add_link(&a.name, &row[i].to_string(), &row[j].to_string());
                    }
                }
                None => {}
            }
        }
        Ok(sc.normalized())
    }
}

/// Outcome of running a query or procedure, as a client would see it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecResult {
    Rows(Relation),
    SecurityError(String),
    SqlError(String),
}

impl ExecResult {
    fn from_result(r: Result<Relation, HarnessError>) -> ExecResult {
        match r {
            Ok(rel) => ExecResult::Rows(rel),
            Err(HarnessError::Security(f)) => ExecResult::SecurityError(f),
            Err(e) => ExecResult::SqlError(e.to_string()),
        }
    }

    pub fn rows(&self) -> Option<&Relation> {
        match self {
            ExecResult::Rows(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecStats {
    /// Calls per authorization function.
    pub auth_calls: BTreeMap<String, usize>,
    /// Authorization calls made while creating each step's table.
    pub step_calls: Vec<usize>,
    /// For guarded steps, the branch taken (`None` for ELSE).
    pub branches: Vec<(String, Option<usize>)>,
}

impl ExecStats {
    pub fn total_calls(&self) -> usize {
        self.auth_calls.values().sum()
    }
}

fn params(caller: &str, role: &str) -> BTreeMap<String, SqlValue> {
    BTreeMap::from([
        ("caller".to_string(), SqlValue::Str(caller.to_string())),
        ("role".to_string(), SqlValue::Str(role.to_string())),
    ])
}

/// Runs the unsecured query with `caller` and `role` bound.
pub fn exec_query(db: &Database, q: &Query, caller: &str, role: &str) -> ExecResult {
    let temps = BTreeMap::new();
    let ev = eval::Evaluator::new(db, &temps, params(caller, role), &[]);
    ExecResult::from_result(ev.query(q, &[], true))
}

/// Runs a secured procedure; returns its result and call statistics.
pub fn exec_procedure(db: &Database, sq: &SecuredQuery, caller: &str, role: &str) -> (ExecResult, ExecStats) {
    let mut stats = ExecStats::default();
    let r = run_procedure(db, sq, caller, role, &mut stats);
    (ExecResult::from_result(r), stats)
}

fn run_procedure(
    db: &Database,
    sq: &SecuredQuery,
    caller: &str,
    role: &str,
    stats: &mut ExecStats,
) -> Result<Relation, HarnessError> {
    let mut temps: BTreeMap<String, Relation> = BTreeMap::new();
    for step in &sq.procedure.steps {
        let ev = eval::Evaluator::new(db, &temps, params(caller, role), &sq.functions);
        let def = match step {
            Step::Create(def) => def,
            Step::Guarded { branches, otherwise } => {
                let mut chosen = None;
                for (i, (g, _)) in branches.iter().enumerate() {
                    if ev.expr(&g.to_expr(), &[])?.truth() == Some(true) {
                        chosen = Some(i);
                        break;
                    }
                }
                stats.branches.push((step.table().to_string(), chosen));
                chosen.map(|i| &branches[i].1).unwrap_or(otherwise)
            }
        };
        let before = ev.calls();
        let rel = ev.query(&def.body, &[], false);
        let after = ev.calls();
        let made: usize = after.values().sum::<usize>() - before.values().sum::<usize>();
        for (f, n) in after {
            *stats.auth_calls.entry(f).or_default() += n;
        }
        stats.step_calls.push(made);
        let rel = rel?;
        let mut names = rel.column_names();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(HarnessError::Runtime(format!("Duplicate column name '{}'", w[0])));
        }
        temps.insert(def.name.clone(), rel);
    }
    let ev = eval::Evaluator::new(db, &temps, params(caller, role), &sq.functions);
    ev.query(&sq.procedure.result, &[], false)
}

/// Evaluates a constraint implementation with its parameters bound.
pub fn eval_sql_constraint(
    db: &Database,
    body: &Expr,
    bindings: &BTreeMap<String, SqlValue>,
) -> Result<SqlValue, HarnessError> {
    let temps = BTreeMap::new();
    let ev = eval::Evaluator::new(db, &temps, bindings.clone(), &[]);
    ev.expr(body, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::sql::parse_sql;

    fn vgu() -> Database {
        let dm = Arc::new(fixtures::university());
        let sc = Scenario::from_json(fixtures::VGU_SCENARIO_JSON, &dm).unwrap();
        Database::from_scenario(dm, &sc).unwrap()
    }

    fn run(db: &Database, sql: &str) -> ExecResult {
        exec_query(db, &parse_sql(sql).unwrap(), "Huong", "Lecturer")
    }

    #[test]
    fn scenario_round_trip() {
        let db = vgu();
        let sc = Scenario::from_json(fixtures::VGU_SCENARIO_JSON, &db.data_model).unwrap();
        assert_eq!(db.to_scenario().unwrap(), sc.normalized());
    }

    #[test]
    fn basic_queries() {
        let db = vgu();
        let rows = |r: ExecResult| r.rows().unwrap().sorted_rows();
        assert_eq!(rows(run(&db, fixtures::query(4))), [[SqlValue::Int(2)]]);
        assert_eq!(rows(run(&db, fixtures::query(5))), [[SqlValue::Int(5)]]);
        assert_eq!(
            rows(run(&db, fixtures::query(6))),
            [[SqlValue::Int(17)], [SqlValue::Int(20)]]
        );
        assert_eq!(
            rows(run(&db, "SELECT MAX(age), MIN(age) FROM Lecturer")),
            [[SqlValue::Int(52), SqlValue::Int(35)]]
        );
        assert_eq!(rows(run(&db, "SELECT email FROM Student WHERE email IS NULL")), [[SqlValue::Null]]);
    }

    #[test]
    fn parameters_shadow_columns() {
        let db = vgu();
        let b = BTreeMap::from([
            ("caller".to_string(), SqlValue::Str("Manuel".into())),
            ("students".to_string(), SqlValue::Str("Binh".into())),
        ]);
        let e = crate::sql::parse_sql_expr(
            "EXISTS (SELECT 1 FROM Enrolment e WHERE e.lecturers = caller AND e.students = students)",
        )
        .unwrap();
        assert_eq!(eval_sql_constraint(&db, &e, &b).unwrap().truth(), Some(true));
    }

    #[test]
    fn scalar_subquery_cardinality() {
        let db = vgu();
        assert!(matches!(
            run(&db, "SELECT age FROM Student WHERE age = (SELECT age FROM Lecturer)"),
            ExecResult::SqlError(_)
        ));
        let r = run(&db, "SELECT age FROM Student WHERE (SELECT age FROM Lecturer WHERE Lecturer_id = 'x') IS NULL");
        assert_eq!(r.rows().unwrap().rows.len(), 3);
    }

    #[test]
    fn leading_integers() {
        assert_eq!(leading_int("12abc"), 12);
        assert_eq!(leading_int("abc"), 0);
        assert_eq!(leading_int(" -3"), -3);
    }
}
