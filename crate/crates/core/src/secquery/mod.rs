//! Secured stored procedures.
//!
//! A read query is turned into a MySQL procedure taking `caller` and
//! `role`. Each protected value is read through
//! `CASE AuthFunc(...) WHEN ... THEN value ELSE throw_error() END`, so the
//! procedure either returns exactly the rows of the original query or
//! fails. One authorization function per protected resource returns the
//! SQL implementation of the rule for the caller's role.

mod stage;

use std::fmt::{self, Write};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::VARCHAR_WIDTH;
use crate::ocl2sql::{map_ocl_to_sql, Ocl2SqlError, Registry, SqlConstraintImpl};
use crate::policy::{PolicyError, Resource, SecurityModel};
use crate::sql::{parse_sql, render_sql, BinOp, Expr, Query, SqlError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SecQueryError {
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mapping(#[from] Ocl2SqlError),
}

/// `CREATE TEMPORARY TABLE name AS (body);`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TempTableDef {
    pub name: String,
    pub body: Query,
}

impl fmt::Display for TempTableDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CREATE TEMPORARY TABLE {} AS (\n    {}\n  );", self.name, self.body)
    }
}

/// Runtime condition under which a step may skip some checks: the role
/// matches and every listed fact holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub role: String,
    pub facts: Vec<Expr>,
}

impl Guard {
    pub fn to_expr(&self) -> Expr {
        let mut e = Expr::eq(Expr::col("role"), Expr::str(&self.role));
        for g in &self.facts {
            e = Expr::and(e, g.clone());
        }
        e
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(role = {}", Expr::str(&self.role))?;
        for g in &self.facts {
            write!(f, " AND ({g})")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Create(TempTableDef),
    Guarded {
        branches: Vec<(Guard, TempTableDef)>,
        otherwise: TempTableDef,
    },
}

impl Step {
    /// The table the step creates, whichever branch runs.
    pub fn table(&self) -> &str {
        match self {
            Step::Create(t) => &t.name,
            Step::Guarded { otherwise, .. } => &otherwise.name,
        }
    }

    /// The unconditional form of the step.
    pub fn checked_body(&self) -> &TempTableDef {
        match self {
            Step::Create(t) => t,
            Step::Guarded { otherwise, .. } => otherwise,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Create(t) => write!(f, "{t}"),
            Step::Guarded { branches, otherwise } => {
                for (i, (g, t)) in branches.iter().enumerate() {
                    let kw = if i == 0 { "IF" } else { "ELSEIF" };
                    write!(f, "{kw} {g}\n  THEN\n  {t}\n  ")?;
                }
                write!(f, "ELSE\n  {otherwise}\n  END IF;")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredProcedure {
    pub name: String,
    pub steps: Vec<Step>,
    /// Final SELECT over the last temporary table.
    pub result: Query,
}

impl fmt::Display for StoredProcedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = VARCHAR_WIDTH;
        writeln!(f, "CREATE PROCEDURE {}", self.name)?;
        writeln!(f, "  (in caller varchar({w}), in role varchar({w}))")?;
        f.write_str(
            "BEGIN\n  DECLARE _rollback int DEFAULT 0;\n  DECLARE EXIT HANDLER FOR SQLEXCEPTION\n  BEGIN\n    \
             SET _rollback = 1;\n    GET STACKED DIAGNOSTICS CONDITION 1\n      \
             @p1 = RETURNED_SQLSTATE, @p2 = MESSAGE_TEXT;\n    SELECT @p1, @p2;\n    ROLLBACK;\n  END;\n  \
             START TRANSACTION;\n",
        )?;
        for s in &self.steps {
            write!(f, "\n  {s}\n")?;
        }
        writeln!(
            f,
            "\n  IF _rollback = 0\n    THEN SELECT {} from {};\n  END IF;",
            self.result.render_items(),
            self.result.render_from()
        )?;
        f.write_str("END")
    }
}

/// Authorization function of one resource: the rule body for each role
/// that has a rule, `FALSE` for the others.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthFunction {
    pub name: String,
    pub resource: Resource,
    /// `caller`, `role`, then the resource's target keywords.
    pub params: Vec<String>,
    pub cases: Vec<(String, SqlConstraintImpl)>,
}

impl AuthFunction {
    pub fn build(policy: &SecurityModel, registry: &Registry, resource: &Resource) -> Result<AuthFunction, SecQueryError> {
        resource.validate(&policy.data_model)?;
        let kw = policy.keywords(resource)?;
        let mut params = vec!["caller".to_string(), "role".to_string()];
        params.extend(kw.names().into_iter().filter(|n| *n != "caller").map(str::to_string));
        let mut cases = Vec::new();
        for role in &policy.roles {
            if let Some(rule) = policy.rule(role, resource) {
                let imp = map_ocl_to_sql(&policy.data_model, &kw, &rule.constraint, registry)?;
                cases.push((role.clone(), imp));
            }
        }
        Ok(AuthFunction {
            name: auth_function_name(&policy.name, resource),
            resource: resource.clone(),
            params,
            cases,
        })
    }

    /// The function body as one expression over its parameters.
    pub fn body(&self) -> Expr {
        Expr::Case {
            operand: Some(Box::new(Expr::col("role"))),
            branches: self
                .cases
                .iter()
                .map(|(r, imp)| (Expr::str(r), imp.body.clone()))
                .collect(),
            otherwise: Some(Box::new(Expr::Bool(false))),
        }
    }
}

impl fmt::Display for AuthFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = VARCHAR_WIDTH;
        let params: Vec<String> = self.params.iter().map(|p| format!("{p} varchar({w})")).collect();
        writeln!(f, "CREATE FUNCTION {}({})", self.name, params.join(", "))?;
        writeln!(f, "RETURNS INT DETERMINISTIC")?;
        writeln!(f, "BEGIN")?;
        writeln!(f, "  RETURN CASE role")?;
        for (role, imp) in &self.cases {
            writeln!(f, "    WHEN {} THEN ({})", Expr::str(role), imp.text)?;
        }
        writeln!(f, "    ELSE FALSE")?;
        writeln!(f, "  END;")?;
        f.write_str("END")
    }
}

pub fn auth_function_name(policy: &str, r: &Resource) -> String {
    match r {
        Resource::Attribute { class, attribute } => format!("AuthFunc_{policy}_{class}_{attribute}"),
        Resource::Association { association } => format!("AuthFunc_{policy}_{association}"),
    }
}

pub fn procedure_name(policy: &str, q: &Query) -> String {
    let digest = Sha256::digest(render_sql(q).as_bytes());
    let mut hex = String::new();
    for b in &digest[..4] {
        write!(hex, "{b:02x}").expect("string write");
    }
    format!("SecQuery_{policy}_{hex}")
}

/// A secured procedure and the authorization functions it calls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecuredQuery {
    pub policy: String,
    pub query: Query,
    pub procedure: StoredProcedure,
    pub functions: Vec<AuthFunction>,
}

impl SecuredQuery {
    pub fn function(&self, name: &str) -> Option<&AuthFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Functions followed by the procedure, separated by `//` delimiters.
    pub fn script(&self) -> String {
        let mut s = String::from("DELIMITER //\n");
        for func in &self.functions {
            writeln!(s, "{func} //\n").expect("string write");
        }
        writeln!(s, "{} //\nDELIMITER ;", self.procedure).expect("string write");
        s
    }
}

pub fn secure_query(policy: &SecurityModel, registry: &Registry, q: &Query) -> Result<SecuredQuery, SecQueryError> {
    let staged = stage::stage(&policy.data_model, &policy.name, q)?;
    let functions = staged
        .resources
        .iter()
        .map(|r| AuthFunction::build(policy, registry, r))
        .collect::<Result<_, _>>()?;
    Ok(SecuredQuery {
        policy: policy.name.clone(),
        query: q.clone(),
        procedure: StoredProcedure {
            name: procedure_name(&policy.name, q),
            steps: staged.steps.into_iter().map(Step::Create).collect(),
            result: staged.result,
        },
        functions,
    })
}

pub fn secure_query_text(policy: &SecurityModel, registry: &Registry, sql: &str) -> Result<SecuredQuery, SecQueryError> {
    secure_query(policy, registry, &parse_sql(sql)?)
}

/// Whether a guard is the plain role test.
pub fn is_role_test(e: &Expr) -> bool {
    matches!(e, Expr::Binary { op: BinOp::Eq, lhs, .. } if **lhs == Expr::col("role"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn secure(policy: &SecurityModel, n: usize) -> SecuredQuery {
        let reg = Registry::from_json(fixtures::REGISTRY_JSON).unwrap();
        secure_query_text(policy, &reg, fixtures::query(n)).unwrap()
    }

    fn bodies(s: &SecuredQuery) -> Vec<String> {
        s.procedure
            .steps
            .iter()
            .map(|st| st.checked_body().body.to_string())
            .collect()
    }

    #[test]
    fn q2_scans_the_filtered_enrolment_pairs() {
        let s = secure(&fixtures::secvgua(), 2);
        let b = bodies(&s);
        assert_eq!(
            b[0],
            "SELECT Lecturer_id AS lecturers, Student_id AS students FROM Lecturer, Student \
             WHERE Student_id = 'Thanh' AND Lecturer_id = 'Huong'"
        );
        assert_eq!(b[2], "SELECT * FROM Enrolment WHERE students = 'Thanh' AND lecturers = 'Huong'");
        assert_eq!(b[3], "SELECT * FROM Lecturer JOIN TEMP3 ON Lecturer_id = lecturers");
        assert!(b[4].contains("AuthFunc_SecVGUA_Lecturer_email(caller, role, Lecturer_id)"));
        assert_eq!(s.procedure.result.to_string(), "SELECT DISTINCT email FROM TEMP5");
    }

    #[test]
    fn q3_combines_steps_with_clashing_names() {
        let s = secure(&fixtures::secvgua(), 3);
        let b = bodies(&s);
        assert_eq!(b.len(), 9);
        assert_eq!(
            b[6],
            "SELECT TEMP6.lecturers AS lecturers FROM TEMP5 JOIN TEMP6 ON TEMP5.students = TEMP6.students"
        );
        assert_eq!(b[7], "SELECT * FROM Lecturer JOIN TEMP7 ON Lecturer_id = lecturers");
    }

    #[test]
    fn functions_cover_each_resource_once() {
        let s = secure(&fixtures::secvgu2(), 6);
        let names: Vec<&str> = s.functions.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["AuthFunc_SecVGU2_Enrolment", "AuthFunc_SecVGU2_Student_age"]);
        let f = s.function("AuthFunc_SecVGU2_Enrolment").unwrap();
        assert_eq!(f.params, ["caller", "role", "lecturers", "students"]);
        assert!(f.to_string().contains("WHEN 'Lecturer' THEN ((caller = lecturers) OR"));
        assert!(s.procedure.name.starts_with("SecQuery_SecVGU2_"));
        assert_eq!(s.procedure.name.len(), "SecQuery_SecVGU2_".len() + 8);
    }

    #[test]
    fn rejected_shapes() {
        let p = fixtures::secvgu2();
        let reg = Registry::new();
        for q in [
            "SELECT age FROM Student WHERE EXISTS (SELECT 1 FROM Enrolment)",
            "SELECT x FROM (SELECT COUNT(*) AS x FROM Student) AS t",
            "SELECT age FROM (SELECT * FROM Student) AS TEMP1",
        ] {
            assert!(
                matches!(secure_query_text(&p, &reg, q), Err(SecQueryError::UnsupportedQuery(_))),
                "{q}"
            );
        }
    }
}
