//! SQL implementations of authorization constraints.
//!
//! A hand-written [`Registry`] maps constraints (up to iterator renaming) to
//! SQL Boolean expressions. Constraints missing from the registry go through
//! a structural compiler whose result is TRUE exactly when the OCL
//! constraint evaluates to `true`: false stays FALSE and both null and
//! invalid become SQL NULL.
//!
//! Keywords (`caller`, `self`, association ends) appear as unqualified
//! parameter names. Inside a generated function they take precedence over
//! column names, as routine variables do in MySQL.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{id_column, DataModel, EndPos};
use crate::ocl::{parse_ocl_syntax, CmpOp, IterKind, Keywords, OclError, OclExpr};
use crate::sql::{parse_sql_expr, BinOp, Expr, IsTest, Query, Scope, ScopeItem, SelectItem, SqlError, TableRef};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Ocl2SqlError {
    #[error("malformed registry: {0}")]
    Registry(String),
    #[error("registry entry `{constraint}`: {source}")]
    RegistryOcl { constraint: String, source: OclError },
    #[error("registry entry `{constraint}`: {source}")]
    RegistrySql { constraint: String, source: SqlError },
    #[error("SQL for `{constraint}` uses `{name}`, which is neither a column nor a keyword of the constraint")]
    FreeParameter { constraint: String, name: String },
    #[error("cannot compile `{subexpr}` to SQL: {reason}")]
    Uncompilable { subexpr: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImplOrigin {
    Registry,
    Compiled,
}

/// A SQL Boolean expression standing for an OCL constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlConstraintImpl {
    pub constraint: OclExpr,
    pub body: Expr,
    /// Text of the body: verbatim for registry entries, rendered otherwise.
    pub text: String,
    pub origin: ImplOrigin,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    entries: BTreeMap<OclExpr, (String, Expr)>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    /// Reads a JSON object mapping constraint text to SQL body text.
    pub fn from_json(text: &str) -> Result<Registry, Ocl2SqlError> {
        let map: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| Ocl2SqlError::Registry(e.to_string()))?;
        let mut r = Registry::new();
        for (ocl, sql) in &map {
            r.insert(ocl, sql)?;
        }
        Ok(r)
    }

    pub fn insert(&mut self, ocl: &str, sql: &str) -> Result<(), Ocl2SqlError> {
        let key = parse_ocl_syntax(ocl).map_err(|source| Ocl2SqlError::RegistryOcl {
            constraint: ocl.to_string(),
            source,
        })?;
        let body = parse_sql_expr(sql).map_err(|source| Ocl2SqlError::RegistrySql {
            constraint: ocl.to_string(),
            source,
        })?;
        self.entries
            .insert(key.alpha_normalized(), (sql.trim().to_string(), body));
        Ok(())
    }

    pub fn lookup(&self, e: &OclExpr) -> Option<(&str, &Expr)> {
        self.entries
            .get(&e.alpha_normalized())
            .map(|(t, b)| (t.as_str(), b))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Unqualified names in `body` that no enclosing FROM item provides.
pub fn unresolved_names(body: &Expr, dm: &DataModel) -> Result<BTreeSet<String>, SqlError> {
    fn expr(e: &Expr, dm: &DataModel, scopes: &mut Vec<Scope>, out: &mut BTreeSet<String>) -> Result<(), SqlError> {
        let mut cols = Vec::new();
        let mut subs = Vec::new();
        e.walk_shallow(&mut |x| match x {
            Expr::Column { qualifier, name } => cols.push((qualifier.clone(), name.clone())),
            Expr::Exists(q) | Expr::Subquery(q) => subs.push(q.clone()),
            _ => {}
        });
        for (q, n) in cols {
            let mut found = false;
            for s in scopes.iter().rev() {
                if s.lookup(q.as_deref(), &n)?.is_some() {
                    found = true;
                    break;
                }
            }
            match (found, q) {
                (true, _) => {}
                (false, None) => {
                    out.insert(n);
                }
                (false, Some(q)) => return Err(SqlError::UnknownColumn(format!("{q}.{n}"))),
            }
        }
        for q in subs {
            query(&q, dm, scopes, out)?;
        }
        Ok(())
    }
    fn query(q: &Query, dm: &DataModel, scopes: &mut Vec<Scope>, out: &mut BTreeSet<String>) -> Result<(), SqlError> {
        let mut scope = Scope::default();
        for t in q.from.iter().chain(q.joins.iter().map(|j| &j.item)) {
            match t {
                TableRef::Table { name, .. } => scope.items.push(ScopeItem::base(dm, name, t.qualifier())?),
                TableRef::Derived { .. } => {
                    return Err(SqlError::UnsupportedFeature("derived table in a constraint".into()))
                }
            }
        }
        scopes.push(scope);
        let mut r = Ok(());
        for j in &q.joins {
            r = r.and_then(|_| expr(&j.on, dm, scopes, out));
        }
        if let Some(w) = &q.selection {
            r = r.and_then(|_| expr(w, dm, scopes, out));
        }
        for it in &q.items {
            if let SelectItem::Expr { expr: e, .. } = it {
                r = r.and_then(|_| expr(e, dm, scopes, out));
            }
        }
        scopes.pop();
        r
    }
    let mut out = BTreeSet::new();
    expr(body, dm, &mut Vec::new(), &mut out)?;
    Ok(out)
}

/// SQL implementation of `e`: the registry entry if one matches, otherwise
/// the compiled form.
pub fn map_ocl_to_sql(
    dm: &DataModel,
    keywords: &Keywords,
    e: &OclExpr,
    registry: &Registry,
) -> Result<SqlConstraintImpl, Ocl2SqlError> {
    if let Some((text, body)) = registry.lookup(e) {
        let used: BTreeSet<String> = e.keywords().into_iter().collect();
        let names = unresolved_names(body, dm).map_err(|source| Ocl2SqlError::RegistrySql {
            constraint: e.to_string(),
            source,
        })?;
        if let Some(name) = names.into_iter().find(|n| !used.contains(n)) {
            return Err(Ocl2SqlError::FreeParameter {
                constraint: e.to_string(),
                name,
            });
        }
        return Ok(SqlConstraintImpl {
            constraint: e.clone(),
            body: body.clone(),
            text: text.to_string(),
            origin: ImplOrigin::Registry,
        });
    }
    let body = compile_ocl(dm, keywords, e)?;
    Ok(SqlConstraintImpl {
        constraint: e.clone(),
        text: body.to_string(),
        body,
        origin: ImplOrigin::Compiled,
    })
}

/// Structural compilation of a type-correct constraint.
pub fn compile_ocl(dm: &DataModel, keywords: &Keywords, e: &OclExpr) -> Result<Expr, Ocl2SqlError> {
    let mut c = Compiler {
        dm,
        keywords,
        vars: Vec::new(),
        next_alias: 0,
    };
    Ok(c.boolean(e)?.0)
}

struct Collection {
    from: Vec<TableRef>,
    conds: Vec<Expr>,
    elem: String,
    class: String,
}

struct Compiler<'a> {
    dm: &'a DataModel,
    keywords: &'a Keywords,
    /// iterator variable -> (alias of its row, class)
    vars: Vec<(String, String, String)>,
    next_alias: usize,
}

fn uncompilable<T>(e: &OclExpr, reason: &str) -> Result<T, Ocl2SqlError> {
    Err(Ocl2SqlError::Uncompilable {
        subexpr: e.to_string(),
        reason: reason.to_string(),
    })
}

fn exists(from: Vec<TableRef>, conds: Vec<Expr>) -> Expr {
    Expr::Exists(Box::new(Query {
        distinct: false,
        items: vec![SelectItem::expr(Expr::Int(1))],
        from,
        joins: Vec::new(),
        selection: Expr::conjunction(conds),
    }))
}

fn is(e: Expr, test: IsTest) -> Expr {
    Expr::Is {
        expr: Box::new(e),
        negated: false,
        test,
    }
}

impl Compiler<'_> {
    fn alias(&mut self, prefix: &str) -> String {
        loop {
            self.next_alias += 1;
            let a = format!("{prefix}{}", self.next_alias);
            if self.keywords.class_of(&a).is_none() {
                return a;
            }
        }
    }

    fn var(&self, v: &str) -> Option<(&str, &str)> {
        self.vars
            .iter()
            .rev()
            .find(|(n, _, _)| n == v)
            .map(|(_, a, c)| (a.as_str(), c.as_str()))
    }

    fn class_of(&self, e: &OclExpr) -> Option<String> {
        match e {
            OclExpr::Keyword(k) => self.keywords.class_of(k).map(str::to_string),
            OclExpr::Var(v) => self.var(v).map(|(_, c)| c.to_string()),
            _ => None,
        }
    }

    fn is_object(&self, e: &OclExpr) -> bool {
        matches!(e, OclExpr::Keyword(_) | OclExpr::Var(_) | OclExpr::Object(_))
    }

    fn object(&self, e: &OclExpr) -> Result<Expr, Ocl2SqlError> {
        match e {
            OclExpr::Keyword(k) => Ok(Expr::col(k)),
            OclExpr::Var(v) => match self.var(v) {
                Some((alias, class)) => Ok(Expr::qcol(alias, &id_column(class))),
                None => uncompilable(e, "unbound variable"),
            },
            OclExpr::Object(id) => Ok(Expr::str(id)),
            _ => uncompilable(e, "not an object expression"),
        }
    }

    /// A scalar value and whether it may be NULL.
    fn scalar(&mut self, e: &OclExpr) -> Result<(Expr, bool), Ocl2SqlError> {
        match e {
            OclExpr::Int(i) => Ok((Expr::Int(*i), false)),
            OclExpr::Str(s) => Ok((Expr::str(s), false)),
            OclExpr::Null => Ok((Expr::Null, true)),
            OclExpr::Nav(src, attr) => {
                let Some(class) = self.class_of(src) else {
                    return uncompilable(e, "attribute of an object literal");
                };
                if self.dm.attribute(&class, attr).is_none() {
                    return uncompilable(e, "not an attribute");
                }
                if let OclExpr::Var(v) = &**src {
                    let (alias, _) = self.var(v).expect("class_of found it");
                    return Ok((Expr::qcol(alias, attr), true));
                }
                let alias = self.alias("a");
                let q = Query {
                    distinct: false,
                    items: vec![SelectItem::expr(Expr::qcol(&alias, attr))],
                    from: vec![TableRef::Table {
                        name: class.clone(),
                        alias: Some(alias.clone()),
                    }],
                    joins: Vec::new(),
                    selection: Some(Expr::eq(Expr::qcol(&alias, &id_column(&class)), self.object(src)?)),
                };
                Ok((Expr::Subquery(Box::new(q)), true))
            }
            _ if self.is_object(e) => Ok((self.object(e)?, false)),
            _ => uncompilable(e, "not a scalar expression"),
        }
    }

    fn collection(&mut self, e: &OclExpr) -> Result<Collection, Ocl2SqlError> {
        match e {
            OclExpr::AllInstances(c) => {
                let a = self.alias("o");
                Ok(Collection {
                    from: vec![TableRef::Table {
                        name: c.clone(),
                        alias: Some(a.clone()),
                    }],
                    conds: Vec::new(),
                    elem: a,
                    class: c.clone(),
                })
            }
            OclExpr::Nav(src, end) => {
                let Some(class) = self.class_of(src) else {
                    return uncompilable(e, "navigation from an object literal");
                };
                let Some(nav) = self.dm.navigate(&class, end) else {
                    return uncompilable(e, "not an association end");
                };
                let assoc = nav.association;
                let (source_col, target_col) = match nav.target_pos {
                    EndPos::Second => (&assoc.end1.name, &assoc.end2.name),
                    EndPos::First => (&assoc.end2.name, &assoc.end1.name),
                };
                let target = nav.target_class.to_string();
                let t = self.alias("o");
                let l = self.alias("l");
                let from = vec![
                    TableRef::Table {
                        name: target.clone(),
                        alias: Some(t.clone()),
                    },
                    TableRef::Table {
                        name: assoc.name.clone(),
                        alias: Some(l.clone()),
                    },
                ];
                let conds = vec![
                    Expr::eq(Expr::qcol(&l, source_col), self.object(src)?),
                    Expr::eq(Expr::qcol(&l, target_col), Expr::qcol(&t, &id_column(&target))),
                ];
                Ok(Collection {
                    from,
                    conds,
                    elem: t,
                    class: target,
                })
            }
            OclExpr::Iter {
                kind: IterKind::Select,
                source,
                var,
                body,
            } => {
                let mut c = self.collection(source)?;
                self.vars.push((var.clone(), c.elem.clone(), c.class.clone()));
                let b = self.boolean(body);
                self.vars.pop();
                c.conds.push(b?.0);
                Ok(c)
            }
            _ => uncompilable(e, "not a collection expression"),
        }
    }

    fn boolean(&mut self, e: &OclExpr) -> Result<(Expr, bool), Ocl2SqlError> {
        Ok(match e {
            OclExpr::Bool(b) => (Expr::Bool(*b), false),
            OclExpr::And(a, b) => {
                let (a, na) = self.boolean(a)?;
                let (b, nb) = self.boolean(b)?;
                (Expr::and(a, b), na || nb)
            }
            OclExpr::Or(a, b) => {
                let (a, na) = self.boolean(a)?;
                let (b, nb) = self.boolean(b)?;
                (Expr::or(a, b), na || nb)
            }
            OclExpr::Not(a) => {
                let (a, n) = self.boolean(a)?;
                (Expr::Not(Box::new(a)), n)
            }
            OclExpr::Compare(op, a, b) => self.compare(*op, a, b)?,
            OclExpr::IsEmpty(c) => {
                let c = self.collection(c)?;
                (Expr::Not(Box::new(exists(c.from, c.conds))), false)
            }
            OclExpr::Includes(c, x) => {
                if **x == OclExpr::Null {
                    return Ok((Expr::Bool(false), false));
                }
                let x = self.object(x)?;
                let mut c = self.collection(c)?;
                c.conds.push(Expr::eq(Expr::qcol(&c.elem, &id_column(&c.class)), x));
                (exists(c.from, c.conds), false)
            }
            OclExpr::Iter {
                kind: kind @ (IterKind::Exists | IterKind::ForAll),
                source,
                var,
                body,
            } => {
                let c = self.collection(source)?;
                self.vars.push((var.clone(), c.elem.clone(), c.class.clone()));
                let b = self.boolean(body);
                self.vars.pop();
                let (b, nullable) = b?;
                let with = |extra: Expr| {
                    let mut conds = c.conds.clone();
                    conds.push(extra);
                    exists(c.from.clone(), conds)
                };
                match (kind, nullable) {
                    (IterKind::Exists, false) => (with(b), false),
                    (IterKind::ForAll, false) => (Expr::Not(Box::new(with(Expr::Not(Box::new(b))))), false),
                    // a witness decides; otherwise an unknown body makes the result unknown
                    (IterKind::Exists, true) => (
                        Expr::Case {
                            operand: None,
                            branches: vec![
                                (with(b.clone()), Expr::Bool(true)),
                                (with(is(b, IsTest::Null)), Expr::Null),
                            ],
                            otherwise: Some(Box::new(Expr::Bool(false))),
                        },
                        true,
                    ),
                    _ => (
                        Expr::Case {
                            operand: None,
                            branches: vec![
                                (with(is(b.clone(), IsTest::False)), Expr::Bool(false)),
                                (with(is(b, IsTest::Null)), Expr::Null),
                            ],
                            otherwise: Some(Box::new(Expr::Bool(true))),
                        },
                        true,
                    ),
                }
            }
            _ => return uncompilable(e, "not a Boolean expression"),
        })
    }

    fn compare(&mut self, op: CmpOp, a: &OclExpr, b: &OclExpr) -> Result<(Expr, bool), Ocl2SqlError> {
        let negate = |e: Expr| Expr::Not(Box::new(e));
        if *a == OclExpr::Null || *b == OclExpr::Null {
            let other = if *a == OclExpr::Null { b } else { a };
            let test = if *other == OclExpr::Null {
                Expr::Bool(true)
            } else {
                is(self.scalar(other)?.0, IsTest::Null)
            };
            return Ok(match op {
                CmpOp::Eq => (test, false),
                CmpOp::Ne => (negate(test), false),
                _ => return uncompilable(a, "ordering against null"),
            });
        }
        let (x, nx) = self.scalar(a)?;
        let (y, ny) = self.scalar(b)?;
        let nullable = nx || ny;
        Ok(match op {
            CmpOp::Eq if nullable => (Expr::binary(BinOp::NullSafeEq, x, y), false),
            CmpOp::Ne if nullable => (negate(Expr::binary(BinOp::NullSafeEq, x, y)), false),
            CmpOp::Eq => (Expr::eq(x, y), false),
            CmpOp::Ne => (Expr::binary(BinOp::Ne, x, y), false),
            CmpOp::Lt => (Expr::binary(BinOp::Lt, x, y), nullable),
            CmpOp::Le => (Expr::binary(BinOp::Le, x, y), nullable),
            CmpOp::Gt => (Expr::binary(BinOp::Gt, x, y), nullable),
            CmpOp::Ge => (Expr::binary(BinOp::Ge, x, y), nullable),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ocl::parse_ocl;
    use crate::policy::Resource;

    #[test]
    fn registry_hits_ignore_iterator_names() {
        let s = fixtures::secvgu2();
        let reg = Registry::from_json(fixtures::REGISTRY_JSON).unwrap();
        assert_eq!(reg.len(), 3);
        let kw = s.keywords(&Resource::attribute("Student", "age")).unwrap();
        let e = parse_ocl("caller.students->exists(x | x = self)", &s.data_model, &kw).unwrap();
        let imp = map_ocl_to_sql(&s.data_model, &kw, &e, &reg).unwrap();
        assert_eq!(imp.origin, ImplOrigin::Registry);
        assert_eq!(
            imp.text,
            "EXISTS (SELECT 1 FROM Enrolment e WHERE e.lecturers = caller AND e.students = self)"
        );
    }

    #[test]
    fn registry_entries_with_stray_names_are_rejected() {
        let s = fixtures::secvgu2();
        let mut reg = Registry::new();
        reg.insert("caller = self", "caller = someone").unwrap();
        let kw = s.keywords(&Resource::attribute("Student", "age")).unwrap();
        let e = parse_ocl("caller = self", &s.data_model, &kw);
        // caller and self have different classes, so build a well-typed variant
        assert!(e.is_err());
        let kw = s.keywords(&Resource::attribute("Lecturer", "email")).unwrap();
        let e = parse_ocl("caller = self", &s.data_model, &kw).unwrap();
        assert!(matches!(
            map_ocl_to_sql(&s.data_model, &kw, &e, &reg),
            Err(Ocl2SqlError::FreeParameter { name, .. }) if name == "someone"
        ));
    }

    #[test]
    fn compiled_forms() {
        let dm = fixtures::university();
        let s = fixtures::secvgu1();
        let kw = s.keywords(&Resource::association("Enrolment")).unwrap();
        let c = |t: &str| compile_ocl(&dm, &kw, &parse_ocl(t, &dm, &kw).unwrap()).unwrap().to_string();
        assert_eq!(c("lecturers = caller"), "lecturers = caller");
        assert_eq!(
            c("Lecturer.allInstances()->select(l | l.age > caller.age)->isEmpty()"),
            "NOT EXISTS (SELECT 1 FROM Lecturer o1 WHERE o1.age > (SELECT a2.age FROM Lecturer a2 WHERE a2.Lecturer_id = caller))"
        );
        assert_eq!(
            c("caller.students->includes(students)"),
            "EXISTS (SELECT 1 FROM Student o1, Enrolment l2 WHERE l2.lecturers = caller AND l2.students = o1.Student_id AND o1.Student_id = students)"
        );
        assert_eq!(c("caller.email = null"), "(SELECT a1.email FROM Lecturer a1 WHERE a1.Lecturer_id = caller) IS NULL");
    }
}
