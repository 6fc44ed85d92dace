//! Name resolution and the protected resources a query reads.

use std::collections::BTreeSet;
use std::fmt;

use super::ast::*;
use super::SqlError;
use crate::model::{id_column, DataModel, TableKind};
use crate::policy::Resource;

/// Procedure parameters; unqualified references to them never denote columns.
pub const PARAMETERS: &[&str] = &["caller", "role"];

/// Where the values of a column come from.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Lineage {
    /// The identifier column of a class table.
    Id(String),
    /// An attribute column of a class table, not yet read under a check.
    Attr { class: String, attr: String },
    /// An end column of an association table.
    End { assoc: String, end: String },
    /// Anything computed, or an attribute value already read.
    Derived,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeItem {
    pub qualifier: String,
    pub columns: Vec<(String, Lineage)>,
    /// Base table name, when the item is one.
    pub table: Option<String>,
}

impl ScopeItem {
    pub fn base(dm: &DataModel, name: &str, qualifier: &str) -> Result<ScopeItem, SqlError> {
        let columns = match dm.table_kind(name) {
            Some(TableKind::Class(c)) => {
                let mut cols = vec![(id_column(&c.name), Lineage::Id(c.name.clone()))];
                cols.extend(c.attributes.iter().map(|a| {
                    (
                        a.name.clone(),
                        Lineage::Attr {
                            class: c.name.clone(),
                            attr: a.name.clone(),
                        },
                    )
                }));
                cols
            }
            Some(TableKind::Association(a)) => a
                .ends()
                .iter()
                .map(|e| {
                    (
                        e.name.clone(),
                        Lineage::End {
                            assoc: a.name.clone(),
                            end: e.name.clone(),
                        },
                    )
                })
                .collect(),
            None => return Err(SqlError::UnknownTable(name.to_string())),
        };
        Ok(ScopeItem {
            qualifier: qualifier.to_string(),
            columns,
            table: Some(name.to_string()),
        })
    }

    /// Index of the id column of `class` within this item.
    pub fn id_of(&self, class: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|(_, l)| *l == Lineage::Id(class.to_string()))
    }
}

/// The FROM items visible at one query level.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scope {
    pub items: Vec<ScopeItem>,
}

impl Scope {
    /// Finds a column in this level only: `Ok(None)` if absent.
    pub fn lookup(&self, qualifier: Option<&str>, name: &str) -> Result<Option<(usize, usize)>, SqlError> {
        let mut found = None;
        for (i, item) in self.items.iter().enumerate() {
            if qualifier.is_some_and(|q| q != item.qualifier) {
                continue;
            }
            if let Some(j) = item.columns.iter().position(|(c, _)| c == name) {
                if found.is_some() {
                    return Err(SqlError::AmbiguousColumn(name.to_string()));
                }
                found = Some((i, j));
            }
        }
        if found.is_none() {
            if let Some(q) = qualifier {
                if self.items.iter().any(|it| it.qualifier == q) {
                    return Err(SqlError::UnknownColumn(format!("{q}.{name}")));
                }
            }
        }
        Ok(found)
    }
}

/// Resolution of a column reference against a stack of scopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolved {
    Parameter,
    /// (scope depth counted from the outermost, item, column)
    Column(usize, usize, usize),
}

pub fn resolve(scopes: &[Scope], qualifier: Option<&str>, name: &str) -> Result<Resolved, SqlError> {
    if qualifier.is_none() && PARAMETERS.contains(&name) {
        return Ok(Resolved::Parameter);
    }
    for (depth, scope) in scopes.iter().enumerate().rev() {
        if let Some((i, j)) = scope.lookup(qualifier, name)? {
            return Ok(Resolved::Column(depth, i, j));
        }
    }
    Err(SqlError::UnknownColumn(match qualifier {
        Some(q) => format!("{q}.{name}"),
        None => name.to_string(),
    }))
}

/// Name of an output column: its alias, the column name, or the expression text.
pub fn output_name(expr: &Expr, alias: Option<&str>) -> String {
    match (alias, expr) {
        (Some(a), _) => a.to_string(),
        (None, Expr::Column { name, .. }) => name.clone(),
        (None, e) => e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrAccess {
    pub class: String,
    pub attribute: String,
    /// Qualifier of the FROM item the value is read from.
    pub row_source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssocAccess {
    pub association: String,
    pub end1_class: String,
    pub end2_class: String,
    pub row_source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResourceAccess {
    Attr(AttrAccess),
    Assoc(AssocAccess),
}

impl ResourceAccess {
    pub fn resource(&self) -> Resource {
        match self {
            ResourceAccess::Attr(a) => Resource::attribute(&a.class, &a.attribute),
            ResourceAccess::Assoc(a) => Resource::association(&a.association),
        }
    }
}

impl fmt::Display for ResourceAccess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResourceAccess::Attr(a) => write!(f, "AttrAccess({}, {}, {})", a.class, a.attribute, a.row_source),
            ResourceAccess::Assoc(a) => write!(
                f,
                "AssocAccess({}, {}, {})",
                a.association, a.end1_class, a.end2_class
            ),
        }
    }
}

struct Collector<'a> {
    dm: &'a DataModel,
    out: Vec<ResourceAccess>,
    seen: BTreeSet<(String, String)>,
}

impl Collector<'_> {
    fn read(&mut self, lineage: &Lineage, row_source: &str) {
        if let Lineage::Attr { class, attr } = lineage {
            if self.seen.insert((class.clone(), attr.clone())) {
                self.out.push(ResourceAccess::Attr(AttrAccess {
                    class: class.clone(),
                    attribute: attr.clone(),
                    row_source: row_source.to_string(),
                }));
            }
        }
    }

    fn item(&mut self, t: &TableRef, scopes: &mut Vec<Scope>) -> Result<ScopeItem, SqlError> {
        match t {
            TableRef::Table { name, .. } => {
                let item = ScopeItem::base(self.dm, name, t.qualifier())?;
                if let Some(a) = self.dm.association(name) {
                    self.out.push(ResourceAccess::Assoc(AssocAccess {
                        association: a.name.clone(),
                        end1_class: a.end1.class.clone(),
                        end2_class: a.end2.class.clone(),
                        row_source: t.qualifier().to_string(),
                    }));
                }
                Ok(item)
            }
            TableRef::Derived { query, alias } => {
                let columns = self.query(query, scopes, false)?;
                Ok(ScopeItem {
                    qualifier: alias.clone(),
                    columns,
                    table: None,
                })
            }
        }
    }

    fn expr(&mut self, e: &Expr, scopes: &mut Vec<Scope>) -> Result<(), SqlError> {
        let mut cols = Vec::new();
        let mut subs = Vec::new();
        e.walk_shallow(&mut |x| match x {
            Expr::Column { qualifier, name } => cols.push((qualifier.clone(), name.clone())),
            Expr::Exists(q) | Expr::Subquery(q) => subs.push(q.clone()),
            _ => {}
        });
        for (q, n) in cols {
            if let Resolved::Column(d, i, j) = resolve(scopes, q.as_deref(), &n)? {
                let item = &scopes[d].items[i];
                let (lineage, qual) = (item.columns[j].1.clone(), item.qualifier.clone());
                self.read(&lineage, &qual);
            }
        }
        for q in subs {
            self.query(&q, scopes, false)?;
        }
        Ok(())
    }

    fn query(&mut self, q: &Query, scopes: &mut Vec<Scope>, top: bool) -> Result<Vec<(String, Lineage)>, SqlError> {
        scopes.push(Scope::default());
        let r = self.query_body(q, scopes, top);
        scopes.pop();
        r
    }

    fn query_body(&mut self, q: &Query, scopes: &mut Vec<Scope>, top: bool) -> Result<Vec<(String, Lineage)>, SqlError> {
        for t in &q.from {
            // derived tables cannot see sibling items
            let item = self.item(t, scopes)?;
            scopes.last_mut().expect("pushed").items.push(item);
        }
        for j in &q.joins {
            let item = self.item(&j.item, scopes)?;
            scopes.last_mut().expect("pushed").items.push(item);
            self.expr(&j.on, scopes)?;
        }
        if let Some(w) = &q.selection {
            self.expr(w, scopes)?;
        }
        let mut output = Vec::new();
        for it in &q.items {
            match it {
                SelectItem::Wildcard => {
                    let scope = scopes.last().expect("pushed").clone();
                    for item in &scope.items {
                        for (name, lineage) in &item.columns {
                            if top {
                                self.read(lineage, &item.qualifier);
                            }
                            output.push((name.clone(), lineage.clone()));
                        }
                    }
                }
                SelectItem::Expr { expr, alias } => {
                    self.expr(expr, scopes)?;
                    let lineage = match expr {
                        Expr::Column { qualifier, name } => match resolve(scopes, qualifier.as_deref(), name)? {
                            Resolved::Column(d, i, j) => match &scopes[d].items[i].columns[j].1 {
                                Lineage::Attr { .. } => Lineage::Derived,
                                l => l.clone(),
                            },
                            Resolved::Parameter => Lineage::Derived,
                        },
                        _ => Lineage::Derived,
                    };
                    output.push((output_name(expr, alias.as_deref()), lineage));
                }
            }
        }
        Ok(output)
    }
}

/// The protected resources `q` reads, in evaluation order: FROM items
/// (recursively), each join with its ON condition, WHERE, then the SELECT
/// list. Attribute reads are reported once per (class, attribute); each
/// occurrence of an association table is reported.
pub fn resource_accesses(q: &Query, dm: &DataModel) -> Result<Vec<ResourceAccess>, SqlError> {
    let mut c = Collector {
        dm,
        out: Vec::new(),
        seen: BTreeSet::new(),
    };
    c.query(q, &mut Vec::new(), true)?;
    Ok(c.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::sql::parse_sql;

    fn accesses(text: &str) -> Vec<String> {
        let dm = fixtures::university();
        resource_accesses(&parse_sql(text).unwrap(), &dm)
            .unwrap()
            .iter()
            .map(|a| a.to_string())
            .collect()
    }

    #[test]
    fn case_study_accesses() {
        assert_eq!(accesses(fixtures::query(4)), ["AttrAccess(Student, age, Student)"]);
        assert_eq!(accesses(fixtures::query(5)), ["AssocAccess(Enrolment, Lecturer, Student)"]);
        assert_eq!(
            accesses(fixtures::query(6)),
            [
                "AssocAccess(Enrolment, Lecturer, Student)",
                "AttrAccess(Student, age, Student)"
            ]
        );
        assert_eq!(
            accesses(fixtures::query(3)),
            [
                "AssocAccess(Enrolment, Lecturer, Student)",
                "AssocAccess(Enrolment, Lecturer, Student)",
                "AttrAccess(Lecturer, email, Lecturer)"
            ]
        );
    }

    #[test]
    fn ids_are_not_protected_and_wildcards_read_only_at_top_level() {
        assert!(accesses("SELECT Student_id FROM Student WHERE Student_id = caller").is_empty());
        assert!(accesses("SELECT s.Student_id FROM (SELECT * FROM Student) AS s").is_empty());
        assert_eq!(
            accesses("SELECT * FROM Lecturer"),
            [
                "AttrAccess(Lecturer, age, Lecturer)",
                "AttrAccess(Lecturer, email, Lecturer)",
                "AttrAccess(Lecturer, name, Lecturer)"
            ]
        );
    }

    #[test]
    fn correlated_subqueries_and_errors() {
        assert_eq!(
            accesses("SELECT name FROM Student s WHERE EXISTS (SELECT 1 FROM Enrolment e WHERE e.students = s.Student_id)"),
            ["AssocAccess(Enrolment, Lecturer, Student)", "AttrAccess(Student, name, s)"]
        );
        let dm = fixtures::university();
        let q = parse_sql("SELECT age FROM Student, Lecturer").unwrap();
        assert_eq!(resource_accesses(&q, &dm), Err(SqlError::AmbiguousColumn("age".into())));
        let q = parse_sql("SELECT x FROM Course").unwrap();
        assert_eq!(resource_accesses(&q, &dm), Err(SqlError::UnknownTable("Course".into())));
    }
}
