//! Data models, scenarios and their relational image.
//!
//! A [`DataModel`] is a set of classes with typed attributes plus binary
//! associations. Every class maps to a table `<Class>(<Class>_id, attrs...)`
//! and every association to a two-column link table named after the
//! association, whose columns are the two end names. A [`Scenario`] is a
//! finite instance of a model and maps one-to-one onto the rows of that
//! schema.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width used for every identifier and string column in generated SQL.
pub const VARCHAR_WIDTH: u32 = 250;

/// Names the generated SQL reserves for procedure parameters.
pub const RESERVED_NAMES: &[&str] = &["caller", "role"];

const SQL_KEYWORDS: &[&str] = &[
    "SELECT", "FROM", "WHERE", "JOIN", "INNER", "ON", "AS", "AND", "OR", "NOT", "EXISTS", "CASE",
    "WHEN", "THEN", "ELSE", "END", "NULL", "TRUE", "FALSE", "IS", "DISTINCT", "GROUP", "ORDER",
    "BY", "HAVING", "LIMIT", "UNION", "LEFT", "RIGHT", "FULL", "OUTER", "CROSS", "TABLE",
    "CREATE", "INSERT", "INTO", "VALUES", "IF",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid data model: {0}")]
    InvalidModel(ValidationReport),
    #[error("invalid scenario: {0}")]
    InvalidScenario(ValidationReport),
    #[error("malformed model document: {0}")]
    Parse(String),
}

/// One violation found by validation, tagged with the offending element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub element: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, element: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            element: element.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.element, v.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttrType {
    Int,
    String,
}

impl AttrType {
    pub fn sql_type(self) -> String {
        match self {
            AttrType::Int => "int".to_string(),
            AttrType::String => format!("varchar({VARCHAR_WIDTH})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: AttrType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDef {
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<Attribute>,
    /// Generalisation is not supported; a non-empty value fails validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superclass: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationEnd {
    pub name: String,
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationDef {
    pub name: String,
    pub end1: AssociationEnd,
    pub end2: AssociationEnd,
}

impl AssociationDef {
    pub fn ends(&self) -> [&AssociationEnd; 2] {
        [&self.end1, &self.end2]
    }
}

/// Which column of a link table an association end occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EndPos {
    First,
    Second,
}

impl EndPos {
    pub fn opposite(self) -> EndPos {
        match self {
            EndPos::First => EndPos::Second,
            EndPos::Second => EndPos::First,
        }
    }
}

/// Result of resolving `obj.<end>` for an object of some class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Navigation<'a> {
    pub association: &'a AssociationDef,
    /// Position of the navigated-to end (the collection elements).
    pub target_pos: EndPos,
    pub target_class: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataModel {
    pub name: String,
    #[serde(default)]
    pub classes: Vec<ClassDef>,
    #[serde(default)]
    pub associations: Vec<AssociationDef>,
}

/// What a table of the relational image stores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind<'a> {
    Class(&'a ClassDef),
    Association(&'a AssociationDef),
}

pub fn id_column(class: &str) -> String {
    format!("{class}_id")
}

fn valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_sql_keyword(s: &str) -> bool {
    SQL_KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(s))
}

impl DataModel {
    pub fn from_json(text: &str) -> Result<DataModel, ModelError> {
        let dm: DataModel =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        let report = dm.validate();
        if report.is_ok() {
            Ok(dm)
        } else {
            Err(ModelError::InvalidModel(report))
        }
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn association(&self, name: &str) -> Option<&AssociationDef> {
        self.associations.iter().find(|a| a.name == name)
    }

    pub fn attribute(&self, class: &str, attr: &str) -> Option<&Attribute> {
        self.class(class)?.attributes.iter().find(|a| a.name == attr)
    }

    /// Resolves an association end reachable from objects of `class`.
    pub fn navigate(&self, class: &str, end: &str) -> Option<Navigation<'_>> {
        for assoc in &self.associations {
            if assoc.end2.name == end && assoc.end1.class == class {
                return Some(Navigation {
                    association: assoc,
                    target_pos: EndPos::Second,
                    target_class: &assoc.end2.class,
                });
            }
            if assoc.end1.name == end && assoc.end2.class == class {
                return Some(Navigation {
                    association: assoc,
                    target_pos: EndPos::First,
                    target_class: &assoc.end1.class,
                });
            }
        }
        None
    }

    pub fn table_kind(&self, table: &str) -> Option<TableKind<'_>> {
        if let Some(c) = self.class(table) {
            return Some(TableKind::Class(c));
        }
        self.association(table).map(TableKind::Association)
    }

    /// Column names of a table of the relational image, in DDL order.
    pub fn table_columns(&self, table: &str) -> Option<Vec<String>> {
        match self.table_kind(table)? {
            TableKind::Class(c) => {
                let mut cols = vec![id_column(&c.name)];
                cols.extend(c.attributes.iter().map(|a| a.name.clone()));
                Some(cols)
            }
            TableKind::Association(a) => Some(vec![a.end1.name.clone(), a.end2.name.clone()]),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let mut tables = BTreeSet::new();
        for c in &self.classes {
            if !valid_identifier(&c.name) || is_sql_keyword(&c.name) {
                r.push(&c.name, "class name is not a valid identifier");
            }
            if !tables.insert(c.name.clone()) {
                r.push(&c.name, "duplicate class name");
            }
            if let Some(sup) = &c.superclass {
                r.push(&c.name, format!("generalisation (superclass {sup}) is not supported"));
            }
            let mut cols = BTreeSet::from([id_column(&c.name)]);
            for a in &c.attributes {
                let el = format!("{}.{}", c.name, a.name);
                if !valid_identifier(&a.name) || is_sql_keyword(&a.name) {
                    r.push(&el, "attribute name is not a valid identifier");
                }
                if RESERVED_NAMES.contains(&a.name.as_str()) || a.name == "self" {
                    r.push(&el, "attribute name is reserved");
                }
                if !cols.insert(a.name.clone()) {
                    r.push(&el, "duplicate attribute or clash with the id column");
                }
            }
        }
        let mut end_names: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for a in &self.associations {
            if !valid_identifier(&a.name) || is_sql_keyword(&a.name) {
                r.push(&a.name, "association name is not a valid identifier");
            }
            if !tables.insert(a.name.clone()) {
                r.push(&a.name, "association name clashes with another table");
            }
            if a.end1.name == a.end2.name {
                r.push(&a.name, "association ends must have distinct names");
            }
            for end in a.ends() {
                let el = format!("{}.{}", a.name, end.name);
                if !valid_identifier(&end.name) || is_sql_keyword(&end.name) {
                    r.push(&el, "end name is not a valid identifier");
                }
                if RESERVED_NAMES.contains(&end.name.as_str()) || end.name == "self" {
                    r.push(&el, "end name is reserved");
                }
                if self.class(&end.class).is_none() {
                    r.push(&el, format!("unknown class {}", end.class));
                }
            }
            // the class on the opposite side gains `end` as a navigation name
            end_names
                .entry(a.end2.name.clone())
                .or_default()
                .push(a.end1.class.clone());
            end_names
                .entry(a.end1.name.clone())
                .or_default()
                .push(a.end2.class.clone());
        }
        for (end, owners) in &end_names {
            let mut seen = BTreeSet::new();
            for owner in owners {
                if !seen.insert(owner) {
                    r.push(end, format!("ambiguous navigation {end} from class {owner}"));
                }
                if self.attribute(owner, end).is_some() {
                    r.push(end, format!("end name clashes with attribute {owner}.{end}"));
                }
            }
        }
        r
    }

    /// DDL for the relational image: one table per class, then one per association.
    pub fn sql_schema(&self) -> Result<SqlScript, ModelError> {
        let report = self.validate();
        if !report.is_ok() {
            return Err(ModelError::InvalidModel(report));
        }
        let mut stmts = Vec::new();
        for c in &self.classes {
            let mut lines = vec![format!("  {} varchar({VARCHAR_WIDTH}) NOT NULL", id_column(&c.name))];
            for a in &c.attributes {
                lines.push(format!("  {} {}", a.name, a.ty.sql_type()));
            }
            lines.push(format!("  PRIMARY KEY ({})", id_column(&c.name)));
            stmts.push(format!("CREATE TABLE {} (\n{}\n);", c.name, lines.join(",\n")));
        }
        for a in &self.associations {
            let lines = [
                format!("  {} varchar({VARCHAR_WIDTH}) NOT NULL", a.end1.name),
                format!("  {} varchar({VARCHAR_WIDTH}) NOT NULL", a.end2.name),
                format!("  PRIMARY KEY ({}, {})", a.end1.name, a.end2.name),
                format!(
                    "  FOREIGN KEY ({}) REFERENCES {}({})",
                    a.end1.name,
                    a.end1.class,
                    id_column(&a.end1.class)
                ),
                format!(
                    "  FOREIGN KEY ({}) REFERENCES {}({})",
                    a.end2.name,
                    a.end2.class,
                    id_column(&a.end2.class)
                ),
            ];
            stmts.push(format!("CREATE TABLE {} (\n{}\n);", a.name, lines.join(",\n")));
        }
        Ok(SqlScript { statements: stmts })
    }
}

/// Ordered list of SQL statements, each terminated by `;`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SqlScript {
    pub statements: Vec<String>,
}

impl fmt::Display for SqlScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Attribute value of an object; JSON `null`, a number or a string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Int(i64),
    Str(String),
}

impl Value {
    pub fn sql_literal(&self) -> String {
        match self {
            Value::Null => "NULL".to_string(),
            Value::Int(i) => i.to_string(),
            Value::Str(s) => sql_string_literal(s),
        }
    }
}

pub fn sql_string_literal(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// An object identity together with its class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectRef {
    pub id: String,
    pub class: String,
}

impl ObjectRef {
    pub fn new(id: impl Into<String>, class: impl Into<String>) -> ObjectRef {
        ObjectRef {
            id: id.into(),
            class: class.into(),
        }
    }
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.id, self.class)
    }
}

/// Attribute values of one object; a missing attribute reads as null.
pub type ObjectRecord = BTreeMap<String, Value>;

/// A finite instance: objects grouped by class, links grouped by association.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub objects: BTreeMap<String, BTreeMap<String, ObjectRecord>>,
    #[serde(default)]
    pub links: BTreeMap<String, Vec<(String, String)>>,
}

impl Scenario {
    pub fn from_json(text: &str, dm: &DataModel) -> Result<Scenario, ModelError> {
        let sc: Scenario =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        let report = sc.validate(dm);
        if report.is_ok() {
            Ok(sc)
        } else {
            Err(ModelError::InvalidScenario(report))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn add_object(&mut self, class: &str, id: &str, attrs: &[(&str, Value)]) {
        let rec = attrs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        self.objects
            .entry(class.to_string())
            .or_default()
            .insert(id.to_string(), rec);
    }

    pub fn add_link(&mut self, assoc: &str, first: &str, second: &str) {
        let links = self.links.entry(assoc.to_string()).or_default();
        let pair = (first.to_string(), second.to_string());
        if !links.contains(&pair) {
            links.push(pair);
        }
    }

    /// The class of the object with this id, if any.
    pub fn class_of(&self, id: &str) -> Option<&str> {
        self.objects
            .iter()
            .find(|(_, objs)| objs.contains_key(id))
            .map(|(c, _)| c.as_str())
    }

    pub fn object(&self, id: &str) -> Option<ObjectRef> {
        self.class_of(id).map(|c| ObjectRef::new(id, c))
    }

    /// Objects of a class ordered by id.
    pub fn instances(&self, class: &str) -> Vec<ObjectRef> {
        self.objects
            .get(class)
            .map(|objs| objs.keys().map(|id| ObjectRef::new(id, class)).collect())
            .unwrap_or_default()
    }

    pub fn attribute_value(&self, obj: &ObjectRef, attr: &str) -> Value {
        self.objects
            .get(&obj.class)
            .and_then(|objs| objs.get(&obj.id))
            .and_then(|rec| rec.get(attr))
            .cloned()
            .unwrap_or(Value::Null)
    }

    pub fn linked(&self, assoc: &str, first: &str, second: &str) -> bool {
        self.links
            .get(assoc)
            .is_some_and(|l| l.iter().any(|(a, b)| a == first && b == second))
    }

    /// Ids linked to `id`, where `id` sits at the end opposite to `target`.
    pub fn navigate_ids(&self, assoc: &str, id: &str, target: EndPos) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        if let Some(links) = self.links.get(assoc) {
            for (a, b) in links {
                match target {
                    EndPos::Second if a == id => {
                        out.insert(b.clone());
                    }
                    EndPos::First if b == id => {
                        out.insert(a.clone());
                    }
                    _ => {}
                }
            }
        }
        out
    }

    /// Same scenario with objects and links in canonical order and without
    /// explicit null attributes.
    pub fn normalized(&self) -> Scenario {
        let mut out = Scenario::default();
        for (class, objs) in &self.objects {
            let entry = out.objects.entry(class.clone()).or_default();
            for (id, rec) in objs {
                let rec = rec
                    .iter()
                    .filter(|(_, v)| **v != Value::Null)
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                entry.insert(id.clone(), rec);
            }
        }
        out.objects.retain(|_, objs| !objs.is_empty());
        for (assoc, links) in &self.links {
            let set: BTreeSet<_> = links.iter().cloned().collect();
            if !set.is_empty() {
                out.links.insert(assoc.clone(), set.into_iter().collect());
            }
        }
        out
    }

    pub fn validate(&self, dm: &DataModel) -> ValidationReport {
        let mut r = ValidationReport::default();
        let mut ids: BTreeMap<&str, &str> = BTreeMap::new();
        for (class, objs) in &self.objects {
            let Some(cdef) = dm.class(class) else {
                r.push(class, "unknown class");
                continue;
            };
            for (id, rec) in objs {
                if id.is_empty() {
                    r.push(class, "empty object id");
                }
                if let Some(other) = ids.insert(id, class) {
                    r.push(id, format!("object id used by both {other} and {class}"));
                }
                for (attr, v) in rec {
                    let el = format!("{id}.{attr}");
                    match cdef.attributes.iter().find(|a| &a.name == attr) {
                        None => r.push(el, format!("unknown attribute of {class}")),
                        Some(a) => match (a.ty, v) {
                            (_, Value::Null)
                            | (AttrType::Int, Value::Int(_))
                            | (AttrType::String, Value::Str(_)) => {}
                            _ => r.push(el, format!("value does not match type {:?}", a.ty)),
                        },
                    }
                }
            }
        }
        for (assoc, links) in &self.links {
            let Some(adef) = dm.association(assoc) else {
                r.push(assoc, "unknown association");
                continue;
            };
            let mut seen = BTreeSet::new();
            for (a, b) in links {
                let el = format!("{assoc}({a}, {b})");
                if !seen.insert((a, b)) {
                    r.push(&el, "duplicate link");
                }
                if ids.get(a.as_str()) != Some(&adef.end1.class.as_str()) {
                    r.push(&el, format!("{a} is not a {}", adef.end1.class));
                }
                if ids.get(b.as_str()) != Some(&adef.end2.class.as_str()) {
                    r.push(&el, format!("{b} is not a {}", adef.end2.class));
                }
            }
        }
        r
    }

    /// INSERT statements populating the relational image: classes in
    /// declaration order, then associations; rows ordered by id.
    pub fn to_inserts(&self, dm: &DataModel) -> Result<SqlScript, ModelError> {
        let report = self.validate(dm);
        if !report.is_ok() {
            return Err(ModelError::InvalidScenario(report));
        }
        let mut stmts = Vec::new();
        for c in &dm.classes {
            let Some(objs) = self.objects.get(&c.name) else {
                continue;
            };
            let cols: Vec<String> = std::iter::once(id_column(&c.name))
                .chain(c.attributes.iter().map(|a| a.name.clone()))
                .collect();
            for (id, rec) in objs {
                let mut vals = vec![sql_string_literal(id)];
                for a in &c.attributes {
                    vals.push(rec.get(&a.name).unwrap_or(&Value::Null).sql_literal());
                }
                stmts.push(format!(
                    "INSERT INTO {} ({}) VALUES ({});",
                    c.name,
                    cols.join(", "),
                    vals.join(", ")
                ));
            }
        }
        for a in &dm.associations {
            let Some(links) = self.links.get(&a.name) else {
                continue;
            };
            let sorted: BTreeSet<_> = links.iter().collect();
            for (x, y) in sorted {
                stmts.push(format!(
                    "INSERT INTO {} ({}, {}) VALUES ({}, {});",
                    a.name,
                    a.end1.name,
                    a.end2.name,
                    sql_string_literal(x),
                    sql_string_literal(y)
                ));
            }
        }
        Ok(SqlScript { statements: stmts })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn university() -> DataModel {
        DataModel {
            name: "University".into(),
            classes: vec![
                ClassDef {
                    name: "Lecturer".into(),
                    attributes: vec![
                        Attribute { name: "age".into(), ty: AttrType::Int },
                        Attribute { name: "email".into(), ty: AttrType::String },
                    ],
                    superclass: None,
                },
                ClassDef {
                    name: "Student".into(),
                    attributes: vec![Attribute { name: "age".into(), ty: AttrType::Int }],
                    superclass: None,
                },
            ],
            associations: vec![AssociationDef {
                name: "Enrolment".into(),
                end1: AssociationEnd { name: "lecturers".into(), class: "Lecturer".into() },
                end2: AssociationEnd { name: "students".into(), class: "Student".into() },
            }],
        }
    }

    #[test]
    fn schema_has_one_table_per_class_and_association() {
        let ddl = university().sql_schema().unwrap().to_string();
        assert!(ddl.contains("CREATE TABLE Lecturer (\n  Lecturer_id varchar(250) NOT NULL,\n  age int,\n  email varchar(250),"));
        assert!(ddl.contains("CREATE TABLE Enrolment (\n  lecturers varchar(250) NOT NULL,"));
        assert!(ddl.contains("FOREIGN KEY (students) REFERENCES Student(Student_id)"));
    }

    #[test]
    fn navigation_resolves_both_directions() {
        let dm = university();
        let n = dm.navigate("Lecturer", "students").unwrap();
        assert_eq!(n.target_class, "Student");
        assert_eq!(n.target_pos, EndPos::Second);
        let n = dm.navigate("Student", "lecturers").unwrap();
        assert_eq!(n.target_pos, EndPos::First);
        assert!(dm.navigate("Student", "students").is_none());
    }

    #[test]
    fn generalisation_and_reserved_names_are_rejected() {
        let mut dm = university();
        dm.classes[1].superclass = Some("Lecturer".into());
        dm.classes[0].attributes.push(Attribute { name: "caller".into(), ty: AttrType::Int });
        let r = dm.validate();
        assert_eq!(r.violations.len(), 2, "{r}");
    }

    #[test]
    fn scenario_validation_reports_bad_links_and_types() {
        let dm = university();
        let mut sc = Scenario::default();
        sc.add_object("Lecturer", "Huong", &[("age", Value::Str("old".into()))]);
        sc.add_object("Student", "Thanh", &[]);
        sc.links.insert(
            "Enrolment".into(),
            vec![("Thanh".into(), "Huong".into()), ("Huong".into(), "Thanh".into())],
        );
        let r = sc.validate(&dm);
        let elements: Vec<_> = r.violations.iter().map(|v| v.element.as_str()).collect();
        assert_eq!(
            elements,
            ["Huong.age", "Enrolment(Thanh, Huong)", "Enrolment(Thanh, Huong)"]
        );
    }

    #[test]
    fn inserts_quote_strings_and_nulls() {
        let dm = university();
        let mut sc = Scenario::default();
        sc.add_object("Lecturer", "O'Neil", &[("age", Value::Int(40))]);
        let ins = sc.to_inserts(&dm).unwrap();
        assert_eq!(
            ins.statements,
            ["INSERT INTO Lecturer (Lecturer_id, age, email) VALUES ('O''Neil', 40, NULL);"]
        );
    }

    #[test]
    fn scenario_json_uses_plain_values() {
        let dm = university();
        let text = r#"{"objects": {"Lecturer": {"Huong": {"age": 40, "email": null}}},
                       "links": {"Enrolment": []}}"#;
        let sc = Scenario::from_json(text, &dm).unwrap();
        assert_eq!(sc.attribute_value(&ObjectRef::new("Huong", "Lecturer"), "age"), Value::Int(40));
        assert_eq!(sc.attribute_value(&ObjectRef::new("Huong", "Lecturer"), "email"), Value::Null);
    }
}
