use std::fmt;

use super::{CmpOp, IterKind, Keywords, OclError, OclExpr};
use crate::model::{AttrType, DataModel, Scenario};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OclType {
    Bool,
    Int,
    String,
    Object(String),
    Collection(String),
    /// Type of the `null` literal; only comparable with `=` and `<>`.
    Null,
}

impl fmt::Display for OclType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OclType::Bool => f.write_str("Boolean"),
            OclType::Int => f.write_str("Integer"),
            OclType::String => f.write_str("String"),
            OclType::Object(c) => f.write_str(c),
            OclType::Collection(c) => write!(f, "Set({c})"),
            OclType::Null => f.write_str("null"),
        }
    }
}

impl From<AttrType> for OclType {
    fn from(t: AttrType) -> OclType {
        match t {
            AttrType::Int => OclType::Int,
            AttrType::String => OclType::String,
        }
    }
}

pub(crate) struct Checker<'a> {
    pub dm: &'a DataModel,
    pub keywords: &'a Keywords,
    pub scenario: Option<&'a Scenario>,
    pub vars: Vec<(String, String)>,
}

fn mismatch<T>(e: &OclExpr, expected: impl fmt::Display, found: impl fmt::Display) -> Result<T, OclError> {
    Err(OclError::Type {
        subexpr: e.to_string(),
        expected: expected.to_string(),
        found: found.to_string(),
    })
}

impl Checker<'_> {
    fn expect_bool(&mut self, e: &OclExpr) -> Result<(), OclError> {
        match self.check(e)? {
            OclType::Bool => Ok(()),
            t => mismatch(e, OclType::Bool, t),
        }
    }

    fn expect_collection(&mut self, e: &OclExpr) -> Result<String, OclError> {
        match self.check(e)? {
            OclType::Collection(c) => Ok(c),
            t => mismatch(e, "a collection", t),
        }
    }

    pub fn check(&mut self, e: &OclExpr) -> Result<OclType, OclError> {
        Ok(match e {
            OclExpr::Keyword(k) => match self.keywords.class_of(k) {
                Some(c) => OclType::Object(c.to_string()),
                None => return Err(OclError::UnboundKeyword(k.clone())),
            },
            OclExpr::Var(v) => match self.vars.iter().rev().find(|(n, _)| n == v) {
                Some((_, c)) => OclType::Object(c.clone()),
                None => return Err(OclError::UnboundKeyword(v.clone())),
            },
            OclExpr::Object(id) => match self.scenario.and_then(|s| s.class_of(id)) {
                Some(c) => OclType::Object(c.to_string()),
                None => return Err(OclError::UnknownObject(id.clone())),
            },
            OclExpr::Int(_) => OclType::Int,
            OclExpr::Str(_) => OclType::String,
            OclExpr::Bool(_) => OclType::Bool,
            OclExpr::Null => OclType::Null,
            OclExpr::Nav(src, name) => {
                let class = match self.check(src)? {
                    OclType::Object(c) => c,
                    t => return mismatch(src, "an object", t),
                };
                if let Some(a) = self.dm.attribute(&class, name) {
                    a.ty.into()
                } else if let Some(n) = self.dm.navigate(&class, name) {
                    OclType::Collection(n.target_class.to_string())
                } else {
                    return mismatch(e, format!("an attribute or association end of {class}"), name);
                }
            }
            OclExpr::AllInstances(c) => {
                if self.dm.class(c).is_none() {
                    return mismatch(e, "a class name", c);
                }
                OclType::Collection(c.clone())
            }
            OclExpr::Iter {
                kind,
                source,
                var,
                body,
            } => {
                let class = self.expect_collection(source)?;
                if self.keywords.class_of(var).is_some() || self.vars.iter().any(|(n, _)| n == var) {
                    return mismatch(e, "a fresh iterator name", var);
                }
                self.vars.push((var.clone(), class.clone()));
                let r = self.expect_bool(body);
                self.vars.pop();
                r?;
                match kind {
                    IterKind::Select => OclType::Collection(class),
                    IterKind::Exists | IterKind::ForAll => OclType::Bool,
                }
            }
            OclExpr::Includes(src, elem) => {
                let class = self.expect_collection(src)?;
                match self.check(elem)? {
                    OclType::Object(c) if c == class => OclType::Bool,
                    t => return mismatch(elem, OclType::Object(class), t),
                }
            }
            OclExpr::IsEmpty(src) => {
                self.expect_collection(src)?;
                OclType::Bool
            }
            OclExpr::Compare(op, a, b) => {
                let ta = self.check(a)?;
                let tb = self.check(b)?;
                if op.is_ordering() {
                    if ta != OclType::Int {
                        return mismatch(a, OclType::Int, ta);
                    }
                    if tb != OclType::Int {
                        return mismatch(b, OclType::Int, tb);
                    }
                } else {
                    let scalar = |t: &OclType| {
                        matches!(t, OclType::Int | OclType::String | OclType::Object(_) | OclType::Null)
                    };
                    if !scalar(&ta) {
                        return mismatch(a, "a comparable value", ta);
                    }
                    if !(ta == tb || ta == OclType::Null || tb == OclType::Null) {
                        return mismatch(b, ta, tb);
                    }
                    debug_assert!(matches!(op, CmpOp::Eq | CmpOp::Ne));
                }
                OclType::Bool
            }
            OclExpr::And(a, b) | OclExpr::Or(a, b) => {
                self.expect_bool(a)?;
                self.expect_bool(b)?;
                OclType::Bool
            }
            OclExpr::Not(a) => {
                self.expect_bool(a)?;
                OclType::Bool
            }
        })
    }
}

/// Type of `e` under `keywords`; object literals are resolved in `scenario`.
pub fn type_of(
    dm: &DataModel,
    keywords: &Keywords,
    scenario: Option<&Scenario>,
    e: &OclExpr,
) -> Result<OclType, OclError> {
    Checker {
        dm,
        keywords,
        scenario,
        vars: Vec::new(),
    }
    .check(e)
}

pub(crate) fn check_constraint(dm: &DataModel, keywords: &Keywords, e: &OclExpr) -> Result<(), OclError> {
    match type_of(dm, keywords, None, e)? {
        OclType::Bool => Ok(()),
        t => mismatch(e, OclType::Bool, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::university;
    use crate::ocl::{parse_ocl, KeywordRole};

    fn kw() -> Keywords {
        Keywords::new()
            .with("caller", "Lecturer", KeywordRole::Caller)
            .with("self", "Student", KeywordRole::SelfObject)
    }

    #[test]
    fn accepts_case_study_constraints() {
        let dm = university();
        parse_ocl("Lecturer.allInstances()->select(l | l.age > caller.age)->isEmpty()", &dm, &kw()).unwrap();
        parse_ocl("caller.students->exists(s | s = self)", &dm, &kw()).unwrap();
        parse_ocl("caller.students->includes(self) and self.email <> null", &dm, &kw()).unwrap();
    }

    #[test]
    fn rejects_ill_typed_constraints() {
        let dm = university();
        for bad in [
            "caller.age",
            "caller.students",
            "caller.name > 3",
            "caller = self.age",
            "caller.lecturers->isEmpty()",
            "self.students->includes(caller)",
            "caller.students->exists(self | true)",
            "null < 3",
        ] {
            assert!(
                matches!(parse_ocl(bad, &dm, &kw()), Err(OclError::Type { .. })),
                "{bad}"
            );
        }
        assert_eq!(
            parse_ocl("other.age > 3", &dm, &kw()),
            Err(OclError::UnboundKeyword("other".into()))
        );
    }
}
