//! Reference evaluator with OCL's null/invalid semantics.
//!
//! Boolean connectives are four-valued: `and` is false as soon as one side is
//! false, otherwise invalid if a side is invalid, otherwise null if a side is
//! null; `or` is dual. `select` keeps exactly the elements whose body
//! evaluates to true.

use std::fmt;

use super::{Binding, CmpOp, IterKind, OclError, OclExpr};
use crate::model::{DataModel, ObjectRef, Scenario, Value};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OclValue {
    Object(ObjectRef),
    Int(i64),
    Str(String),
    Bool(bool),
    Null,
    Invalid,
    /// Objects ordered by id, without duplicates.
    Collection(Vec<ObjectRef>),
}

impl OclValue {
    pub fn is_true(&self) -> bool {
        *self == OclValue::Bool(true)
    }
}

impl fmt::Display for OclValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OclValue::Object(o) => write!(f, "<{}>", o.id),
            OclValue::Int(i) => write!(f, "{i}"),
            OclValue::Str(s) => write!(f, "'{s}'"),
            OclValue::Bool(b) => write!(f, "{b}"),
            OclValue::Null => f.write_str("null"),
            OclValue::Invalid => f.write_str("invalid"),
            OclValue::Collection(items) => {
                f.write_str("Set{")?;
                for (i, o) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "<{}>", o.id)?;
                }
                f.write_str("}")
            }
        }
    }
}

fn and(a: OclValue, b: OclValue) -> OclValue {
    use OclValue::*;
    match (a, b) {
        (Bool(false), _) | (_, Bool(false)) => Bool(false),
        (Invalid, _) | (_, Invalid) => Invalid,
        (Null, _) | (_, Null) => Null,
        (Bool(true), Bool(true)) => Bool(true),
        _ => Invalid,
    }
}

fn or(a: OclValue, b: OclValue) -> OclValue {
    use OclValue::*;
    match (a, b) {
        (Bool(true), _) | (_, Bool(true)) => Bool(true),
        (Invalid, _) | (_, Invalid) => Invalid,
        (Null, _) | (_, Null) => Null,
        (Bool(false), Bool(false)) => Bool(false),
        _ => Invalid,
    }
}

fn not(a: OclValue) -> OclValue {
    match a {
        OclValue::Bool(b) => OclValue::Bool(!b),
        OclValue::Null => OclValue::Null,
        _ => OclValue::Invalid,
    }
}

fn compare(op: CmpOp, a: OclValue, b: OclValue) -> OclValue {
    use OclValue::*;
    if a == Invalid || b == Invalid {
        return Invalid;
    }
    match op {
        CmpOp::Eq | CmpOp::Ne => {
            let eq = match (&a, &b) {
                (Null, Null) => true,
                (Null, _) | (_, Null) => false,
                _ => a == b,
            };
            Bool(if op == CmpOp::Eq { eq } else { !eq })
        }
        _ => match (a, b) {
            (Int(x), Int(y)) => Bool(match op {
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                _ => x >= y,
            }),
            _ => Invalid,
        },
    }
}

struct Evaluator<'a> {
    dm: &'a DataModel,
    sc: &'a Scenario,
    binding: &'a Binding,
    vars: Vec<(String, ObjectRef)>,
}

impl Evaluator<'_> {
    fn eval(&mut self, e: &OclExpr) -> Result<OclValue, OclError> {
        Ok(match e {
            OclExpr::Keyword(k) => match self.binding.get(k) {
                Some(o) => OclValue::Object(o.clone()),
                None => return Err(OclError::UnboundKeyword(k.clone())),
            },
            OclExpr::Var(v) => match self.vars.iter().rev().find(|(n, _)| n == v) {
                Some((_, o)) => OclValue::Object(o.clone()),
                None => return Err(OclError::UnboundKeyword(v.clone())),
            },
            OclExpr::Object(id) => match self.sc.object(id) {
                Some(o) => OclValue::Object(o),
                None => return Err(OclError::UnknownObject(id.clone())),
            },
            OclExpr::Int(i) => OclValue::Int(*i),
            OclExpr::Str(s) => OclValue::Str(s.clone()),
            OclExpr::Bool(b) => OclValue::Bool(*b),
            OclExpr::Null => OclValue::Null,
            OclExpr::Nav(src, name) => match self.eval(src)? {
                OclValue::Object(o) => self.navigate(&o, name),
                _ => OclValue::Invalid,
            },
            OclExpr::AllInstances(c) => OclValue::Collection(self.sc.instances(c)),
            OclExpr::Iter {
                kind,
                source,
                var,
                body,
            } => {
                let items = match self.eval(source)? {
                    OclValue::Collection(items) => items,
                    _ => return Ok(OclValue::Invalid),
                };
                let mut results = Vec::with_capacity(items.len());
                for item in &items {
                    self.vars.push((var.clone(), item.clone()));
                    let r = self.eval(body);
                    self.vars.pop();
                    results.push(r?);
                }
                match kind {
                    IterKind::Select => OclValue::Collection(
                        items
                            .into_iter()
                            .zip(&results)
                            .filter(|(_, r)| r.is_true())
                            .map(|(o, _)| o)
                            .collect(),
                    ),
                    IterKind::Exists => results.into_iter().fold(OclValue::Bool(false), or),
                    IterKind::ForAll => results.into_iter().fold(OclValue::Bool(true), and),
                }
            }
            OclExpr::Includes(src, elem) => {
                let items = self.eval(src)?;
                let elem = self.eval(elem)?;
                match (items, elem) {
                    (OclValue::Collection(_), OclValue::Invalid) => OclValue::Invalid,
                    (OclValue::Collection(items), OclValue::Object(o)) => {
                        OclValue::Bool(items.contains(&o))
                    }
                    (OclValue::Collection(_), _) => OclValue::Bool(false),
                    _ => OclValue::Invalid,
                }
            }
            OclExpr::IsEmpty(src) => match self.eval(src)? {
                OclValue::Collection(items) => OclValue::Bool(items.is_empty()),
                _ => OclValue::Invalid,
            },
            OclExpr::Compare(op, a, b) => {
                let a = self.eval(a)?;
                let b = self.eval(b)?;
                compare(*op, a, b)
            }
            OclExpr::And(a, b) => {
                let a = self.eval(a)?;
                and(a, self.eval(b)?)
            }
            OclExpr::Or(a, b) => {
                let a = self.eval(a)?;
                or(a, self.eval(b)?)
            }
            OclExpr::Not(a) => not(self.eval(a)?),
        })
    }

    fn navigate(&self, o: &ObjectRef, name: &str) -> OclValue {
        if self.dm.attribute(&o.class, name).is_some() {
            return match self.sc.attribute_value(o, name) {
                Value::Null => OclValue::Null,
                Value::Int(i) => OclValue::Int(i),
                Value::Str(s) => OclValue::Str(s),
            };
        }
        match self.dm.navigate(&o.class, name) {
            Some(n) => OclValue::Collection(
                self.sc
                    .navigate_ids(&n.association.name, &o.id, n.target_pos)
                    .into_iter()
                    .map(|id| ObjectRef::new(id, n.target_class))
                    .collect(),
            ),
            None => OclValue::Invalid,
        }
    }
}

/// Evaluates `e` in `sc` with keywords bound by `binding`.
///
/// Errors only for unbound keywords or unknown object literals; every other
/// irregularity is reported in-band as `null` or `invalid`.
pub fn eval_ocl(
    dm: &DataModel,
    sc: &Scenario,
    e: &OclExpr,
    binding: &Binding,
) -> Result<OclValue, OclError> {
    Evaluator {
        dm,
        sc,
        binding,
        vars: Vec::new(),
    }
    .eval(e)
}
