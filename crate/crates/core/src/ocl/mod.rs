//! The OCL subset used for authorization constraints.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr     := and ("or" and)*
//! and      := unary ("and" unary)*
//! unary    := "not" unary | compare
//! compare  := postfix (("=" | "<>" | "<" | "<=" | ">" | ">=") postfix)?
//! postfix  := primary ("." ident | "." ident "(" ")" | arrow op)*
//! arrow    := "->" | "→"
//! op       := ("select" | "exists" | "forAll") "(" ident "|" expr ")"
//!           | "includes" "(" expr ")" | "isEmpty" "(" ")"
//! primary  := int | string | "true" | "false" | "null" | ident
//!           | "<" ident ">" | "(" expr ")"
//! ```
//!
//! `C.allInstances()` denotes the instances of class `C`; `<id>` is an object
//! literal (used by ground constraints); a bare identifier is an iterator
//! variable when bound, otherwise a keyword such as `caller` or `self`.

mod eval;
mod parser;
mod typing;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use eval::{eval_ocl, OclValue};
pub use parser::{parse_ocl, parse_ocl_syntax};
pub use typing::{type_of, OclType};

use crate::model::ObjectRef;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OclError {
    #[error("syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("type error in `{subexpr}`: expected {expected}, found {found}")]
    Type {
        subexpr: String,
        expected: String,
        found: String,
    },
    #[error("unbound keyword `{0}`")]
    UnboundKeyword(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IterKind {
    Select,
    Exists,
    ForAll,
}

impl IterKind {
    pub fn name(self) -> &'static str {
        match self {
            IterKind::Select => "select",
            IterKind::Exists => "exists",
            IterKind::ForAll => "forAll",
        }
    }
}

/// Untyped syntax tree; typing resolves navigations against a data model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OclExpr {
    Keyword(String),
    Var(String),
    Object(String),
    Int(i64),
    Str(String),
    Bool(bool),
    Null,
    /// `source.name`: an attribute read or an association-end navigation.
    Nav(Box<OclExpr>, String),
    AllInstances(String),
    Iter {
        kind: IterKind,
        source: Box<OclExpr>,
        var: String,
        body: Box<OclExpr>,
    },
    Includes(Box<OclExpr>, Box<OclExpr>),
    IsEmpty(Box<OclExpr>),
    Compare(CmpOp, Box<OclExpr>, Box<OclExpr>),
    And(Box<OclExpr>, Box<OclExpr>),
    Or(Box<OclExpr>, Box<OclExpr>),
    Not(Box<OclExpr>),
}

/// Keyword name to class name, in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Keywords {
    entries: Vec<(String, String, KeywordRole)>,
}

/// How a keyword was introduced by the resource being protected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeywordRole {
    Caller,
    SelfObject,
    AssociationEnd,
}

impl Keywords {
    pub fn new() -> Keywords {
        Keywords::default()
    }

    pub fn with(mut self, name: &str, class: &str, role: KeywordRole) -> Keywords {
        self.insert(name, class, role);
        self
    }

    pub fn insert(&mut self, name: &str, class: &str, role: KeywordRole) {
        self.entries.retain(|(n, _, _)| n != name);
        self.entries.push((name.to_string(), class.to_string(), role));
    }

    pub fn class_of(&self, name: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, c, _)| c.as_str())
    }

    pub fn role_of(&self, name: &str) -> Option<KeywordRole> {
        self.entries
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, _, r)| *r)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(n, c, _)| (n.as_str(), c.as_str()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _, _)| n.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Keyword bindings used by evaluation.
pub type Binding = BTreeMap<String, ObjectRef>;

impl OclExpr {
    pub fn nav(src: OclExpr, name: &str) -> OclExpr {
        OclExpr::Nav(Box::new(src), name.to_string())
    }

    pub fn compare(op: CmpOp, a: OclExpr, b: OclExpr) -> OclExpr {
        OclExpr::Compare(op, Box::new(a), Box::new(b))
    }

    pub fn and(a: OclExpr, b: OclExpr) -> OclExpr {
        OclExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: OclExpr, b: OclExpr) -> OclExpr {
        OclExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn negate(a: OclExpr) -> OclExpr {
        OclExpr::Not(Box::new(a))
    }

    pub fn iter(kind: IterKind, source: OclExpr, var: &str, body: OclExpr) -> OclExpr {
        OclExpr::Iter {
            kind,
            source: Box::new(source),
            var: var.to_string(),
            body: Box::new(body),
        }
    }

    /// Keywords occurring in the expression, sorted and deduplicated.
    pub fn keywords(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let OclExpr::Keyword(k) = e {
                out.push(k.clone());
            }
        });
        out.sort();
        out.dedup();
        out
    }

    pub(crate) fn visit(&self, f: &mut impl FnMut(&OclExpr)) {
        f(self);
        match self {
            OclExpr::Nav(s, _) | OclExpr::IsEmpty(s) | OclExpr::Not(s) => s.visit(f),
            OclExpr::Iter { source, body, .. } => {
                source.visit(f);
                body.visit(f);
            }
            OclExpr::Includes(a, b)
            | OclExpr::Compare(_, a, b)
            | OclExpr::And(a, b)
            | OclExpr::Or(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Replaces keywords by object literals; used to build ground constraints.
    pub fn substitute(&self, binding: &Binding) -> OclExpr {
        self.map_leaves(&|e| match e {
            OclExpr::Keyword(k) => binding.get(k).map(|o| OclExpr::Object(o.id.clone())),
            _ => None,
        })
    }

    fn map_leaves(&self, f: &impl Fn(&OclExpr) -> Option<OclExpr>) -> OclExpr {
        if let Some(r) = f(self) {
            return r;
        }
        let b = |e: &OclExpr| Box::new(e.map_leaves(f));
        match self {
            OclExpr::Nav(s, n) => OclExpr::Nav(b(s), n.clone()),
            OclExpr::Iter {
                kind,
                source,
                var,
                body,
            } => OclExpr::Iter {
                kind: *kind,
                source: b(source),
                var: var.clone(),
                body: b(body),
            },
            OclExpr::Includes(x, y) => OclExpr::Includes(b(x), b(y)),
            OclExpr::IsEmpty(x) => OclExpr::IsEmpty(b(x)),
            OclExpr::Compare(op, x, y) => OclExpr::Compare(*op, b(x), b(y)),
            OclExpr::And(x, y) => OclExpr::And(b(x), b(y)),
            OclExpr::Or(x, y) => OclExpr::Or(b(x), b(y)),
            OclExpr::Not(x) => OclExpr::Not(b(x)),
            leaf => leaf.clone(),
        }
    }

    /// Iterator variables renamed to `_v0`, `_v1`, ... in binding order, so
    /// that alpha-equivalent constraints compare equal.
    pub fn alpha_normalized(&self) -> OclExpr {
        fn go(e: &OclExpr, scope: &mut Vec<(String, String)>, next: &mut usize) -> OclExpr {
            let b = |e: &OclExpr, scope: &mut Vec<(String, String)>, next: &mut usize| {
                Box::new(go(e, scope, next))
            };
            match e {
                OclExpr::Var(v) => {
                    let renamed = scope
                        .iter()
                        .rev()
                        .find(|(old, _)| old == v)
                        .map(|(_, new)| new.clone())
                        .unwrap_or_else(|| v.clone());
                    OclExpr::Var(renamed)
                }
                OclExpr::Iter {
                    kind,
                    source,
                    var,
                    body,
                } => {
                    let source = b(source, scope, next);
                    let fresh = format!("_v{next}");
                    *next += 1;
                    scope.push((var.clone(), fresh.clone()));
                    let body = b(body, scope, next);
                    scope.pop();
                    OclExpr::Iter {
                        kind: *kind,
                        source,
                        var: fresh,
                        body,
                    }
                }
                OclExpr::Nav(s, n) => OclExpr::Nav(b(s, scope, next), n.clone()),
                OclExpr::Includes(x, y) => {
                    let x = b(x, scope, next);
                    OclExpr::Includes(x, b(y, scope, next))
                }
                OclExpr::IsEmpty(x) => OclExpr::IsEmpty(b(x, scope, next)),
                OclExpr::Compare(op, x, y) => {
                    let x = b(x, scope, next);
                    OclExpr::Compare(*op, x, b(y, scope, next))
                }
                OclExpr::And(x, y) => {
                    let x = b(x, scope, next);
                    OclExpr::And(x, b(y, scope, next))
                }
                OclExpr::Or(x, y) => {
                    let x = b(x, scope, next);
                    OclExpr::Or(x, b(y, scope, next))
                }
                OclExpr::Not(x) => OclExpr::Not(b(x, scope, next)),
                leaf => leaf.clone(),
            }
        }
        go(self, &mut Vec::new(), &mut 0)
    }

    fn precedence(&self) -> u8 {
        match self {
            OclExpr::Or(..) => 1,
            OclExpr::And(..) => 2,
            OclExpr::Not(..) => 3,
            OclExpr::Compare(..) => 4,
            _ => 5,
        }
    }
}

/// Renders in the concrete syntax accepted by [`parse_ocl_syntax`].
pub fn render_ocl(e: &OclExpr) -> String {
    e.to_string()
}

fn quote_str(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

impl fmt::Display for OclExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `min` is the precedence a child needs to be printed without parens
        let child = |f: &mut fmt::Formatter<'_>, e: &OclExpr, min: u8| {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            OclExpr::Keyword(k) | OclExpr::Var(k) => f.write_str(k),
            OclExpr::Object(id) => write!(f, "<{id}>"),
            OclExpr::Int(i) => write!(f, "{i}"),
            OclExpr::Str(s) => f.write_str(&quote_str(s)),
            OclExpr::Bool(b) => write!(f, "{b}"),
            OclExpr::Null => f.write_str("null"),
            OclExpr::Nav(s, n) => {
                child(f, s, 5)?;
                write!(f, ".{n}")
            }
            OclExpr::AllInstances(c) => write!(f, "{c}.allInstances()"),
            OclExpr::Iter {
                kind,
                source,
                var,
                body,
            } => {
                child(f, source, 5)?;
                write!(f, "->{}({var} | {body})", kind.name())
            }
            OclExpr::Includes(s, e) => {
                child(f, s, 5)?;
                write!(f, "->includes({e})")
            }
            OclExpr::IsEmpty(s) => {
                child(f, s, 5)?;
                f.write_str("->isEmpty()")
            }
            OclExpr::Compare(op, a, b) => {
                child(f, a, 5)?;
                write!(f, " {} ", op.symbol())?;
                child(f, b, 5)
            }
            OclExpr::And(a, b) => {
                child(f, a, 2)?;
                f.write_str(" and ")?;
                child(f, b, 3)
            }
            OclExpr::Or(a, b) => {
                child(f, a, 1)?;
                f.write_str(" or ")?;
                child(f, b, 2)
            }
            OclExpr::Not(a) => {
                f.write_str("not ")?;
                child(f, a, 3)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_normalization_identifies_renamed_iterators() {
        let a = parse_ocl_syntax("caller.students->exists(s | s = self)").unwrap();
        let b = parse_ocl_syntax("caller.students->exists(t|t = self)").unwrap();
        assert_ne!(a, b);
        assert_eq!(a.alpha_normalized(), b.alpha_normalized());
    }

    #[test]
    fn substitution_replaces_keywords_only() {
        let e = parse_ocl_syntax("caller.students->exists(caller2 | caller2 = self)").unwrap();
        let mut b = Binding::new();
        b.insert("caller".into(), ObjectRef::new("Huong", "Lecturer"));
        b.insert("self".into(), ObjectRef::new("Thanh", "Student"));
        assert_eq!(
            e.substitute(&b).to_string(),
            "<Huong>.students->exists(caller2 | caller2 = <Thanh>)"
        );
    }

    #[test]
    fn rendering_parenthesizes_by_precedence() {
        for text in [
            "(a or b) and c",
            "not (a and b)",
            "a and b or c",
            "(a = b) = c",
            "not not a",
            "a or (b or c)",
        ] {
            let e = parse_ocl_syntax(text).unwrap();
            assert_eq!(parse_ocl_syntax(&e.to_string()).unwrap(), e, "{text} -> {e}");
        }
        assert_eq!(parse_ocl_syntax("a and b or c").unwrap().to_string(), "a and b or c");
    }
}
