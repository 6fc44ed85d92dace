//! Constraint translation.
//!
//! Every term carries optional "is null" and "is invalid" formulas; they are
//! absent for literals, which are always defined. A collection is described
//! by a membership predicate and a formula saying the collection itself is
//! undefined (its source object is null or invalid).

use std::collections::BTreeSet;

use super::sexp::{app, atom, Sexp};
use super::theory::{attr_fun, int_literal, null_of, object_constant, sort_of, string_literal};
use super::MsfolError;
use crate::model::{DataModel, EndPos, Scenario};
use crate::ocl::{CmpOp, IterKind, KeywordRole, Keywords, OclExpr};

struct Term {
    t: Sexp,
    null: Option<Sexp>,
    inval: Option<Sexp>,
}

impl Term {
    fn undefs(&self) -> impl Iterator<Item = Sexp> + '_ {
        self.null.iter().chain(self.inval.iter()).cloned()
    }
}

enum Member {
    Class(String),
    /// Association atom with one end fixed to a term.
    Link { assoc: String, fixed: Sexp, fixed_first: bool },
    /// A `select` result: `TEMPk` applied to the element and the enclosing
    /// iterator variables it mentions.
    Temp { name: String, args: Vec<Sexp> },
}

struct Coll {
    member: Member,
    undef: Sexp,
    class: String,
}

impl Coll {
    fn member(&self, x: Sexp) -> Sexp {
        match &self.member {
            Member::Class(c) => app(c, [x]),
            Member::Link {
                assoc,
                fixed,
                fixed_first: true,
            } => app(assoc, [fixed.clone(), x]),
            Member::Link { assoc, fixed, .. } => app(assoc, [x, fixed.clone()]),
            Member::Temp { name, args } => {
                let mut all = vec![x];
                all.extend(args.iter().cloned());
                app(name, all)
            }
        }
    }
}

/// Translates constraints over one set of keywords. The `TEMPk` counter is
/// shared by all constraints translated with the same instance.
pub struct Translator<'a> {
    dm: &'a DataModel,
    keywords: &'a Keywords,
    scenario: Option<&'a Scenario>,
    vars: Vec<(String, String)>,
    next_temp: usize,
    defs: Vec<Sexp>,
}

fn unsupported<T>(e: &OclExpr, reason: &str) -> Result<T, MsfolError> {
    Err(MsfolError::Unsupported {
        subexpr: e.to_string(),
        reason: reason.to_string(),
    })
}

fn mentions_var(e: &OclExpr, v: &str) -> bool {
    let mut found = false;
    e.visit(&mut |x| {
        if matches!(x, OclExpr::Var(n) if n == v) {
            found = true;
        }
    });
    found
}

impl<'a> Translator<'a> {
    pub fn new(dm: &'a DataModel, keywords: &'a Keywords) -> Translator<'a> {
        Translator {
            dm,
            keywords,
            scenario: None,
            vars: Vec::new(),
            next_temp: 0,
            defs: Vec::new(),
        }
    }

    /// Object literals are resolved against `sc`.
    pub fn with_scenario(mut self, sc: &'a Scenario) -> Translator<'a> {
        self.scenario = Some(sc);
        self
    }

    pub fn map_true(&mut self, e: &OclExpr) -> Result<Sexp, MsfolError> {
        self.formula(e, true)
    }

    pub fn map_false(&mut self, e: &OclExpr) -> Result<Sexp, MsfolError> {
        self.formula(e, false)
    }

    /// `TEMPk` declarations and definitions produced since the last call.
    pub fn take_definitions(&mut self) -> Vec<Sexp> {
        std::mem::take(&mut self.defs)
    }

    fn fresh(&self, base: &str) -> String {
        let taken: BTreeSet<&str> = self
            .vars
            .iter()
            .map(|(v, _)| v.as_str())
            .chain(self.keywords.names())
            .chain(self.dm.classes.iter().map(|c| c.name.as_str()))
            .chain(self.dm.associations.iter().map(|a| a.name.as_str()))
            .collect();
        if !taken.contains(base) {
            return base.to_string();
        }
        (1..)
            .map(|i| format!("{base}{i}"))
            .find(|n| !taken.contains(n.as_str()))
            .expect("unbounded")
    }

    fn class_of(&self, e: &OclExpr) -> Result<String, MsfolError> {
        let found = match e {
            OclExpr::Keyword(k) => self.keywords.class_of(k).map(str::to_string),
            OclExpr::Var(v) => self.vars.iter().rev().find(|(n, _)| n == v).map(|(_, c)| c.clone()),
            OclExpr::Object(id) => match self.scenario.and_then(|s| s.class_of(id)) {
                Some(c) => Some(c.to_string()),
                None => return Err(MsfolError::UnknownObject(id.clone())),
            },
            _ => None,
        };
        match found {
            Some(c) => Ok(c),
            None => unsupported(e, "not an object expression"),
        }
    }

    fn object_term(&self, e: &OclExpr) -> Result<Term, MsfolError> {
        match e {
            OclExpr::Keyword(n) | OclExpr::Var(n) => {
                self.class_of(e)?;
                Ok(Term {
                    t: atom(n),
                    null: Some(Sexp::eq(atom(n), null_of("Classifier"))),
                    inval: Some(Sexp::eq(atom(n), atom("invalClassifier"))),
                })
            }
            OclExpr::Object(id) => Ok(Term {
                t: object_constant(id),
                null: None,
                inval: None,
            }),
            _ => unsupported(e, "not an object expression"),
        }
    }

    fn term(&self, e: &OclExpr) -> Result<Term, MsfolError> {
        match e {
            OclExpr::Int(i) => Ok(Term {
                t: int_literal(*i),
                null: None,
                inval: None,
            }),
            OclExpr::Str(s) => Ok(Term {
                t: string_literal(s),
                null: None,
                inval: None,
            }),
            OclExpr::Nav(src, attr) => {
                let class = self.class_of(src)?;
                let Some(a) = self.dm.attribute(&class, attr) else {
                    return unsupported(e, "not an attribute");
                };
                let o = self.object_term(src)?;
                let t = app(&attr_fun(&class, attr), [o.t.clone()]);
                let undef: Vec<Sexp> = o.undefs().collect();
                Ok(Term {
                    null: Some(Sexp::eq(t.clone(), null_of(sort_of(a.ty)))),
                    inval: (!undef.is_empty()).then(|| Sexp::or(undef)),
                    t,
                })
            }
            _ => self.object_term(e),
        }
    }

    fn collection(&mut self, e: &OclExpr) -> Result<Coll, MsfolError> {
        match e {
            OclExpr::AllInstances(c) => Ok(Coll {
                member: Member::Class(c.clone()),
                undef: atom("false"),
                class: c.clone(),
            }),
            OclExpr::Nav(src, end) => {
                let class = self.class_of(src)?;
                let Some(nav) = self.dm.navigate(&class, end) else {
                    return unsupported(e, "not an association end");
                };
                let o = self.object_term(src)?;
                Ok(Coll {
                    member: Member::Link {
                        assoc: nav.association.name.clone(),
                        fixed: o.t.clone(),
                        fixed_first: nav.target_pos == EndPos::Second,
                    },
                    undef: Sexp::or(o.undefs().collect()),
                    class: nav.target_class.to_string(),
                })
            }
            OclExpr::Iter {
                kind: IterKind::Select,
                source,
                var,
                body,
            } => {
                let src = self.collection(source)?;
                let outer: Vec<String> = self
                    .vars
                    .iter()
                    .map(|(v, _)| v.clone())
                    .filter(|v| mentions_var(e, v))
                    .collect();
                self.vars.push((var.clone(), src.class.clone()));
                let b = self.formula(body, true);
                self.vars.pop();
                let b = b?;
                let name = format!("TEMP{}", self.next_temp);
                self.next_temp += 1;
                let mut params: Vec<&str> = vec![var];
                params.extend(outer.iter().map(String::as_str));
                self.defs.push(app(
                    "declare-fun",
                    [
                        atom(&name),
                        Sexp::List(params.iter().map(|_| atom("Classifier")).collect()),
                        atom("Bool"),
                    ],
                ));
                let applied = app(&name, params.iter().map(|p| atom(*p)));
                self.defs.push(app(
                    "assert",
                    [Sexp::quantified(
                        "forall",
                        &params,
                        Sexp::eq(applied, Sexp::and(vec![src.member(atom(var)), b])),
                    )],
                ));
                Ok(Coll {
                    member: Member::Temp {
                        name,
                        args: outer.iter().map(atom).collect(),
                    },
                    undef: src.undef,
                    class: src.class,
                })
            }
            _ => unsupported(e, "not a collection expression"),
        }
    }

    fn formula(&mut self, e: &OclExpr, pos: bool) -> Result<Sexp, MsfolError> {
        match e {
            OclExpr::Bool(b) => Ok(atom(if *b == pos { "true" } else { "false" })),
            OclExpr::And(a, b) | OclExpr::Or(a, b) => {
                let parts = vec![self.formula(a, pos)?, self.formula(b, pos)?];
                let conj = matches!(e, OclExpr::And(..)) == pos;
                Ok(if conj { app("and", parts) } else { app("or", parts) })
            }
            OclExpr::Not(a) => self.formula(a, !pos),
            OclExpr::Compare(CmpOp::Ne, a, b) => self.equality(a, b, !pos),
            OclExpr::Compare(CmpOp::Eq, a, b) => self.equality(a, b, pos),
            OclExpr::Compare(op, a, b) => {
                let x = self.term(a)?;
                let y = self.term(b)?;
                let cmp = app(op.symbol(), [x.t.clone(), y.t.clone()]);
                let cmp = if pos { cmp } else { Sexp::not(cmp) };
                let undef: Vec<Sexp> = x.undefs().chain(y.undefs()).collect();
                if undef.is_empty() {
                    return Ok(cmp);
                }
                Ok(Sexp::and(vec![cmp, Sexp::not(Sexp::or(undef))]))
            }
            OclExpr::IsEmpty(src) => {
                let c = self.collection(src)?;
                let x = self.fresh("x");
                let m = c.member(atom(&x));
                Ok(if pos {
                    Sexp::quantified("forall", &[&x], Sexp::and(vec![Sexp::not(m), Sexp::not(c.undef)]))
                } else {
                    Sexp::and(vec![Sexp::quantified("exists", &[&x], m), Sexp::not(c.undef)])
                })
            }
            OclExpr::Includes(src, elem) => self.includes(src, elem, pos),
            OclExpr::Iter {
                kind: IterKind::Exists,
                source,
                var,
                body,
            } => {
                if let Some(elem) = membership_test(var, body) {
                    return self.includes(source, elem, pos);
                }
                self.quantifier(IterKind::Exists, source, var, body, pos)
            }
            OclExpr::Iter {
                kind: IterKind::ForAll,
                source,
                var,
                body,
            } => self.quantifier(IterKind::ForAll, source, var, body, pos),
            _ => unsupported(e, "not a Boolean expression"),
        }
    }

    fn equality(&mut self, a: &OclExpr, b: &OclExpr, pos: bool) -> Result<Sexp, MsfolError> {
        if *a == OclExpr::Null || *b == OclExpr::Null {
            let other = if *a == OclExpr::Null { b } else { a };
            if *other == OclExpr::Null {
                return Ok(atom(if pos { "true" } else { "false" }));
            }
            let x = self.term(other)?;
            return Ok(if pos {
                x.null.unwrap_or_else(|| atom("false"))
            } else {
                Sexp::and(x.undefs().map(Sexp::not).collect())
            });
        }
        let x = self.term(a)?;
        let y = self.term(b)?;
        let eq = Sexp::eq(x.t.clone(), y.t.clone());
        if pos {
            let undef: Vec<Sexp> = x.undefs().chain(y.undefs()).collect();
            let defined_eq = if undef.is_empty() {
                eq
            } else {
                Sexp::and(vec![eq, Sexp::not(Sexp::or(undef))])
            };
            let mut alts = Vec::new();
            if let (Some(nx), Some(ny)) = (&x.null, &y.null) {
                alts.push(Sexp::and(vec![nx.clone(), ny.clone()]));
            }
            alts.push(defined_eq);
            Ok(Sexp::or(alts))
        } else {
            let inval: Vec<Sexp> = x.inval.iter().chain(y.inval.iter()).cloned().collect();
            let mut parts = vec![Sexp::not(eq)];
            if !inval.is_empty() {
                parts.push(Sexp::not(Sexp::or(inval)));
            }
            Ok(Sexp::and(parts))
        }
    }

    fn includes(&mut self, src: &OclExpr, elem: &OclExpr, pos: bool) -> Result<Sexp, MsfolError> {
        if *elem == OclExpr::Null {
            let c = self.collection(src)?;
            return Ok(if pos { atom("false") } else { Sexp::not(c.undef) });
        }
        // `o.end->includes(k)` for an association-end keyword `k` is stated
        // from k's side: `k.opposite->includes(o)`.
        let reversed;
        let (src, elem) = match (src, elem) {
            (OclExpr::Nav(obj, end), OclExpr::Keyword(k))
                if self.keywords.role_of(k) == Some(KeywordRole::AssociationEnd)
                    && matches!(**obj, OclExpr::Keyword(_) | OclExpr::Var(_) | OclExpr::Object(_)) =>
            {
                let class = self.class_of(obj)?;
                match self.dm.navigate(&class, end) {
                    Some(nav) if Some(nav.target_class) == self.keywords.class_of(k) => {
                        let back = match nav.target_pos {
                            EndPos::First => &nav.association.end2.name,
                            EndPos::Second => &nav.association.end1.name,
                        };
                        reversed = OclExpr::Nav(Box::new(elem.clone()), back.clone());
                        (&reversed, &**obj)
                    }
                    _ => (src, elem),
                }
            }
            _ => (src, elem),
        };
        let c = self.collection(src)?;
        let x = self.object_term(elem)?;
        if pos {
            let temp = self.fresh("temp");
            let mut parts = vec![
                c.member(atom(&temp)),
                Sexp::eq(atom(&temp), x.t.clone()),
                Sexp::not(c.undef),
            ];
            parts.extend(x.inval.map(Sexp::not));
            Ok(Sexp::quantified("exists", &[&temp], Sexp::and(parts)))
        } else {
            let mut parts = vec![Sexp::not(c.member(x.t.clone())), Sexp::not(c.undef)];
            parts.extend(x.inval.map(Sexp::not));
            Ok(Sexp::and(parts))
        }
    }

    fn quantifier(
        &mut self,
        kind: IterKind,
        source: &OclExpr,
        var: &str,
        body: &OclExpr,
        pos: bool,
    ) -> Result<Sexp, MsfolError> {
        let c = self.collection(source)?;
        self.vars.push((var.to_string(), c.class.clone()));
        let b = self.formula(body, pos);
        self.vars.pop();
        let b = b?;
        let m = c.member(atom(var));
        let defined = Sexp::not(c.undef);
        Ok(match (kind, pos) {
            (IterKind::ForAll, true) => {
                Sexp::quantified("forall", &[var], Sexp::and(vec![Sexp::implies(m, b), defined]))
            }
            (IterKind::ForAll, false) => Sexp::and(vec![
                Sexp::quantified("exists", &[var], Sexp::and(vec![m, b])),
                defined,
            ]),
            (_, true) => Sexp::quantified("exists", &[var], Sexp::and(vec![m, b, defined])),
            (_, false) => Sexp::and(vec![Sexp::quantified("forall", &[var], Sexp::implies(m, b)), defined]),
        })
    }
}

/// `v = e` or `e = v` with `e` an object expression not mentioning `v`:
/// such an `exists` is a membership test for `e`.
fn membership_test<'e>(var: &str, body: &'e OclExpr) -> Option<&'e OclExpr> {
    let OclExpr::Compare(CmpOp::Eq, a, b) = body else {
        return None;
    };
    let other = match (&**a, &**b) {
        (OclExpr::Var(v), other) | (other, OclExpr::Var(v)) if v == var => other,
        _ => return None,
    };
    let object = matches!(other, OclExpr::Keyword(_) | OclExpr::Var(_) | OclExpr::Object(_));
    (object && !mentions_var(other, var)).then_some(other)
}
