//! Many-sorted first-order encoding of data models and constraints, printed
//! as SMT-LIB.
//!
//! Objects live in the sort `Classifier`; every sort has a `null` and an
//! `inval` constant. A constraint is encoded by two formulas: [`map_true`]
//! holds exactly when the constraint evaluates to `true`, [`map_false`]
//! exactly when it evaluates to `false`. `select` results are named by
//! fresh `TEMPk` predicates whose definitions are collected alongside.

mod sexp;
mod theory;
mod translate;

use std::fmt;

use thiserror::Error;

use crate::model::{DataModel, Scenario};
use crate::ocl::{Keywords, OclExpr};

pub use sexp::{app, atom, Sexp};
pub use theory::{data_model_theory, object_constant, scenario_theory, sigma};
pub use translate::Translator;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MsfolError {
    #[error("cannot translate `{subexpr}`: {reason}")]
    Unsupported { subexpr: String, reason: String },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
}

/// A sequence of SMT-LIB commands.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SmtScript {
    pub commands: Vec<Sexp>,
}

impl SmtScript {
    pub fn new() -> SmtScript {
        SmtScript::default()
    }

    pub fn push(&mut self, c: Sexp) {
        self.commands.push(c);
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = Sexp>) {
        self.commands.extend(cs);
    }

    pub fn assert(&mut self, f: Sexp) {
        self.commands.push(app("assert", [f]));
    }
}

impl fmt::Display for SmtScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.commands {
            writeln!(f, "{}", c.pretty())?;
        }
        Ok(())
    }
}

/// Formula that holds exactly when `e` evaluates to `true`. Any `TEMPk`
/// definitions it needs are discarded; use a [`Translator`] to keep them.
pub fn map_true(dm: &DataModel, keywords: &Keywords, e: &OclExpr) -> Result<Sexp, MsfolError> {
    Translator::new(dm, keywords).map_true(e)
}

/// Formula that holds exactly when `e` evaluates to `false`.
pub fn map_false(dm: &DataModel, keywords: &Keywords, e: &OclExpr) -> Result<Sexp, MsfolError> {
    Translator::new(dm, keywords).map_false(e)
}

/// Theory, keyword declarations, the facts and the negated authorization
/// constraint: `unsat` means the facts entail the constraint.
pub fn elimination_problem(
    dm: &DataModel,
    keywords: &Keywords,
    facts: &[OclExpr],
    auth: &OclExpr,
) -> Result<SmtScript, MsfolError> {
    let mut s = SmtScript::new();
    s.push(app("set-logic", [atom("ALL")]));
    s.extend(data_model_theory(dm));
    s.extend(sigma(keywords));
    let mut t = Translator::new(dm, keywords);
    for fact in facts {
        let f = t.map_true(fact)?;
        s.extend(t.take_definitions());
        s.assert(f);
    }
    let goal = t.map_true(auth)?;
    s.extend(t.take_definitions());
    s.assert(Sexp::not(goal));
    s.push(app("check-sat", []));
    Ok(s)
}

/// Theory, the interpretation of a scenario and a ground constraint:
/// `sat` exactly when the constraint evaluates to `true` in the scenario.
pub fn ground_problem(dm: &DataModel, sc: &Scenario, e: &OclExpr) -> Result<SmtScript, MsfolError> {
    let mut s = SmtScript::new();
    s.push(app("set-logic", [atom("ALL")]));
    s.extend(data_model_theory(dm));
    s.extend(scenario_theory(dm, sc));
    let kw = Keywords::new();
    let mut t = Translator::new(dm, &kw).with_scenario(sc);
    let f = t.map_true(e)?;
    s.extend(t.take_definitions());
    s.assert(f);
    s.push(app("check-sat", []));
    Ok(s)
}
