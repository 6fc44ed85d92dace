//! Reference authorization judgment for whole queries.
//!
//! A query is authorized when every association pair its staging would
//! inspect, and every attribute value its evaluation reads, passes the
//! policy. Decisions are taken on the OCL side with `auth_decision` over
//! the scenario read back from the tables; no generated SQL is involved.

use std::collections::BTreeMap;

use super::eval::{Evaluator, ReadCheck};
use super::{Database, HarnessError, SqlValue};
use crate::model::{AssociationDef, ObjectRef, Scenario};
use crate::ocl::Binding;
use crate::policy::{Resource, SecurityModel};
use crate::sql::{BinOp, Expr, Query, TableRef, PARAMETERS};

/// Decides whether `caller`, acting as `role`, may run `q` on `db`.
pub fn auth_query_ref(
    policy: &SecurityModel,
    db: &Database,
    q: &Query,
    caller: &str,
    role: &str,
) -> Result<bool, HarnessError> {
    let sc = db.to_scenario()?;
    let who = ObjectRef::new(caller, policy.user_class.clone());
    let decide = |res: &Resource, targets: Binding| {
        policy
            .auth_decision(&sc, &who, role, res, &targets)
            .map_err(|e| HarnessError::Policy(e.to_string()))
    };
    if !associations_allowed(db, &sc, q, caller, &decide)? {
        return Ok(false);
    }
    let check = |class: &str, attr: &str, id: &SqlValue| -> Result<bool, HarnessError> {
        let SqlValue::Str(id) = id else {
            return Err(HarnessError::Runtime(format!("read of {class}:{attr} without an object id")));
        };
        decide(
            &Resource::attribute(class, attr),
            Binding::from([("self".to_string(), ObjectRef::new(id.clone(), class))]),
        )
    };
    let check: &ReadCheck<'_> = &check;
    let temps = BTreeMap::new();
    let params = BTreeMap::from([
        ("caller".to_string(), SqlValue::Str(caller.to_string())),
        ("role".to_string(), SqlValue::Str(role.to_string())),
    ]);
    let ev = Evaluator::new(db, &temps, params, &[]).with_read_check(check);
    match ev.query(q, &[], true) {
        Ok(_) => Ok(true),
        Err(HarnessError::Security(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Every pair of end objects that satisfies the literal equality filters
/// placed on an association table at its own query level must be readable.
fn associations_allowed(
    db: &Database,
    sc: &Scenario,
    q: &Query,
    caller: &str,
    decide: &dyn Fn(&Resource, Binding) -> Result<bool, HarnessError>,
) -> Result<bool, HarnessError> {
    let dm = &db.data_model;
    let items: Vec<&TableRef> = q.from.iter().chain(q.joins.iter().map(|j| &j.item)).collect();
    for t in &items {
        let name = match t {
            TableRef::Derived { query, .. } => {
                if !associations_allowed(db, sc, query, caller, decide)? {
                    return Ok(false);
                }
                continue;
            }
            TableRef::Table { name, .. } => name,
        };
        let Some(assoc) = dm.association(name) else {
            continue;
        };
        let fixed = fixed_ends(db, q, &items, t.qualifier(), assoc, caller);
        for a in sc.instances(&assoc.end1.class) {
            for b in sc.instances(&assoc.end2.class) {
                let pair = [&a, &b];
                let excluded = fixed
                    .iter()
                    .any(|(end, v)| SqlValue::Str(pair[*end].id.clone()).compare(v) != Some(std::cmp::Ordering::Equal));
                if excluded {
                    continue;
                }
                let targets = Binding::from([
                    (assoc.end1.name.clone(), a.clone()),
                    (assoc.end2.name.clone(), b.clone()),
                ]);
                if !decide(&Resource::association(&assoc.name), targets)? {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// `end = literal` and `end = caller` conjuncts of the WHERE clause that
/// belong to the association occurrence `qual`, as (end index, value).
fn fixed_ends(
    db: &Database,
    q: &Query,
    items: &[&TableRef],
    qual: &str,
    assoc: &AssociationDef,
    caller: &str,
) -> Vec<(usize, SqlValue)> {
    let mut out = Vec::new();
    for c in q.selection.iter().flat_map(|w| w.conjuncts()) {
        let Expr::Binary {
            op: BinOp::Eq,
            lhs,
            rhs,
        } = c
        else {
            continue;
        };
        for (a, b) in [(&**lhs, &**rhs), (&**rhs, &**lhs)] {
            let Expr::Column { qualifier, name } = a else {
                continue;
            };
            if qualifier.is_none() && PARAMETERS.contains(&name.as_str()) {
                continue;
            }
            let value = match b {
                Expr::Str(s) => SqlValue::Str(s.clone()),
                Expr::Int(i) => SqlValue::Int(*i),
                Expr::Column { qualifier: None, name } if name == "caller" => SqlValue::Str(caller.to_string()),
                _ => continue,
            };
            let end = if assoc.end1.name == *name {
                0
            } else if assoc.end2.name == *name {
                1
            } else {
                continue;
            };
            let owned = match qualifier {
                Some(x) => x == qual,
                None => items.iter().filter(|o| o.qualifier() != qual).all(|o| match o {
                    TableRef::Table { name: t, .. } => db
                        .data_model
                        .table_columns(t)
                        .is_some_and(|cols| !cols.contains(name)),
                    TableRef::Derived { .. } => false,
                }),
            };
            if owned {
                out.push((end, value));
            }
        }
    }
    out
}
