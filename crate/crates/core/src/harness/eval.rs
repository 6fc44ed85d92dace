//! Query and expression evaluation.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::{Database, HarnessError, Relation, SqlValue};
use crate::secquery::AuthFunction;
use crate::sql::{
    output_name, BinOp, CheckKind, Expr, IsTest, Lineage, Query, ScopeItem, SelectItem, SqlError, TableRef,
};

/// Checks one attribute read: (class, attribute, object id) -> allowed.
pub(crate) type ReadCheck<'a> = dyn Fn(&str, &str, &SqlValue) -> Result<bool, HarnessError> + 'a;

/// Column layout of a row under construction: (qualifier, name, lineage).
#[derive(Debug, Clone, Default)]
pub(crate) struct Layout {
    cols: Vec<(String, String, Lineage)>,
}

type Scope<'r> = (&'r Layout, &'r [SqlValue]);

/// Authorization call counts; function bodies share their caller's.
enum Counter<'a> {
    Owned(RefCell<BTreeMap<String, usize>>),
    Shared(&'a RefCell<BTreeMap<String, usize>>),
}

pub(crate) struct Evaluator<'a> {
    db: &'a Database,
    temps: &'a BTreeMap<String, Relation>,
    params: BTreeMap<String, SqlValue>,
    functions: &'a [AuthFunction],
    calls: Counter<'a>,
    read_check: Option<&'a ReadCheck<'a>>,
}

fn runtime<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Runtime(msg.into()))
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(
        db: &'a Database,
        temps: &'a BTreeMap<String, Relation>,
        params: BTreeMap<String, SqlValue>,
        functions: &'a [AuthFunction],
    ) -> Evaluator<'a> {
        Evaluator {
            db,
            temps,
            params,
            functions,
            calls: Counter::Owned(RefCell::new(BTreeMap::new())),
            read_check: None,
        }
    }

    pub(crate) fn with_read_check(mut self, check: &'a ReadCheck<'a>) -> Evaluator<'a> {
        self.read_check = Some(check);
        self
    }

    /// Authorization calls made so far.
    pub(crate) fn calls(&self) -> BTreeMap<String, usize> {
        self.counter().borrow().clone()
    }

    fn counter(&self) -> &RefCell<BTreeMap<String, usize>> {
        match &self.calls {
            Counter::Owned(c) => c,
            Counter::Shared(c) => c,
        }
    }

    fn relation(&self, t: &TableRef) -> Result<Relation, HarnessError> {
        match t {
            TableRef::Table { name, .. } => {
                if let Some(r) = self.temps.get(name) {
                    return Ok(r.clone());
                }
                let Some(r) = self.db.table(name) else {
                    return Err(SqlError::UnknownTable(name.clone()).into());
                };
                let lineage = ScopeItem::base(&self.db.data_model, name, name).ok();
                let mut r = r.clone();
                if let Some(item) = lineage {
                    for (col, l) in r.columns.iter_mut() {
                        if let Some((_, lin)) = item.columns.iter().find(|(n, _)| n == col) {
                            *l = lin.clone();
                        }
                    }
                }
                Ok(r)
            }
            TableRef::Derived { query, .. } => self.query(query, &[], false),
        }
    }

    /// Evaluates a query. `top` marks the outermost query, whose `*`
    /// reads every column.
    pub(crate) fn query(&self, q: &Query, outer: &[Scope<'_>], top: bool) -> Result<Relation, HarnessError> {
        let mut layout = Layout::default();
        let mut rows: Vec<Vec<SqlValue>> = vec![Vec::new()];
        for t in &q.from {
            let rel = self.relation(t)?;
            extend_layout(&mut layout, t.qualifier(), &rel);
            rows = product(&rows, &rel.rows);
        }
        for j in &q.joins {
            let rel = self.relation(&j.item)?;
            extend_layout(&mut layout, j.item.qualifier(), &rel);
            let mut kept = Vec::new();
            for row in product(&rows, &rel.rows) {
                if self.holds(&j.on, outer, &layout, &row)? {
                    kept.push(row);
                }
            }
            rows = kept;
        }
        if let Some(w) = &q.selection {
            let mut kept = Vec::new();
            for row in rows {
                if self.holds(w, outer, &layout, &row)? {
                    kept.push(row);
                }
            }
            rows = kept;
        }
        let aggregate = q.items.iter().any(|i| match i {
            SelectItem::Expr { expr, .. } => expr.contains_aggregate(),
            SelectItem::Wildcard => false,
        });
        let mut columns = Vec::new();
        for it in &q.items {
            match it {
                SelectItem::Wildcard => {
                    if aggregate {
                        return runtime("`*` mixed with aggregates");
                    }
                    for (_, name, l) in &layout.cols {
                        columns.push((name.clone(), l.clone()));
                    }
                }
                SelectItem::Expr { expr, alias } => {
                    let lineage = match expr {
                        Expr::Column { qualifier, name } if !self.is_param(qualifier, name) => {
                            match lookup(&layout, qualifier.as_deref(), name)? {
                                Some(i) => match &layout.cols[i].2 {
                                    Lineage::Attr { .. } => Lineage::Derived,
                                    l => l.clone(),
                                },
                                None => Lineage::Derived,
                            }
                        }
                        _ => Lineage::Derived,
                    };
                    columns.push((output_name(expr, alias.as_deref()), lineage));
                }
            }
        }
        let mut out_rows = Vec::new();
        if aggregate {
            let null_row = vec![SqlValue::Null; layout.cols.len()];
            let first = rows.first().unwrap_or(&null_row);
            let mut out = Vec::new();
            for it in &q.items {
                let SelectItem::Expr { expr, .. } = it else {
                    unreachable!("rejected above")
                };
                let folded = self.fold_aggregates(expr, outer, &layout, &rows)?;
                out.push(self.eval_in(&folded, outer, &layout, first)?);
            }
            out_rows.push(out);
        } else {
            for row in &rows {
                let mut out = Vec::new();
                for it in &q.items {
                    match it {
                        SelectItem::Wildcard => {
                            for (i, v) in row.iter().enumerate() {
                                if top {
                                    self.check_read(&layout, row, i)?;
                                }
                                out.push(v.clone());
                            }
                        }
                        SelectItem::Expr { expr, .. } => out.push(self.eval_in(expr, outer, &layout, row)?),
                    }
                }
                out_rows.push(out);
            }
        }
        if q.distinct {
            let mut seen = std::collections::BTreeSet::new();
            out_rows.retain(|r| seen.insert(r.clone()));
        }
        Ok(Relation {
            columns,
            rows: out_rows,
        })
    }

    /// Replaces each aggregate by its value over `rows`.
    fn fold_aggregates(
        &self,
        e: &Expr,
        outer: &[Scope<'_>],
        layout: &Layout,
        rows: &[Vec<SqlValue>],
    ) -> Result<Expr, HarnessError> {
        let err = RefCell::new(None);
        let folded = e.clone().rewrite_shallow(&mut |x| {
            if !x.is_aggregate() {
                return x;
            }
            match self.aggregate(&x, outer, layout, rows) {
                Ok(SqlValue::Null) => Expr::Null,
                Ok(SqlValue::Int(i)) => Expr::Int(i),
                Ok(SqlValue::Str(s)) => Expr::Str(s),
                Ok(SqlValue::Bool(b)) => Expr::Bool(b),
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    Expr::Null
                }
            }
        });
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(folded),
        }
    }

    fn aggregate(
        &self,
        e: &Expr,
        outer: &[Scope<'_>],
        layout: &Layout,
        rows: &[Vec<SqlValue>],
    ) -> Result<SqlValue, HarnessError> {
        let (name, args) = match e {
            Expr::CountStar => return Ok(SqlValue::Int(rows.len() as i64)),
            Expr::Func { name, args } => (name.to_ascii_uppercase(), args),
            _ => unreachable!("caller checks is_aggregate"),
        };
        let [arg] = args.as_slice() else {
            return runtime(format!("{name} takes one argument"));
        };
        if arg.contains_aggregate() {
            return runtime("nested aggregate");
        }
        let mut values = Vec::new();
        for row in rows {
            let v = self.eval_in(arg, outer, layout, row)?;
            if v != SqlValue::Null {
                values.push(v);
            }
        }
        Ok(match name.as_str() {
            "COUNT" => SqlValue::Int(values.len() as i64),
            "SUM" if values.is_empty() => SqlValue::Null,
            "SUM" => SqlValue::Int(values.iter().filter_map(SqlValue::number).sum()),
            "MAX" => extreme(values, Ordering::Greater),
            _ => extreme(values, Ordering::Less),
        })
    }

    fn holds(&self, e: &Expr, outer: &[Scope<'_>], layout: &Layout, row: &[SqlValue]) -> Result<bool, HarnessError> {
        Ok(self.eval_in(e, outer, layout, row)?.truth() == Some(true))
    }

    fn eval_in(&self, e: &Expr, outer: &[Scope<'_>], layout: &Layout, row: &[SqlValue]) -> Result<SqlValue, HarnessError> {
        let mut scopes: Vec<Scope<'_>> = outer.to_vec();
        scopes.push((layout, row));
        self.eval(e, &scopes)
    }

    /// Evaluates an expression outside any query.
    pub(crate) fn expr(&self, e: &Expr, scopes: &[Scope<'_>]) -> Result<SqlValue, HarnessError> {
        self.eval(e, scopes)
    }

    fn is_param(&self, qualifier: &Option<String>, name: &str) -> bool {
        qualifier.is_none() && self.params.contains_key(name)
    }

    fn check_read(&self, layout: &Layout, row: &[SqlValue], i: usize) -> Result<(), HarnessError> {
        let Some(check) = self.read_check else {
            return Ok(());
        };
        let (qual, _, lineage) = &layout.cols[i];
        let Lineage::Attr { class, attr } = lineage else {
            return Ok(());
        };
        let id = layout
            .cols
            .iter()
            .position(|(q, _, l)| q == qual && *l == Lineage::Id(class.clone()))
            .ok_or_else(|| HarnessError::Runtime(format!("{attr} read without the id of its object")))?;
        if check(class, attr, &row[id])? {
            Ok(())
        } else {
            Err(HarnessError::Security(format!("{class}:{attr}")))
        }
    }

    fn column(&self, qualifier: &Option<String>, name: &str, scopes: &[Scope<'_>]) -> Result<SqlValue, HarnessError> {
        if self.is_param(qualifier, name) {
            return Ok(self.params[name].clone());
        }
        for (layout, row) in scopes.iter().rev() {
            if let Some(i) = lookup(layout, qualifier.as_deref(), name)? {
                self.check_read(layout, row, i)?;
                return Ok(row[i].clone());
            }
        }
        Err(SqlError::UnknownColumn(match qualifier {
            Some(q) => format!("{q}.{name}"),
            None => name.to_string(),
        })
        .into())
    }

    fn eval(&self, e: &Expr, scopes: &[Scope<'_>]) -> Result<SqlValue, HarnessError> {
        Ok(match e {
            Expr::Column { qualifier, name } => self.column(qualifier, name, scopes)?,
            Expr::Int(i) => SqlValue::Int(*i),
            Expr::Str(s) => SqlValue::Str(s.clone()),
            Expr::Bool(b) => SqlValue::Bool(*b),
            Expr::Null => SqlValue::Null,
            Expr::Binary { op, lhs, rhs } => {
                let a = self.eval(lhs, scopes)?;
                let b = self.eval(rhs, scopes)?;
                binary(*op, &a, &b)
            }
            Expr::Not(x) => match self.eval(x, scopes)?.truth() {
                Some(b) => SqlValue::Bool(!b),
                None => SqlValue::Null,
            },
            Expr::Is { expr, negated, test } => {
                let v = self.eval(expr, scopes)?;
                let r = match test {
                    IsTest::Null => v == SqlValue::Null,
                    IsTest::True => v.truth() == Some(true),
                    IsTest::False => v.truth() == Some(false),
                };
                SqlValue::Bool(r != *negated)
            }
            Expr::Func { name, args } => self.call(name, args, scopes)?,
            Expr::CountStar => return runtime("COUNT(*) outside a query"),
            Expr::Case {
                operand,
                branches,
                otherwise,
            } => {
                let subject = match operand {
                    Some(o) => Some(self.eval(o, scopes)?),
                    None => None,
                };
                for (w, t) in branches {
                    let w = self.eval(w, scopes)?;
                    let hit = match &subject {
                        Some(s) => s.compare(&w) == Some(Ordering::Equal),
                        None => w.truth() == Some(true),
                    };
                    if hit {
                        return self.eval(t, scopes);
                    }
                }
                match otherwise {
                    Some(o) => self.eval(o, scopes)?,
                    None => SqlValue::Null,
                }
            }
            Expr::Exists(q) => SqlValue::Bool(!self.query(q, scopes, false)?.rows.is_empty()),
            Expr::Subquery(q) => {
                let r = self.query(q, scopes, false)?;
                if r.columns.len() != 1 {
                    return runtime("Operand should contain 1 column");
                }
                match r.rows.len() {
                    0 => SqlValue::Null,
                    1 => r.rows[0][0].clone(),
                    _ => return runtime("Subquery returns more than 1 row"),
                }
            }
            Expr::Checked(c) => {
                let v = self.call(&c.func, &c.args, scopes)?;
                let expected = match c.kind {
                    CheckKind::One => SqlValue::Int(1),
                    CheckKind::True => SqlValue::Bool(true),
                };
                if v.compare(&expected) == Some(Ordering::Equal) {
                    self.eval(&c.then, scopes)?
                } else {
                    return Err(HarnessError::Security(c.func.clone()));
                }
            }
        })
    }

    fn call(&self, name: &str, args: &[Expr], scopes: &[Scope<'_>]) -> Result<SqlValue, HarnessError> {
        if name.eq_ignore_ascii_case("throw_error") {
            return Err(HarnessError::Security("throw_error".into()));
        }
        let probe = Expr::Func {
            name: name.to_string(),
            args: Vec::new(),
        };
        if probe.is_aggregate() {
            return runtime(format!("aggregate {name} outside a query"));
        }
        let Some(f) = self.functions.iter().find(|f| f.name == name) else {
            return runtime(format!("FUNCTION {name} does not exist"));
        };
        if args.len() != f.params.len() {
            return runtime(format!("{name} expects {} arguments", f.params.len()));
        }
        let mut bound = BTreeMap::new();
        for (p, a) in f.params.iter().zip(args) {
            bound.insert(p.clone(), self.eval(a, scopes)?);
        }
        *self.counter().borrow_mut().entry(name.to_string()).or_default() += 1;
        let inner = Evaluator {
            db: self.db,
            temps: self.temps,
            params: bound,
            functions: self.functions,
            calls: Counter::Shared(self.counter()),
            read_check: None,
        };
        inner.eval(&f.body(), &[])
    }
}

fn extend_layout(layout: &mut Layout, qualifier: &str, rel: &Relation) {
    for (name, l) in &rel.columns {
        layout.cols.push((qualifier.to_string(), name.clone(), l.clone()));
    }
}

fn product(left: &[Vec<SqlValue>], right: &[Vec<SqlValue>]) -> Vec<Vec<SqlValue>> {
    let mut out = Vec::with_capacity(left.len() * right.len());
    for l in left {
        for r in right {
            let mut row = l.clone();
            row.extend(r.iter().cloned());
            out.push(row);
        }
    }
    out
}

fn lookup(layout: &Layout, qualifier: Option<&str>, name: &str) -> Result<Option<usize>, HarnessError> {
    let mut found = None;
    for (i, (q, n, _)) in layout.cols.iter().enumerate() {
        if n == name && qualifier.is_none_or(|x| x == q) {
            if found.is_some() {
                return Err(SqlError::AmbiguousColumn(name.to_string()).into());
            }
            found = Some(i);
        }
    }
    Ok(found)
}

fn extreme(values: Vec<SqlValue>, keep: Ordering) -> SqlValue {
    values
        .into_iter()
        .reduce(|a, b| if b.compare(&a) == Some(keep) { b } else { a })
        .unwrap_or(SqlValue::Null)
}

fn binary(op: BinOp, a: &SqlValue, b: &SqlValue) -> SqlValue {
    let truth = |b: Option<bool>| b.map(SqlValue::Bool).unwrap_or(SqlValue::Null);
    match op {
        BinOp::And => truth(match (a.truth(), b.truth()) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        }),
        BinOp::Or => truth(match (a.truth(), b.truth()) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        }),
        BinOp::NullSafeEq => SqlValue::Bool(match (a, b) {
            (SqlValue::Null, SqlValue::Null) => true,
            (SqlValue::Null, _) | (_, SqlValue::Null) => false,
            _ => a.compare(b) == Some(Ordering::Equal),
        }),
        _ => truth(a.compare(b).map(|o| match op {
            BinOp::Eq => o == Ordering::Equal,
            BinOp::Ne => o != Ordering::Equal,
            BinOp::Lt => o == Ordering::Less,
            BinOp::Le => o != Ordering::Greater,
            BinOp::Gt => o == Ordering::Greater,
            _ => o != Ordering::Less,
        })),
    }
}
