//! Breaking a query into temporary-table steps with authorization checks.
//!
//! Association reads come first: for every occurrence of an association
//! table, a candidate step builds all pairs of end objects allowed by the
//! equality filters on that table, and a check step calls the
//! association's authorization function on each pair. The query itself is
//! then evaluated bottom-up: derived tables become temporary tables, a
//! filter step applies joins and WHERE, and a projection step reads the
//! selected columns. Attribute values are wrapped in a check wherever a
//! step reads them.

use std::cell::RefCell;

use super::{auth_function_name, SecQueryError, TempTableDef};
use crate::model::{id_column, DataModel};
use crate::policy::Resource;
use crate::sql::{
    BinOp, CheckKind, Checked, Expr, Join, Lineage, Query, ScopeItem, SelectItem, TableRef, PARAMETERS,
};

#[derive(Debug, Clone)]
struct Col {
    name: String,
    lineage: Lineage,
}

#[derive(Debug, Clone)]
struct FrameItem {
    /// Qualifier used for this item in the original query.
    orig: String,
    /// Qualifier valid in the step being generated.
    render: String,
    cols: Vec<Col>,
}

pub(crate) struct Staged {
    pub steps: Vec<TempTableDef>,
    /// The final SELECT over the last temporary table.
    pub result: Query,
    /// Resources checked, in order of first use.
    pub resources: Vec<Resource>,
}

struct Stager<'a> {
    dm: &'a DataModel,
    policy: &'a str,
    steps: Vec<TempTableDef>,
    resources: Vec<Resource>,
}

fn unsupported<T>(what: impl Into<String>) -> Result<T, SecQueryError> {
    Err(SecQueryError::UnsupportedQuery(what.into()))
}

fn is_temp_name(s: &str) -> bool {
    s.len() > 4 && s[..4].eq_ignore_ascii_case("TEMP") && s[4..].bytes().all(|b| b.is_ascii_digit())
}

fn has_subquery(e: &Expr) -> bool {
    let mut found = false;
    e.walk_shallow(&mut |x| {
        if matches!(x, Expr::Exists(_) | Expr::Subquery(_)) {
            found = true;
        }
    });
    found
}

fn columns_of(e: &Expr) -> Vec<(Option<String>, String)> {
    let mut out = Vec::new();
    e.walk_shallow(&mut |x| {
        if let Expr::Column { qualifier, name } = x {
            out.push((qualifier.clone(), name.clone()));
        }
    });
    out
}

fn is_parameter(q: &Option<String>, name: &str) -> bool {
    q.is_none() && PARAMETERS.contains(&name)
}

/// Tables named anywhere in the query, in document order.
fn tables_in(q: &Query, out: &mut Vec<String>) {
    for t in q.from.iter().chain(q.joins.iter().map(|j| &j.item)) {
        match t {
            TableRef::Table { name, .. } => out.push(name.clone()),
            TableRef::Derived { query, .. } => tables_in(query, out),
        }
    }
}

pub(crate) fn stage(dm: &DataModel, policy: &str, q: &Query) -> Result<Staged, SecQueryError> {
    validate(q, true)?;
    let mut s = Stager {
        dm,
        policy,
        steps: Vec::new(),
        resources: Vec::new(),
    };
    let mut tables = Vec::new();
    tables_in(q, &mut tables);
    let mut class_order: Vec<String> = Vec::new();
    for t in tables.iter().chain(dm.classes.iter().map(|c| &c.name)) {
        if dm.class(t).is_some() && !class_order.contains(t) {
            class_order.push(t.clone());
        }
    }
    s.association_scans(q, &class_order)?;
    let result = s.top(q)?;
    Ok(Staged {
        steps: s.steps,
        result,
        resources: s.resources,
    })
}

/// Rejects constructs the staging does not handle.
fn validate(q: &Query, top: bool) -> Result<(), SecQueryError> {
    let exprs = q
        .joins
        .iter()
        .map(|j| &j.on)
        .chain(q.selection.iter())
        .chain(q.items.iter().filter_map(|i| match i {
            SelectItem::Expr { expr, .. } => Some(expr),
            SelectItem::Wildcard => None,
        }));
    for e in exprs {
        if has_subquery(e) {
            return unsupported(format!("subquery expression `{e}`"));
        }
        if matches!(e, Expr::Checked(_)) {
            return unsupported("query already contains authorization checks");
        }
    }
    for j in &q.joins {
        if j.on.contains_aggregate() {
            return unsupported("aggregate in a join condition");
        }
    }
    if q.selection.as_ref().is_some_and(Expr::contains_aggregate) {
        return unsupported("aggregate in WHERE");
    }
    if !top {
        if let Some(SelectItem::Expr { expr, .. }) = q
            .items
            .iter()
            .find(|i| matches!(i, SelectItem::Expr { expr, .. } if expr.contains_aggregate()))
        {
            return unsupported(format!("aggregate `{expr}` in a derived table"));
        }
    }
    for t in q.from.iter().chain(q.joins.iter().map(|j| &j.item)) {
        let alias = match t {
            TableRef::Table { alias, .. } => alias.as_deref(),
            TableRef::Derived { alias, query } => {
                validate(query, false)?;
                Some(alias.as_str())
            }
        };
        if let Some(a) = alias.filter(|a| is_temp_name(a)) {
            return unsupported(format!("alias `{a}` clashes with generated table names"));
        }
    }
    Ok(())
}

/// FROM list, joins and the residual condition of a staged step.
type FromParts = (Vec<TableRef>, Vec<Join>, Option<Expr>);

impl Stager<'_> {
    fn emit(&mut self, body: Query) -> String {
        let name = format!("TEMP{}", self.steps.len() + 1);
        self.steps.push(TempTableDef {
            name: name.clone(),
            body,
        });
        name
    }

    fn use_resource(&mut self, r: Resource) -> String {
        let name = auth_function_name(self.policy, &r);
        if !self.resources.contains(&r) {
            self.resources.push(r);
        }
        name
    }

    fn association_scans(&mut self, q: &Query, class_order: &[String]) -> Result<(), SecQueryError> {
        let items: Vec<&TableRef> = q.from.iter().chain(q.joins.iter().map(|j| &j.item)).collect();
        for t in &items {
            match t {
                TableRef::Derived { query, .. } => self.association_scans(query, class_order)?,
                TableRef::Table { name, .. } => {
                    let Some(assoc) = self.dm.association(name) else {
                        continue;
                    };
                    let assoc = assoc.clone();
                    let qual = t.qualifier();
                    let same = assoc.end1.class == assoc.end2.class;
                    let ends = [&assoc.end1, &assoc.end2];
                    let mut order: Vec<usize> = vec![0, 1];
                    order.sort_by_key(|&i| class_order.iter().position(|c| *c == ends[i].class));
                    let col = |i: usize| {
                        let id = id_column(&ends[i].class);
                        if same {
                            Expr::qcol(&format!("x{}", i + 1), &id)
                        } else {
                            Expr::col(&id)
                        }
                    };
                    let mut pushed = Vec::new();
                    for c in q.selection.iter().flat_map(|w| w.conjuncts()) {
                        let Expr::Binary {
                            op: BinOp::Eq,
                            lhs,
                            rhs,
                        } = c
                        else {
                            continue;
                        };
                        let (column, value) = match (&**lhs, &**rhs) {
                            (Expr::Column { qualifier, name }, v) | (v, Expr::Column { qualifier, name })
                                if !is_parameter(qualifier, name) =>
                            {
                                ((qualifier, name), v)
                            }
                            _ => continue,
                        };
                        let pushable = match value {
                            Expr::Str(_) | Expr::Int(_) => true,
                            Expr::Column { qualifier: None, name } => name == "caller",
                            _ => false,
                        };
                        let Some(end) = ends.iter().position(|e| e.name == *column.1) else {
                            continue;
                        };
                        let mine = match column.0 {
                            Some(q) => q == qual,
                            // unqualified: only when no other item may own the name
                            None => items.iter().filter(|o| o.qualifier() != qual).all(|o| match o {
                                TableRef::Table { name, .. } => self
                                    .dm
                                    .table_columns(name)
                                    .is_some_and(|cols| !cols.contains(column.1)),
                                TableRef::Derived { .. } => false,
                            }),
                        };
                        if pushable && mine {
                            pushed.push(Expr::eq(col(end), value.clone()));
                        }
                    }
                    let from = order
                        .iter()
                        .map(|&i| TableRef::Table {
                            name: ends[i].class.clone(),
                            alias: same.then(|| format!("x{}", i + 1)),
                        })
                        .collect();
                    let candidate = self.emit(Query {
                        distinct: false,
                        items: order.iter().map(|&i| SelectItem::aliased(col(i), &ends[i].name)).collect(),
                        from,
                        joins: Vec::new(),
                        selection: Expr::conjunction(pushed),
                    });
                    let func = self.use_resource(Resource::association(&assoc.name));
                    let check = Expr::Checked(Checked {
                        func,
                        args: vec![
                            Expr::col("caller"),
                            Expr::col("role"),
                            Expr::col(&assoc.end1.name),
                            Expr::col(&assoc.end2.name),
                        ],
                        kind: CheckKind::True,
                        then: Box::new(Expr::Bool(true)),
                    });
                    self.emit(Query {
                        distinct: false,
                        items: vec![SelectItem::Wildcard],
                        from: vec![TableRef::table(&candidate)],
                        joins: Vec::new(),
                        selection: Some(check),
                    });
                }
            }
        }
        Ok(())
    }

    /// FROM items of one level, with derived tables already staged.
    fn frame(&mut self, q: &Query) -> Result<(Vec<FrameItem>, Vec<TableRef>), SecQueryError> {
        let mut frame = Vec::new();
        let mut refs = Vec::new();
        for t in q.from.iter().chain(q.joins.iter().map(|j| &j.item)) {
            match t {
                TableRef::Table { name, .. } => {
                    let item = ScopeItem::base(self.dm, name, t.qualifier())?;
                    frame.push(FrameItem {
                        orig: t.qualifier().to_string(),
                        render: t.qualifier().to_string(),
                        cols: item
                            .columns
                            .into_iter()
                            .map(|(name, lineage)| Col { name, lineage })
                            .collect(),
                    });
                    refs.push(t.clone());
                }
                TableRef::Derived { query, alias } => {
                    let (temp, cols) = self.derived(query)?;
                    frame.push(FrameItem {
                        orig: alias.clone(),
                        render: temp.clone(),
                        cols,
                    });
                    refs.push(TableRef::table(&temp));
                }
            }
        }
        if let Some(dup) = frame
            .iter()
            .enumerate()
            .find_map(|(i, a)| frame[..i].iter().find(|b| b.orig == a.orig).map(|_| a.orig.clone()))
        {
            return unsupported(format!("FROM item name `{dup}` used twice"));
        }
        Ok((frame, refs))
    }

    fn needs_filter(q: &Query) -> bool {
        q.selection.is_some() || !q.joins.is_empty() || q.from.len() > 1
    }

    fn has_duplicate_names(frame: &[FrameItem]) -> bool {
        let mut names: Vec<&str> = frame.iter().flat_map(|f| f.cols.iter().map(|c| c.name.as_str())).collect();
        let n = names.len();
        names.sort_unstable();
        names.dedup();
        names.len() != n
    }

    /// FROM list and joins of a step over `frame`, with conditions
    /// rewritten.
    fn build_from(
        &mut self,
        q: &Query,
        frame: &[FrameItem],
        refs: Vec<TableRef>,
    ) -> Result<FromParts, SecQueryError> {
        let n = q.from.len();
        let mut joins = Vec::new();
        for (k, j) in q.joins.iter().enumerate() {
            let on = orient(&j.on, frame)?;
            joins.push(Join {
                item: refs[n + k].clone(),
                on: self.rewrite(&on, frame, true)?,
            });
        }
        let selection = match &q.selection {
            Some(w) => Some(self.rewrite(w, frame, true)?),
            None => None,
        };
        Ok((refs[..n].to_vec(), joins, selection))
    }

    /// Applies joins and WHERE when present; returns the frame to project
    /// from and its FROM list.
    fn filter(
        &mut self,
        q: &Query,
        frame: Vec<FrameItem>,
        refs: Vec<TableRef>,
    ) -> Result<(Vec<FrameItem>, Vec<TableRef>), SecQueryError> {
        if !Self::needs_filter(q) {
            return Ok((frame, refs));
        }
        let (from, joins, selection) = self.build_from(q, &frame, refs)?;
        let temp = self.emit(Query {
            distinct: false,
            items: vec![SelectItem::Wildcard],
            from,
            joins,
            selection,
        });
        let frame = frame
            .into_iter()
            .map(|f| FrameItem {
                render: temp.clone(),
                ..f
            })
            .collect();
        Ok((frame, vec![TableRef::table(&temp)]))
    }

    /// Stages a derived table; returns its temporary table and columns.
    fn derived(&mut self, q: &Query) -> Result<(String, Vec<Col>), SecQueryError> {
        let (frame, refs) = self.frame(q)?;
        let star_only = q.items.len() == 1 && q.items[0] == SelectItem::Wildcard && !q.distinct;
        let dup = Self::has_duplicate_names(&frame);
        if star_only {
            if dup {
                return unsupported("duplicate column names in a derived table");
            }
            let cols: Vec<Col> = frame.iter().flat_map(|f| f.cols.clone()).collect();
            if Self::needs_filter(q) {
                let (frame, _) = self.filter(q, frame, refs)?;
                return Ok((frame[0].render.clone(), cols));
            }
            let temp = self.emit(Query {
                distinct: false,
                items: vec![SelectItem::Wildcard],
                from: refs,
                joins: Vec::new(),
                selection: None,
            });
            return Ok((temp, cols));
        }
        let (frame, from, joins, selection) = if dup {
            let (from, joins, selection) = self.build_from(q, &frame, refs)?;
            (frame, from, joins, selection)
        } else {
            let (frame, from) = self.filter(q, frame, refs)?;
            (frame, from, Vec::new(), None)
        };
        let mut items = Vec::new();
        let mut cols = Vec::new();
        for it in &q.items {
            match it {
                SelectItem::Wildcard => {
                    for f in &frame {
                        for c in &f.cols {
                            items.push(SelectItem::expr(col_ref(&frame, f, &c.name)));
                            cols.push(c.clone());
                        }
                    }
                }
                SelectItem::Expr { expr, alias } => {
                    let (item, col) = self.project_expr(expr, alias.as_deref(), &frame)?;
                    items.push(item);
                    cols.push(col);
                }
            }
        }
        let mut names: Vec<&str> = cols.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return unsupported("duplicate column names in a derived table");
        }
        let temp = self.emit(Query {
            distinct: q.distinct,
            items,
            from,
            joins,
            selection,
        });
        Ok((temp, cols))
    }

    /// One projected expression of a derived table.
    fn project_expr(
        &mut self,
        expr: &Expr,
        alias: Option<&str>,
        frame: &[FrameItem],
    ) -> Result<(SelectItem, Col), SecQueryError> {
        let rewritten = self.rewrite(expr, frame, true)?;
        match expr {
            Expr::Column { qualifier, name } if !is_parameter(qualifier, name) => {
                let (i, j) = find(frame, qualifier.as_deref(), name)?;
                let lineage = match &frame[i].cols[j].lineage {
                    Lineage::Attr { .. } => Lineage::Derived,
                    l => l.clone(),
                };
                let out = alias.unwrap_or(name);
                let plain = matches!(&rewritten, Expr::Column { qualifier: None, name: n } if n == out);
                let item = if plain {
                    SelectItem::expr(rewritten)
                } else {
                    SelectItem::aliased(rewritten, out)
                };
                Ok((
                    item,
                    Col {
                        name: out.to_string(),
                        lineage,
                    },
                ))
            }
            _ => match alias {
                Some(a) => Ok((
                    SelectItem::aliased(rewritten, a),
                    Col {
                        name: a.to_string(),
                        lineage: Lineage::Derived,
                    },
                )),
                None => unsupported(format!("unnamed expression `{expr}` in a derived table")),
            },
        }
    }

    /// Stages the outermost query and returns the final SELECT.
    fn top(&mut self, q: &Query) -> Result<Query, SecQueryError> {
        let (frame, refs) = self.frame(q)?;
        let dup = Self::has_duplicate_names(&frame);
        let (frame, from, joins, selection) = if dup {
            let (from, joins, selection) = self.build_from(q, &frame, refs)?;
            (frame, from, joins, selection)
        } else {
            let (frame, from) = self.filter(q, frame, refs)?;
            (frame, from, Vec::new(), None)
        };
        let mut items: Vec<SelectItem> = Vec::new();
        let mut names: Vec<String> = Vec::new();
        let mut result_items = Vec::new();
        let mut project = |this: &mut Self, qual: Option<&str>, name: &str| -> Result<(), SecQueryError> {
            let (i, j) = find(&frame, qual, name)?;
            let col = &frame[i].cols[j];
            if names.contains(&col.name) {
                // the same column read twice is projected once
                let (k, _) = names.iter().enumerate().find(|(_, n)| **n == col.name).expect("present");
                let earlier = &items[k];
                let again = this.read(&frame, i, j)?;
                let same = match earlier {
                    SelectItem::Expr { expr, .. } => *expr == again,
                    SelectItem::Wildcard => false,
                };
                if !same {
                    return unsupported(format!("two different columns named `{}` in the result", col.name));
                }
                return Ok(());
            }
            let e = this.read(&frame, i, j)?;
            let plain = matches!(&e, Expr::Column { qualifier: None, name: n } if *n == col.name);
            items.push(if plain {
                SelectItem::expr(e)
            } else {
                SelectItem::aliased(e, &col.name)
            });
            names.push(col.name.clone());
            Ok(())
        };
        for it in &q.items {
            match it {
                SelectItem::Wildcard => {
                    for f in &frame {
                        for c in &f.cols {
                            project(self, Some(&f.orig), &c.name)?;
                        }
                    }
                    result_items.push(SelectItem::Wildcard);
                }
                SelectItem::Expr {
                    expr: Expr::Column { qualifier, name },
                    alias,
                } if !is_parameter(qualifier, name) => {
                    project(self, qualifier.as_deref(), name)?;
                    let (i, j) = find(&frame, qualifier.as_deref(), name)?;
                    let out = frame[i].cols[j].name.clone();
                    result_items.push(match alias {
                        Some(a) if *a != out => SelectItem::aliased(Expr::col(&out), a),
                        _ => SelectItem::expr(Expr::col(&out)),
                    });
                }
                SelectItem::Expr { expr, alias } => {
                    for (qual, name) in columns_of(expr) {
                        if !is_parameter(&qual, &name) {
                            project(self, qual.as_deref(), &name)?;
                        }
                    }
                    let unqualified = expr.clone().rewrite_shallow(&mut |e| match e {
                        Expr::Column { name, .. } => Expr::Column { qualifier: None, name },
                        e => e,
                    });
                    result_items.push(SelectItem::Expr {
                        expr: unqualified,
                        alias: alias.clone(),
                    });
                }
            }
        }
        if items.is_empty() {
            // nothing is read, but the rows still have to be produced
            let placeholder = frame
                .iter()
                .flat_map(|f| f.cols.iter().map(move |c| (f, c)))
                .find(|(_, c)| matches!(c.lineage, Lineage::Id(_)));
            items.push(match placeholder {
                Some((f, c)) => SelectItem::aliased(col_ref(&frame, f, &c.name), &c.name),
                None => {
                    let f = frame.last().ok_or_else(|| SecQueryError::UnsupportedQuery("empty FROM".into()))?;
                    let c = f.cols.last().expect("tables have columns");
                    SelectItem::expr(col_ref(&frame, f, &c.name))
                }
            });
        }
        let temp = self.emit(Query {
            distinct: false,
            items,
            from,
            joins,
            selection,
        });
        Ok(Query {
            distinct: q.distinct,
            items: result_items,
            from: vec![TableRef::table(&temp)],
            joins: Vec::new(),
            selection: None,
        })
    }

    /// A column read, checked when it holds a protected attribute value.
    fn read(&mut self, frame: &[FrameItem], i: usize, j: usize) -> Result<Expr, SecQueryError> {
        let f = &frame[i];
        let c = &f.cols[j];
        let plain = col_ref(frame, f, &c.name);
        let Lineage::Attr { class, attr } = &c.lineage else {
            return Ok(plain);
        };
        let Some(id) = f.cols.iter().find(|c| c.lineage == Lineage::Id(class.clone())) else {
            return unsupported(format!("`{}` is read without the identifier of its object", c.name));
        };
        let id = col_ref(frame, f, &id.name);
        let func = self.use_resource(Resource::attribute(class, attr));
        Ok(Expr::Checked(Checked {
            func,
            args: vec![Expr::col("caller"), Expr::col("role"), id],
            kind: CheckKind::One,
            then: Box::new(plain),
        }))
    }

    fn rewrite(&mut self, e: &Expr, frame: &[FrameItem], check: bool) -> Result<Expr, SecQueryError> {
        let err = RefCell::new(None);
        let out = e.clone().rewrite_shallow(&mut |x| match x {
            Expr::Column { qualifier, name } if !is_parameter(&qualifier, &name) => {
                let r = find(frame, qualifier.as_deref(), &name).and_then(|(i, j)| {
                    if check {
                        self.read(frame, i, j)
                    } else {
                        Ok(col_ref(frame, &frame[i], &name))
                    }
                });
                match r {
                    Ok(e) => e,
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        Expr::Null
                    }
                }
            }
            x => x,
        });
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

/// Resolves a column of the original query against a frame.
fn find(frame: &[FrameItem], qualifier: Option<&str>, name: &str) -> Result<(usize, usize), SecQueryError> {
    let mut found = None;
    for (i, f) in frame.iter().enumerate() {
        if qualifier.is_some_and(|q| q != f.orig) {
            continue;
        }
        if let Some(j) = f.cols.iter().position(|c| c.name == name) {
            if found.is_some() {
                return Err(crate::sql::SqlError::AmbiguousColumn(name.to_string()).into());
            }
            found = Some((i, j));
        }
    }
    found.ok_or_else(|| {
        crate::sql::SqlError::UnknownColumn(match qualifier {
            Some(q) => format!("{q}.{name}"),
            None => name.to_string(),
        })
        .into()
    })
}

/// Reference to a column in a generated step; qualified only when the
/// name alone would be ambiguous.
fn col_ref(frame: &[FrameItem], f: &FrameItem, name: &str) -> Expr {
    let owners = frame
        .iter()
        .filter(|g| g.cols.iter().any(|c| c.name == name))
        .count();
    if owners > 1 {
        Expr::qcol(&f.render, name)
    } else {
        Expr::col(name)
    }
}

/// Puts the column of the earlier FROM item first in equalities between
/// columns of two items.
fn orient(e: &Expr, frame: &[FrameItem]) -> Result<Expr, SecQueryError> {
    Ok(match e {
        Expr::Binary {
            op: BinOp::And,
            lhs,
            rhs,
        } => Expr::and(orient(lhs, frame)?, orient(rhs, frame)?),
        Expr::Binary {
            op: BinOp::Eq,
            lhs,
            rhs,
        } => match (&**lhs, &**rhs) {
            (
                Expr::Column {
                    qualifier: q1,
                    name: n1,
                },
                Expr::Column {
                    qualifier: q2,
                    name: n2,
                },
            ) if !is_parameter(q1, n1) && !is_parameter(q2, n2) => {
                let (a, _) = find(frame, q1.as_deref(), n1)?;
                let (b, _) = find(frame, q2.as_deref(), n2)?;
                if b < a {
                    Expr::eq((**rhs).clone(), (**lhs).clone())
                } else {
                    e.clone()
                }
            }
            _ => e.clone(),
        },
        _ => e.clone(),
    })
}
