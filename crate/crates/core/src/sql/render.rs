//! Single-line SQL rendering with minimal, precedence-driven parentheses.

use std::fmt::{self, Display, Formatter, Write};

use super::ast::*;
use crate::model::sql_string_literal;

/// `NOT` binds looser than comparisons, tighter than `AND`.
fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op: BinOp::Or, .. } => 1,
        Expr::Binary { op: BinOp::And, .. } => 2,
        Expr::Not(_) => 3,
        Expr::Binary { .. } | Expr::Is { .. } => 4,
        _ => 5,
    }
}

fn child(f: &mut Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn list<T: Display>(f: &mut Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, x) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

impl Display for Checked {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "CASE {}(", self.func)?;
        list(f, &self.args)?;
        let when = match self.kind {
            CheckKind::One => "1",
            CheckKind::True => "TRUE",
        };
        write!(f, ") WHEN {when} THEN {} ELSE throw_error() END", self.then)
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column {
                qualifier: Some(q),
                name,
            } => write!(f, "{q}.{name}"),
            Expr::Column { qualifier: None, name } => f.write_str(name),
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Str(s) => f.write_str(&sql_string_literal(s)),
            Expr::Bool(true) => f.write_str("TRUE"),
            Expr::Bool(false) => f.write_str("FALSE"),
            Expr::Null => f.write_str("NULL"),
            Expr::Binary { op, lhs, rhs } => {
                let (l, r) = match op {
                    BinOp::Or => (1, 2),
                    BinOp::And => (2, 3),
                    _ => (5, 5),
                };
                child(f, lhs, l)?;
                write!(f, " {} ", op.symbol())?;
                child(f, rhs, r)
            }
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                child(f, e, 3)
            }
            Expr::Is { expr, negated, test } => {
                child(f, expr, 5)?;
                f.write_str(if *negated { " IS NOT " } else { " IS " })?;
                f.write_str(match test {
                    IsTest::Null => "NULL",
                    IsTest::True => "TRUE",
                    IsTest::False => "FALSE",
                })
            }
            Expr::Func { name, args } => {
                write!(f, "{name}(")?;
                list(f, args)?;
                f.write_str(")")
            }
            Expr::CountStar => f.write_str("COUNT(*)"),
            Expr::Case {
                operand,
                branches,
                otherwise,
            } => {
                f.write_str("CASE")?;
                if let Some(o) = operand {
                    write!(f, " {o}")?;
                }
                for (w, t) in branches {
                    write!(f, " WHEN {w} THEN {t}")?;
                }
                if let Some(o) = otherwise {
                    write!(f, " ELSE {o}")?;
                }
                f.write_str(" END")
            }
            Expr::Exists(q) => write!(f, "EXISTS ({q})"),
            Expr::Subquery(q) => write!(f, "({q})"),
            Expr::Checked(c) => write!(f, "{c}"),
        }
    }
}

impl Display for SelectItem {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Wildcard => f.write_str("*"),
            SelectItem::Expr { expr, alias: None } => write!(f, "{expr}"),
            // generated checks keep the lower-case alias keyword of the
            // reference procedures
            SelectItem::Expr {
                expr: expr @ Expr::Checked(_),
                alias: Some(a),
            } => write!(f, "{expr} as {a}"),
            SelectItem::Expr { expr, alias: Some(a) } => write!(f, "{expr} AS {a}"),
        }
    }
}

impl Display for TableRef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            TableRef::Table { name, alias: None } => f.write_str(name),
            TableRef::Table {
                name,
                alias: Some(a),
            } => write!(f, "{name} {a}"),
            TableRef::Derived { query, alias } => write!(f, "({query}) AS {alias}"),
        }
    }
}

impl Query {
    /// The SELECT list as text.
    pub fn render_items(&self) -> String {
        let mut s = String::new();
        if self.distinct {
            s.push_str("DISTINCT ");
        }
        for (i, it) in self.items.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            write!(s, "{it}").expect("string write");
        }
        s
    }

    /// Everything after `FROM`, with joins and the WHERE clause.
    pub fn render_from(&self) -> String {
        let mut s = String::new();
        for (i, t) in self.from.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            write!(s, "{t}").expect("string write");
        }
        for j in &self.joins {
            write!(s, " JOIN {} ON {}", j.item, j.on).expect("string write");
        }
        s
    }
}

impl Display for Query {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "SELECT {} FROM {}", self.render_items(), self.render_from())?;
        if let Some(w) = &self.selection {
            write!(f, " WHERE {w}")?;
        }
        Ok(())
    }
}

pub fn render_sql(q: &Query) -> String {
    q.to_string()
}
