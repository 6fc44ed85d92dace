//! Abstract syntax of the supported `SELECT` subset.
//!
//! There is no parenthesis node: grouping is implied by the tree shape and
//! reintroduced by the renderer where precedence requires it.

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    /// Comma-separated FROM items (cartesian product).
    pub from: Vec<TableRef>,
    pub joins: Vec<Join>,
    pub selection: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SelectItem {
    Wildcard,
    Expr { expr: Expr, alias: Option<String> },
}

impl SelectItem {
    pub fn expr(expr: Expr) -> SelectItem {
        SelectItem::Expr { expr, alias: None }
    }

    pub fn aliased(expr: Expr, alias: &str) -> SelectItem {
        SelectItem::Expr {
            expr,
            alias: Some(alias.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TableRef {
    Table { name: String, alias: Option<String> },
    Derived { query: Box<Query>, alias: String },
}

impl TableRef {
    pub fn table(name: &str) -> TableRef {
        TableRef::Table {
            name: name.to_string(),
            alias: None,
        }
    }

    /// The name columns of this item are qualified with.
    pub fn qualifier(&self) -> &str {
        match self {
            TableRef::Table { name, alias } => alias.as_deref().unwrap_or(name),
            TableRef::Derived { alias, .. } => alias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Join {
    pub item: TableRef,
    pub on: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    /// MySQL's null-safe equality `<=>`.
    NullSafeEq,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::NullSafeEq => "<=>",
            BinOp::And => "AND",
            BinOp::Or => "OR",
        }
    }

    pub fn is_comparison(self) -> bool {
        !matches!(self, BinOp::And | BinOp::Or)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IsTest {
    Null,
    True,
    False,
}

/// What an authorization function call must return for a guarded read to
/// proceed: `WHEN 1` for attribute reads, `WHEN TRUE` for association checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CheckKind {
    One,
    True,
}

/// `CASE func(args) WHEN 1|TRUE THEN then ELSE throw_error() END`; only
/// produced by the secured-query generator.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Checked {
    pub func: String,
    pub args: Vec<Expr>,
    pub kind: CheckKind,
    pub then: Box<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Column { qualifier: Option<String>, name: String },
    Int(i64),
    Str(String),
    Bool(bool),
    Null,
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Not(Box<Expr>),
    Is { expr: Box<Expr>, negated: bool, test: IsTest },
    Func { name: String, args: Vec<Expr> },
    CountStar,
    Case {
        operand: Option<Box<Expr>>,
        branches: Vec<(Expr, Expr)>,
        otherwise: Option<Box<Expr>>,
    },
    Exists(Box<Query>),
    Subquery(Box<Query>),
    Checked(Checked),
}

impl Expr {
    pub fn col(name: &str) -> Expr {
        Expr::Column {
            qualifier: None,
            name: name.to_string(),
        }
    }

    pub fn qcol(qualifier: &str, name: &str) -> Expr {
        Expr::Column {
            qualifier: Some(qualifier.to_string()),
            name: name.to_string(),
        }
    }

    pub fn str(s: &str) -> Expr {
        Expr::Str(s.to_string())
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn eq(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Eq, lhs, rhs)
    }

    pub fn and(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::And, lhs, rhs)
    }

    pub fn or(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(BinOp::Or, lhs, rhs)
    }

    /// Left-nested conjunction; `None` for an empty list.
    pub fn conjunction(parts: impl IntoIterator<Item = Expr>) -> Option<Expr> {
        parts.into_iter().reduce(Expr::and)
    }

    /// Top-level conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        match self {
            Expr::Binary {
                op: BinOp::And,
                lhs,
                rhs,
            } => {
                let mut v = lhs.conjuncts();
                v.extend(rhs.conjuncts());
                v
            }
            e => vec![e],
        }
    }

    pub fn is_aggregate(&self) -> bool {
        match self {
            Expr::CountStar => true,
            Expr::Func { name, .. } => {
                matches!(name.to_ascii_uppercase().as_str(), "COUNT" | "MAX" | "MIN" | "SUM")
            }
            _ => false,
        }
    }

    /// True if an aggregate occurs outside nested subqueries.
    pub fn contains_aggregate(&self) -> bool {
        let mut found = false;
        self.walk_shallow(&mut |e| found |= e.is_aggregate());
        found
    }

    /// Visits this expression and its sub-expressions, not entering subqueries.
    pub fn walk_shallow(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk_shallow(f);
                rhs.walk_shallow(f);
            }
            Expr::Not(e) | Expr::Is { expr: e, .. } => e.walk_shallow(f),
            Expr::Func { args, .. } => args.iter().for_each(|a| a.walk_shallow(f)),
            Expr::Case {
                operand,
                branches,
                otherwise,
            } => {
                if let Some(o) = operand {
                    o.walk_shallow(f);
                }
                for (w, t) in branches {
                    w.walk_shallow(f);
                    t.walk_shallow(f);
                }
                if let Some(o) = otherwise {
                    o.walk_shallow(f);
                }
            }
            Expr::Checked(c) => {
                c.args.iter().for_each(|a| a.walk_shallow(f));
                c.then.walk_shallow(f);
            }
            _ => {}
        }
    }

    /// Rewrites bottom-up; `f` sees children already rewritten. Subqueries
    /// are left untouched.
    pub fn rewrite_shallow(self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let e = match self {
            Expr::Binary { op, lhs, rhs } => Expr::Binary {
                op,
                lhs: Box::new(lhs.rewrite_shallow(f)),
                rhs: Box::new(rhs.rewrite_shallow(f)),
            },
            Expr::Not(e) => Expr::Not(Box::new(e.rewrite_shallow(f))),
            Expr::Is { expr, negated, test } => Expr::Is {
                expr: Box::new(expr.rewrite_shallow(f)),
                negated,
                test,
            },
            Expr::Func { name, args } => Expr::Func {
                name,
                args: args.into_iter().map(|a| a.rewrite_shallow(f)).collect(),
            },
            Expr::Case {
                operand,
                branches,
                otherwise,
            } => Expr::Case {
                operand: operand.map(|o| Box::new(o.rewrite_shallow(f))),
                branches: branches
                    .into_iter()
                    .map(|(w, t)| (w.rewrite_shallow(f), t.rewrite_shallow(f)))
                    .collect(),
                otherwise: otherwise.map(|o| Box::new(o.rewrite_shallow(f))),
            },
            Expr::Checked(c) => Expr::Checked(Checked {
                func: c.func,
                args: c.args.into_iter().map(|a| a.rewrite_shallow(f)).collect(),
                kind: c.kind,
                then: Box::new(c.then.rewrite_shallow(f)),
            }),
            leaf => leaf,
        };
        f(e)
    }

    /// Removes every runtime check, keeping the guarded expressions.
    pub fn strip_checks(self, keep: &impl Fn(&Checked) -> bool) -> Expr {
        self.rewrite_shallow(&mut |e| match e {
            Expr::Checked(c) if !keep(&c) => *c.then,
            e => e,
        })
    }
}
