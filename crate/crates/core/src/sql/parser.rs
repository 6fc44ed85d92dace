use super::ast::*;
use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    /// Upper-cased reserved word.
    Kw(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
}

const KEYWORDS: &[&str] = &[
    "SELECT", "DISTINCT", "FROM", "WHERE", "JOIN", "INNER", "ON", "AS", "AND", "OR", "NOT",
    "EXISTS", "CASE", "WHEN", "THEN", "ELSE", "END", "NULL", "TRUE", "FALSE", "IS", "GROUP",
    "ORDER", "BY", "HAVING", "LIMIT", "UNION", "LEFT", "RIGHT", "FULL", "OUTER", "CROSS",
    "NATURAL", "INSERT", "UPDATE", "DELETE", "OFFSET", "INTERSECT", "EXCEPT", "WITH", "USING",
    "CREATE", "VALUES", "INTO", "TABLE",
];

/// Words that start a clause or statement this subset does not support.
const UNSUPPORTED: &[&str] = &[
    "GROUP", "ORDER", "HAVING", "LIMIT", "UNION", "LEFT", "RIGHT", "FULL", "OUTER", "CROSS",
    "NATURAL", "INSERT", "UPDATE", "DELETE", "OFFSET", "INTERSECT", "EXCEPT", "WITH", "USING",
];

pub(crate) fn lex(src: &str) -> Result<Vec<(usize, Tok)>, SqlError> {
    let err = |pos: usize, message: String| SqlError::Syntax { pos, message };
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == '-' && b.get(i + 1) == Some(&b'-') {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || c == '@' {
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'@') {
                i += 1;
            }
            let word = &src[start..i];
            let upper = word.to_ascii_uppercase();
            if KEYWORDS.contains(&upper.as_str()) {
                out.push((start, Tok::Kw(upper)));
            } else {
                out.push((start, Tok::Ident(word.to_string())));
            }
            continue;
        }
        if c == '`' {
            i += 1;
            while i < b.len() && b[i] != b'`' {
                i += 1;
            }
            if i == b.len() {
                return Err(err(start, "unterminated quoted identifier".into()));
            }
            out.push((start, Tok::Ident(src[start + 1..i].to_string())));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let v = src[start..i]
                .parse()
                .map_err(|_| err(start, "integer literal out of range".into()))?;
            out.push((start, Tok::Int(v)));
            continue;
        }
        if c == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                match b.get(i) {
                    None => return Err(err(start, "unterminated string literal".into())),
                    Some(b'\'') if b.get(i + 1) == Some(&b'\'') => {
                        s.push('\'');
                        i += 2;
                    }
                    Some(b'\'') => {
                        i += 1;
                        break;
                    }
                    Some(_) => {
                        let ch = src[i..].chars().next().expect("in bounds");
                        s.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            out.push((start, Tok::Str(s)));
            continue;
        }
        let rest = &src[i..];
        let sym = ["<=>", "<>", "!=", "<=", ">=", "=", "<", ">", "(", ")", ",", ".", "*", ";", "-"]
            .into_iter()
            .find(|s| rest.starts_with(s));
        match sym {
            Some(s) => {
                out.push((start, Tok::Sym(if s == "!=" { "<>" } else { s })));
                i += s.len();
            }
            None => {
                let ch = rest.chars().next().expect("in bounds");
                return Err(err(start, format!("unexpected character `{ch}`")));
            }
        }
    }
    Ok(out)
}

pub(crate) struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
    end: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Parser, SqlError> {
        Ok(Parser {
            toks: lex(src)?,
            i: 0,
            end: src.len(),
        })
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map(|t| t.0).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SqlError> {
        if let Some(Tok::Kw(k)) = self.peek() {
            if UNSUPPORTED.contains(&k.as_str()) {
                return Err(SqlError::UnsupportedFeature(k.clone()));
            }
        }
        Err(SqlError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.1)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.i + k).map(|t| &t.1)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Kw(w)) if w == k)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), SqlError> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.err(format!("expected {k}"))
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> Result<String, SqlError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.i += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.i >= self.toks.len()
    }

    pub(crate) fn finish(&mut self) -> Result<(), SqlError> {
        while self.eat_sym(";") {}
        if self.at_end() {
            Ok(())
        } else {
            self.err("unexpected trailing input")
        }
    }

    pub(crate) fn query(&mut self) -> Result<Query, SqlError> {
        if !self.is_kw("SELECT") {
            return self.err("expected SELECT");
        }
        self.i += 1;
        let distinct = self.eat_kw("DISTINCT");
        let mut items = vec![self.select_item()?];
        while self.eat_sym(",") {
            items.push(self.select_item()?);
        }
        self.expect_kw("FROM")?;
        let mut from = vec![self.table_ref()?];
        while self.eat_sym(",") {
            from.push(self.table_ref()?);
        }
        let mut joins = Vec::new();
        loop {
            if self.is_kw("INNER") && matches!(self.peek_at(1), Some(Tok::Kw(k)) if k == "JOIN") {
                self.i += 2;
            } else if !self.eat_kw("JOIN") {
                break;
            }
            let item = self.table_ref()?;
            self.expect_kw("ON")?;
            let on = self.expr()?;
            joins.push(Join { item, on });
        }
        let selection = if self.eat_kw("WHERE") { Some(self.expr()?) } else { None };
        if let Some(Tok::Kw(k)) = self.peek() {
            if UNSUPPORTED.contains(&k.as_str()) {
                return Err(SqlError::UnsupportedFeature(k.clone()));
            }
        }
        Ok(Query {
            distinct,
            items,
            from,
            joins,
            selection,
        })
    }

    fn alias(&mut self) -> Result<Option<String>, SqlError> {
        if self.eat_kw("AS") {
            return Ok(Some(self.ident()?));
        }
        if let Some(Tok::Ident(s)) = self.peek() {
            let s = s.clone();
            self.i += 1;
            return Ok(Some(s));
        }
        Ok(None)
    }

    fn select_item(&mut self) -> Result<SelectItem, SqlError> {
        if self.eat_sym("*") {
            return Ok(SelectItem::Wildcard);
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn table_ref(&mut self) -> Result<TableRef, SqlError> {
        if self.eat_sym("(") {
            let query = self.query()?;
            self.expect_sym(")")?;
            return match self.alias()? {
                Some(alias) => Ok(TableRef::Derived {
                    query: Box::new(query),
                    alias,
                }),
                None => self.err("derived table requires an alias"),
            };
        }
        let name = self.ident()?;
        let alias = self.alias()?;
        Ok(TableRef::Table { name, alias })
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, SqlError> {
        let mut lhs = self.and()?;
        while self.eat_kw("OR") {
            lhs = Expr::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, SqlError> {
        let mut lhs = self.not()?;
        while self.eat_kw("AND") {
            lhs = Expr::and(lhs, self.not()?);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, SqlError> {
        if self.eat_kw("NOT") {
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SqlError> {
        let mut lhs = self.primary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym("=")) => BinOp::Eq,
                Some(Tok::Sym("<>")) => BinOp::Ne,
                Some(Tok::Sym("<")) => BinOp::Lt,
                Some(Tok::Sym("<=")) => BinOp::Le,
                Some(Tok::Sym(">")) => BinOp::Gt,
                Some(Tok::Sym(">=")) => BinOp::Ge,
                Some(Tok::Sym("<=>")) => BinOp::NullSafeEq,
                Some(Tok::Kw(k)) if k == "IS" => {
                    self.i += 1;
                    let negated = self.eat_kw("NOT");
                    let test = if self.eat_kw("NULL") {
                        IsTest::Null
                    } else if self.eat_kw("TRUE") {
                        IsTest::True
                    } else if self.eat_kw("FALSE") {
                        IsTest::False
                    } else {
                        return self.err("expected NULL, TRUE or FALSE after IS");
                    };
                    lhs = Expr::Is {
                        expr: Box::new(lhs),
                        negated,
                        test,
                    };
                    continue;
                }
                _ => return Ok(lhs),
            };
            self.i += 1;
            let rhs = self.primary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn primary(&mut self) -> Result<Expr, SqlError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        match tok {
            Tok::Int(v) => {
                self.i += 1;
                Ok(Expr::Int(v))
            }
            Tok::Sym("-") => {
                self.i += 1;
                match self.peek() {
                    Some(Tok::Int(v)) => {
                        let v = -*v;
                        self.i += 1;
                        Ok(Expr::Int(v))
                    }
                    _ => self.err("expected integer after `-`"),
                }
            }
            Tok::Str(s) => {
                self.i += 1;
                Ok(Expr::Str(s))
            }
            Tok::Kw(k) => match k.as_str() {
                "NULL" => {
                    self.i += 1;
                    Ok(Expr::Null)
                }
                "TRUE" | "FALSE" => {
                    self.i += 1;
                    Ok(Expr::Bool(k == "TRUE"))
                }
                "EXISTS" => {
                    self.i += 1;
                    self.expect_sym("(")?;
                    let q = self.query()?;
                    self.expect_sym(")")?;
                    Ok(Expr::Exists(Box::new(q)))
                }
                "CASE" => {
                    self.i += 1;
                    self.case()
                }
                _ => self.err(format!("unexpected {k}")),
            },
            Tok::Sym("(") => {
                self.i += 1;
                if self.is_kw("SELECT") {
                    let q = self.query()?;
                    self.expect_sym(")")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.i += 1;
                if self.eat_sym("(") {
                    if name.eq_ignore_ascii_case("COUNT") && self.is_sym("*") {
                        self.i += 1;
                        self.expect_sym(")")?;
                        return Ok(Expr::CountStar);
                    }
                    let mut args = Vec::new();
                    if !self.eat_sym(")") {
                        args.push(self.expr()?);
                        while self.eat_sym(",") {
                            args.push(self.expr()?);
                        }
                        self.expect_sym(")")?;
                    }
                    return Ok(Expr::Func { name, args });
                }
                if self.eat_sym(".") {
                    let col = self.ident()?;
                    return Ok(Expr::qcol(&name, &col));
                }
                Ok(Expr::col(&name))
            }
            _ => self.err("unexpected token"),
        }
    }

    fn case(&mut self) -> Result<Expr, SqlError> {
        let operand = if self.is_kw("WHEN") { None } else { Some(Box::new(self.expr()?)) };
        let mut branches = Vec::new();
        while self.eat_kw("WHEN") {
            let w = self.expr()?;
            self.expect_kw("THEN")?;
            let t = self.expr()?;
            branches.push((w, t));
        }
        if branches.is_empty() {
            return self.err("CASE requires at least one WHEN");
        }
        let otherwise = if self.eat_kw("ELSE") { Some(Box::new(self.expr()?)) } else { None };
        self.expect_kw("END")?;
        Ok(checked_form(operand, branches, otherwise))
    }
}

/// `CASE f(..) WHEN 1 THEN x ELSE throw_error() END` (or `WHEN TRUE`) is a
/// runtime check; any other CASE stays as written.
fn checked_form(operand: Option<Box<Expr>>, mut branches: Vec<(Expr, Expr)>, otherwise: Option<Box<Expr>>) -> Expr {
    let is_throw = |e: &Option<Box<Expr>>| {
        matches!(e.as_deref(), Some(Expr::Func { name, args }) if name.eq_ignore_ascii_case("throw_error") && args.is_empty())
    };
    if let (Some(Expr::Func { name, args }), 1) = (operand.as_deref(), branches.len()) {
        let kind = match branches[0].0 {
            Expr::Int(1) => Some(CheckKind::One),
            Expr::Bool(true) => Some(CheckKind::True),
            _ => None,
        };
        if let (Some(kind), true) = (kind, is_throw(&otherwise)) {
            let (_, then) = branches.pop().expect("one branch");
            return Expr::Checked(Checked {
                func: name.clone(),
                args: args.clone(),
                kind,
                then: Box::new(then),
            });
        }
    }
    Expr::Case {
        operand,
        branches,
        otherwise,
    }
}

/// Parses one `SELECT` statement (an optional trailing `;` is accepted).
pub fn parse_sql(src: &str) -> Result<Query, SqlError> {
    let mut p = Parser::new(src)?;
    let q = p.query()?;
    p.finish()?;
    Ok(q)
}

/// Parses a standalone SQL expression, e.g. a guard or a constraint body.
pub fn parse_sql_expr(src: &str) -> Result<Expr, SqlError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}
