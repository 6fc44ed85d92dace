use super::{typing, CmpOp, IterKind, Keywords, OclError, OclExpr};
use crate::model::DataModel;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Object(String),
    Dot,
    Arrow,
    LParen,
    RParen,
    Bar,
    Op(CmpOp),
    Minus,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, OclError> {
    let err = |pos: usize, message: &str| OclError::Syntax {
        pos,
        message: message.to_string(),
    };
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    // a `<` directly after an operand is a comparison, otherwise it may
    // open an object literal
    let operand_before = |out: &Vec<(usize, Tok)>| {
        match out.last() {
            Some((_, Tok::Ident(w))) => !matches!(w.as_str(), "and" | "or" | "not"),
            Some((_, Tok::Int(_) | Tok::Str(_) | Tok::Object(_) | Tok::RParen)) => true,
            _ => false,
        }
    };
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '.' => {
                out.push((pos, Tok::Dot));
                i += 1;
            }
            '→' => {
                out.push((pos, Tok::Arrow));
                i += 1;
            }
            '-' if chars.get(i + 1).map(|x| x.1) == Some('>') => {
                out.push((pos, Tok::Arrow));
                i += 2;
            }
            '-' => {
                out.push((pos, Tok::Minus));
                i += 1;
            }
            '(' => {
                out.push((pos, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((pos, Tok::RParen));
                i += 1;
            }
            '|' => {
                out.push((pos, Tok::Bar));
                i += 1;
            }
            '=' => {
                out.push((pos, Tok::Op(CmpOp::Eq)));
                i += 1;
            }
            '>' => {
                if chars.get(i + 1).map(|x| x.1) == Some('=') {
                    out.push((pos, Tok::Op(CmpOp::Ge)));
                    i += 2;
                } else {
                    out.push((pos, Tok::Op(CmpOp::Gt)));
                    i += 1;
                }
            }
            '<' => {
                let next = chars.get(i + 1).map(|x| x.1);
                if next == Some('>') {
                    out.push((pos, Tok::Op(CmpOp::Ne)));
                    i += 2;
                } else if next == Some('=') {
                    out.push((pos, Tok::Op(CmpOp::Le)));
                    i += 2;
                } else if !operand_before(&out) {
                    let mut j = i + 1;
                    let mut id = String::new();
                    while j < chars.len() && chars[j].1 != '>' {
                        id.push(chars[j].1);
                        j += 1;
                    }
                    if j == chars.len() || id.is_empty() {
                        return Err(err(pos, "unterminated object literal"));
                    }
                    out.push((pos, Tok::Object(id)));
                    i = j + 1;
                } else {
                    out.push((pos, Tok::Op(CmpOp::Lt)));
                    i += 1;
                }
            }
            '\'' => {
                let mut j = i + 1;
                let mut s = String::new();
                loop {
                    match chars.get(j).map(|x| x.1) {
                        None => return Err(err(pos, "unterminated string literal")),
                        Some('\'') => break,
                        Some('\\') => {
                            match chars.get(j + 1).map(|x| x.1) {
                                Some(e) => s.push(e),
                                None => return Err(err(pos, "unterminated string literal")),
                            }
                            j += 2;
                        }
                        Some(ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                out.push((pos, Tok::Str(s)));
                i = j + 1;
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                let mut s = String::new();
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    s.push(chars[j].1);
                    j += 1;
                }
                let v = s.parse().map_err(|_| err(pos, "integer literal out of range"))?;
                out.push((pos, Tok::Int(v)));
                i = j;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                let mut s = String::new();
                while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_') {
                    s.push(chars[j].1);
                    j += 1;
                }
                out.push((pos, Tok::Ident(s)));
                i = j;
            }
            other => return Err(err(pos, &format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    i: usize,
    end: usize,
    vars: Vec<String>,
}

const RESERVED: &[&str] = &["and", "or", "not", "true", "false", "null"];

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.i).map(|t| t.0).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, OclError> {
        Err(OclError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.1)
    }

    fn peek_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == w)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.i).map(|t| t.1.clone());
        self.i += 1;
        t
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), OclError> {
        if self.peek() == Some(&t) {
            self.i += 1;
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Result<String, OclError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                self.i += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn expr(&mut self) -> Result<OclExpr, OclError> {
        let mut lhs = self.and()?;
        while self.peek_word("or") {
            self.i += 1;
            lhs = OclExpr::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<OclExpr, OclError> {
        let mut lhs = self.unary()?;
        while self.peek_word("and") {
            self.i += 1;
            lhs = OclExpr::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<OclExpr, OclError> {
        if self.peek_word("not") {
            self.i += 1;
            return Ok(OclExpr::negate(self.unary()?));
        }
        self.compare()
    }

    fn compare(&mut self) -> Result<OclExpr, OclError> {
        let lhs = self.postfix()?;
        if let Some(Tok::Op(op)) = self.peek() {
            let op = *op;
            self.i += 1;
            let rhs = self.postfix()?;
            if let Some(Tok::Op(_)) = self.peek() {
                return self.err("comparisons do not chain; add parentheses");
            }
            return Ok(OclExpr::compare(op, lhs, rhs));
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<OclExpr, OclError> {
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Some(Tok::Dot) => {
                    self.i += 1;
                    let name = self.ident()?;
                    if self.peek() == Some(&Tok::LParen) {
                        if name != "allInstances" {
                            return self.err(format!("unsupported operation `{name}()`"));
                        }
                        self.i += 1;
                        self.expect(Tok::RParen, "`)`")?;
                        match e {
                            OclExpr::Keyword(c) => e = OclExpr::AllInstances(c),
                            _ => return self.err("allInstances() applies to a class name"),
                        }
                    } else {
                        e = OclExpr::nav(e, &name);
                    }
                }
                Some(Tok::Arrow) => {
                    self.i += 1;
                    let op = self.ident()?;
                    self.expect(Tok::LParen, "`(`")?;
                    e = match op.as_str() {
                        "select" | "exists" | "forAll" => {
                            let kind = match op.as_str() {
                                "select" => IterKind::Select,
                                "exists" => IterKind::Exists,
                                _ => IterKind::ForAll,
                            };
                            let var = self.ident()?;
                            self.expect(Tok::Bar, "`|`")?;
                            self.vars.push(var.clone());
                            let body = self.expr()?;
                            self.vars.pop();
                            OclExpr::iter(kind, e, &var, body)
                        }
                        "includes" => OclExpr::Includes(Box::new(e), Box::new(self.expr()?)),
                        "isEmpty" => OclExpr::IsEmpty(Box::new(e)),
                        other => return self.err(format!("unsupported collection operation `{other}`")),
                    };
                    self.expect(Tok::RParen, "`)`")?;
                }
                _ => return Ok(e),
            }
        }
    }

    fn primary(&mut self) -> Result<OclExpr, OclError> {
        match self.bump() {
            Some(Tok::Int(i)) => Ok(OclExpr::Int(i)),
            Some(Tok::Minus) => match self.bump() {
                Some(Tok::Int(i)) => Ok(OclExpr::Int(-i)),
                _ => {
                    self.i -= 1;
                    self.err("expected integer after `-`")
                }
            },
            Some(Tok::Str(s)) => Ok(OclExpr::Str(s)),
            Some(Tok::Object(id)) => Ok(OclExpr::Object(id)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(s)) => Ok(match s.as_str() {
                "true" => OclExpr::Bool(true),
                "false" => OclExpr::Bool(false),
                "null" => OclExpr::Null,
                "and" | "or" | "not" => {
                    self.i -= 1;
                    return self.err(format!("unexpected `{s}`"));
                }
                _ if self.vars.contains(&s) => OclExpr::Var(s),
                _ => OclExpr::Keyword(s),
            }),
            Some(_) => {
                self.i -= 1;
                self.err("unexpected token")
            }
            None => self.err("unexpected end of input"),
        }
    }
}

/// Parses without typing: bare identifiers that are not bound iterator
/// variables become keywords (or class names before `.allInstances()`).
pub fn parse_ocl_syntax(src: &str) -> Result<OclExpr, OclError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        i: 0,
        end: src.len(),
        vars: Vec::new(),
    };
    let e = p.expr()?;
    if p.i < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

/// Parses and type-checks a Boolean constraint under the keyword environment.
pub fn parse_ocl(src: &str, dm: &DataModel, keywords: &Keywords) -> Result<OclExpr, OclError> {
    let e = parse_ocl_syntax(src)?;
    typing::check_constraint(dm, keywords, &e)?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_case_study_constraints() {
        let e = parse_ocl_syntax("Lecturer.allInstances()->select(l|l.age > caller.age)->isEmpty()")
            .unwrap();
        assert_eq!(
            e.to_string(),
            "Lecturer.allInstances()->select(l | l.age > caller.age)->isEmpty()"
        );
        let e = parse_ocl_syntax("(caller = lecturers) or (caller.students→exists(s|s = students))")
            .unwrap();
        assert_eq!(e.to_string(), "caller = lecturers or caller.students->exists(s | s = students)");
    }

    #[test]
    fn iterator_variables_are_scoped() {
        let e = parse_ocl_syntax("x.students->exists(s | s = self) and s = self").unwrap();
        let OclExpr::And(a, b) = e else { panic!() };
        assert!(matches!(*a, OclExpr::Iter { .. }));
        assert_eq!(*b, OclExpr::compare(CmpOp::Eq, OclExpr::Keyword("s".into()), OclExpr::Keyword("self".into())));
    }

    #[test]
    fn object_literals_and_comparisons_coexist() {
        let e = parse_ocl_syntax("<Huong>.age < 3 and <Thanh> <> self").unwrap();
        assert_eq!(e.to_string(), "<Huong>.age < 3 and <Thanh> <> self");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_ocl_syntax("caller.age >") {
            Err(OclError::Syntax { pos, .. }) => assert_eq!(pos, 12),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_ocl_syntax("caller.students->size()"),
            Err(OclError::Syntax { .. })
        ));
        assert!(parse_ocl_syntax("a = b = c").is_err());
    }
}
