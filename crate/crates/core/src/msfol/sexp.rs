//! S-expressions with a width-bounded pretty printer.

use std::fmt;

const WIDTH: usize = 80;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

pub fn atom(s: impl Into<String>) -> Sexp {
    Sexp::Atom(s.into())
}

/// `(head args...)`
pub fn app(head: &str, args: impl IntoIterator<Item = Sexp>) -> Sexp {
    let mut v = vec![atom(head)];
    v.extend(args);
    Sexp::List(v)
}

impl Sexp {
    pub fn is_atom(&self, s: &str) -> bool {
        matches!(self, Sexp::Atom(a) if a == s)
    }

    /// Conjunction; a single operand stands alone and none gives `true`.
    pub fn and(parts: Vec<Sexp>) -> Sexp {
        Sexp::connective("and", "true", parts)
    }

    /// Disjunction; a single operand stands alone and none gives `false`.
    pub fn or(parts: Vec<Sexp>) -> Sexp {
        Sexp::connective("or", "false", parts)
    }

    fn connective(op: &str, unit: &str, mut parts: Vec<Sexp>) -> Sexp {
        match parts.len() {
            0 => atom(unit),
            1 => parts.pop().expect("one element"),
            _ => app(op, parts),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Sexp) -> Sexp {
        app("not", [f])
    }

    pub fn eq(a: Sexp, b: Sexp) -> Sexp {
        app("=", [a, b])
    }

    pub fn implies(a: Sexp, b: Sexp) -> Sexp {
        app("=>", [a, b])
    }

    /// `(q ((v Classifier)...) body)` for `q` = forall or exists.
    pub fn quantified(q: &str, vars: &[&str], body: Sexp) -> Sexp {
        let decls = vars
            .iter()
            .map(|v| Sexp::List(vec![atom(*v), atom("Classifier")]))
            .collect();
        app(q, [Sexp::List(decls), body])
    }

    pub fn pretty(&self) -> String {
        let mut out = String::new();
        self.write_pretty(0, &mut out);
        out
    }

    fn write_pretty(&self, indent: usize, out: &mut String) {
        let flat = self.to_string();
        let items = match self {
            Sexp::List(items) if indent + flat.len() > WIDTH && items.len() > 1 => items,
            _ => {
                out.push_str(&flat);
                return;
            }
        };
        out.push('(');
        out.push_str(&items[0].to_string());
        for it in &items[1..] {
            out.push('\n');
            out.push_str(&" ".repeat(indent + 2));
            it.write_pretty(indent + 2, out);
        }
        out.push(')');
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}
