//! SQL frontend: parser, renderer and resource-access analysis for the
//! supported `SELECT` subset.
//!
//! Supported: `SELECT [DISTINCT]` with column, literal, comparison
//! (`= <> < <= > >= <=>`), `AND`/`OR`/`NOT`, `IS [NOT] NULL|TRUE|FALSE`,
//! function calls, `COUNT(*)`, `CASE`, `EXISTS` and scalar subqueries;
//! `FROM` lists of base tables and aliased derived tables; `[INNER] JOIN ...
//! ON`; `WHERE`. Grouping, ordering, limits, set operations and outer joins
//! are rejected with [`SqlError::UnsupportedFeature`].

mod access;
pub mod ast;
mod parser;
mod render;

use thiserror::Error;

pub use access::{
    output_name, resolve, resource_accesses, AssocAccess, AttrAccess, Lineage, Resolved, ResourceAccess, Scope,
    ScopeItem, PARAMETERS,
};
pub use ast::*;
pub use parser::{parse_sql, parse_sql_expr};
pub use render::render_sql;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SqlError {
    #[error("SQL syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unsupported SQL feature: {0}")]
    UnsupportedFeature(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("ambiguous column `{0}`")]
    AmbiguousColumn(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn case_study_queries_round_trip() {
        for n in 1..=6 {
            let q = parse_sql(fixtures::query(n)).unwrap();
            let text = render_sql(&q);
            assert_eq!(parse_sql(&text).unwrap(), q, "query {n}: {text}");
        }
        assert_eq!(
            render_sql(&parse_sql(fixtures::query(4)).unwrap()),
            "SELECT COUNT(*) FROM Student WHERE age > 18"
        );
    }

    #[test]
    fn precedence_is_preserved() {
        for text in [
            "SELECT * FROM t WHERE (a OR b) AND c",
            "SELECT * FROM t WHERE NOT (a AND b)",
            "SELECT * FROM t WHERE a AND (b AND c)",
            "SELECT * FROM t WHERE (a = b) IS NULL",
            "SELECT * FROM t WHERE NOT a = b",
            "SELECT * FROM t WHERE NOT EXISTS (SELECT 1 FROM u WHERE u.x <=> t.y)",
            "SELECT CASE WHEN a > -3 THEN 'it''s' ELSE NULL END AS c FROM t x, u JOIN v ON v.a = u.b",
        ] {
            let q = parse_sql(text).unwrap();
            assert_eq!(render_sql(&q), text);
        }
    }

    #[test]
    fn check_pattern_reads_as_a_check() {
        let e = parse_sql_expr("CASE f(caller, role, x) WHEN 1 THEN age ELSE throw_error() END").unwrap();
        let Expr::Checked(c) = &e else { panic!("{e:?}") };
        assert_eq!((c.func.as_str(), c.kind, c.args.len()), ("f", CheckKind::One, 3));
        assert!(matches!(
            parse_sql_expr("CASE f(x) WHEN 2 THEN age ELSE throw_error() END").unwrap(),
            Expr::Case { .. }
        ));
        assert!(matches!(
            parse_sql_expr("CASE f(x) WHEN TRUE THEN TRUE ELSE 0 END").unwrap(),
            Expr::Case { .. }
        ));
    }

    #[test]
    fn unsupported_clauses_are_named() {
        for (text, feature) in [
            ("SELECT a FROM t GROUP BY a", "GROUP"),
            ("SELECT a FROM t ORDER BY a", "ORDER"),
            ("SELECT a FROM t LEFT JOIN u ON a = b", "LEFT"),
            ("SELECT a FROM t UNION SELECT b FROM u", "UNION"),
            ("SELECT a FROM t LIMIT 3", "LIMIT"),
        ] {
            assert_eq!(parse_sql(text), Err(SqlError::UnsupportedFeature(feature.into())), "{text}");
        }
        assert!(matches!(parse_sql("SELECT FROM t"), Err(SqlError::Syntax { .. })));
    }
}
