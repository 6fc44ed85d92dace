//! Loader for DDL and INSERT scripts in the exporters' format.

use super::{Database, HarnessError, Relation, SqlValue};
use crate::sql::Lineage;

struct TableDef {
    not_null: Vec<bool>,
    key: Vec<usize>,
}

pub(super) fn run(db: &mut Database, text: &str) -> Result<(), HarnessError> {
    let mut defs = std::collections::BTreeMap::new();
    for (n, stmt) in statements(text).into_iter().enumerate() {
        let fail = |message: String| HarnessError::Script {
            statement: n + 1,
            message,
        };
        let words: Vec<&str> = stmt.split_whitespace().take(2).collect();
        let head = words.iter().map(|w| w.to_ascii_uppercase()).collect::<Vec<_>>();
        match head.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["CREATE", "TABLE"] => {
                let (name, rel, def) = create_table(&stmt).map_err(fail)?;
                if db.tables.contains_key(&name) {
                    return Err(fail(format!("table {name} already exists")));
                }
                db.tables.insert(name.clone(), rel);
                defs.insert(name, def);
            }
            ["INSERT", "INTO"] => {
                let (name, cols, vals) = insert(&stmt).map_err(fail)?;
                let (Some(rel), Some(def)) = (db.tables.get_mut(&name), defs.get(&name)) else {
                    return Err(fail(format!("unknown table {name}")));
                };
                let mut row = vec![SqlValue::Null; rel.columns.len()];
                for (c, v) in cols.iter().zip(vals) {
                    let Some(i) = rel.columns.iter().position(|(n, _)| n == c) else {
                        return Err(fail(format!("unknown column {c}")));
                    };
                    row[i] = v;
                }
                if let Some(i) = (0..row.len()).find(|&i| def.not_null[i] && row[i] == SqlValue::Null) {
                    return Err(fail(format!("column {} cannot be null", rel.columns[i].0)));
                }
                let key = |r: &Vec<SqlValue>| def.key.iter().map(|&i| r[i].clone()).collect::<Vec<_>>();
                if !def.key.is_empty() && rel.rows.iter().any(|r| key(r) == key(&row)) {
                    return Err(fail(format!("duplicate entry for the primary key of {name}")));
                }
                rel.rows.push(row);
            }
            _ => return Err(fail("only CREATE TABLE and INSERT INTO are supported".into())),
        }
    }
    Ok(())
}

/// Splits on `;` outside string literals; drops empty statements.
fn statements(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for c in text.chars() {
        match c {
            '\'' => {
                quoted = !quoted;
                cur.push(c);
            }
            ';' if !quoted => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Splits on commas outside parentheses and quotes.
fn split_top(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let (mut depth, mut quoted) = (0usize, false);
    for c in s.chars() {
        match c {
            '\'' => quoted = !quoted,
            '(' if !quoted => depth += 1,
            ')' if !quoted => depth = depth.saturating_sub(1),
            ',' if !quoted && depth == 0 => {
                out.push(std::mem::take(&mut cur).trim().to_string());
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Text between the first `(` after `from` and its matching `)`.
fn parenthesized(s: &str, from: usize) -> Result<(&str, usize), String> {
    let open = s[from..].find('(').ok_or("expected `(`")? + from;
    let mut depth = 0;
    let mut quoted = false;
    for (i, c) in s[open..].char_indices() {
        match c {
            '\'' => quoted = !quoted,
            '(' if !quoted => depth += 1,
            ')' if !quoted => {
                depth -= 1;
                if depth == 0 {
                    return Ok((&s[open + 1..open + i], open + i + 1));
                }
            }
            _ => {}
        }
    }
    Err("unbalanced parentheses".into())
}

fn create_table(stmt: &str) -> Result<(String, Relation, TableDef), String> {
    let after = stmt.split_whitespace().nth(2).ok_or("missing table name")?;
    let name = after.split('(').next().unwrap_or_default().to_string();
    let (body, _) = parenthesized(stmt, 0)?;
    let mut rel = Relation::default();
    let mut not_null = Vec::new();
    let mut key_cols = Vec::new();
    for part in split_top(body) {
        let upper = part.to_ascii_uppercase();
        if upper.starts_with("PRIMARY KEY") {
            let (cols, _) = parenthesized(&part, 0)?;
            key_cols = cols.split(',').map(|c| c.trim().to_string()).collect();
        } else if upper.starts_with("FOREIGN KEY") {
            continue;
        } else {
            let col = part.split_whitespace().next().ok_or("empty column definition")?;
            rel.columns.push((col.to_string(), Lineage::Derived));
            not_null.push(upper.contains("NOT NULL"));
        }
    }
    let key = key_cols
        .iter()
        .map(|k| {
            rel.columns
                .iter()
                .position(|(n, _)| n == k)
                .ok_or(format!("key column {k} is not declared"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for &k in &key {
        not_null[k] = true;
    }
    Ok((name, rel, TableDef { not_null, key }))
}

fn literal(s: &str) -> Result<SqlValue, String> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("NULL") {
        return Ok(SqlValue::Null);
    }
    if let Some(inner) = s.strip_prefix('\'').and_then(|r| r.strip_suffix('\'')) {
        return Ok(SqlValue::Str(inner.replace("''", "'")));
    }
    s.parse().map(SqlValue::Int).map_err(|_| format!("bad literal `{s}`"))
}

fn insert(stmt: &str) -> Result<(String, Vec<String>, Vec<SqlValue>), String> {
    let after = stmt.split_whitespace().nth(2).ok_or("missing table name")?;
    let name = after.split('(').next().unwrap_or_default().to_string();
    let (cols, end) = parenthesized(stmt, 0)?;
    let rest = &stmt[end..];
    if !rest.trim_start().to_ascii_uppercase().starts_with("VALUES") {
        return Err("expected VALUES".into());
    }
    let (vals, _) = parenthesized(stmt, end)?;
    let cols: Vec<String> = cols.split(',').map(|c| c.trim().to_string()).collect();
    let vals = split_top(vals).iter().map(|v| literal(v)).collect::<Result<Vec<_>, _>>()?;
    if cols.len() != vals.len() {
        return Err("column and value counts differ".into());
    }
    Ok((name, cols, vals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitting_respects_quotes() {
        assert_eq!(statements("a 'x;y'; b;"), ["a 'x;y'", "b"]);
        assert_eq!(split_top("'a,b', (1, 2), c"), ["'a,b'", "(1, 2)", "c"]);
    }

    #[test]
    fn literals() {
        assert_eq!(literal("'it''s'"), Ok(SqlValue::Str("it's".into())));
        assert_eq!(literal("-4"), Ok(SqlValue::Int(-4)));
        assert_eq!(literal("null"), Ok(SqlValue::Null));
        assert!(literal("x").is_err());
    }
}
