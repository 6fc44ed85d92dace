//! Secured procedures against the reference texts.

use fgac_core::fixtures;
use fgac_core::ocl2sql::Registry;
use fgac_core::policy::SecurityModel;
use fgac_core::secquery::{secure_query_text, SecuredQuery};

fn normalize(s: &str) -> String {
    let spaced: String = s
        .chars()
        .flat_map(|c| match c {
            '(' | ')' | ',' | ';' => vec![' ', c, ' '],
            _ => vec![c],
        })
        .collect();
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn with_placeholders(s: &SecuredQuery, text: &str) -> String {
    let mut t = text.replace(&s.procedure.name, "<PROC>");
    for f in &s.functions {
        t = t.replace(&f.name, &format!("<AUTH {}>", f.resource));
    }
    t
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn secure(policy: &SecurityModel, n: usize) -> SecuredQuery {
    let reg = Registry::from_json(fixtures::REGISTRY_JSON).unwrap();
    secure_query_text(policy, &reg, fixtures::query(n)).unwrap()
}

#[test]
fn secured_procedures_match() {
    for (n, file) in [(4, "secured_q4.sql"), (5, "secured_q5.sql"), (6, "secured_q6.sql")] {
        let s = secure(&fixtures::secvgu2(), n);
        let got = with_placeholders(&s, &s.procedure.to_string());
        assert_eq!(normalize(&got), normalize(&golden(file)), "query {n}:\n{got}");
    }
}
