//! Optimized procedures against the reference fragments, with a real solver.

use fgac_core::fixtures;
use fgac_core::ocl2sql::Registry;
use fgac_core::optimizer::{load_facts, optimize, Disposition, Optimized, Solver};
use fgac_core::policy::SecurityModel;
use fgac_core::secquery::{secure_query_text, Step};

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

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn run(policy: &SecurityModel, n: usize, facts: &str) -> Optimized {
    let reg = Registry::from_json(fixtures::REGISTRY_JSON).unwrap();
    let sq = secure_query_text(policy, &reg, fixtures::query(n)).unwrap();
    let facts = load_facts(facts, &policy.data_model).unwrap();
    optimize(policy, &sq, &facts, &Solver::from_env(), 1).unwrap()
}

fn step_text(o: &Optimized, table: &str) -> String {
    let step = o.secured.procedure.steps.iter().find(|s| s.table() == table).unwrap();
    let mut t = step.to_string();
    for f in &o.secured.functions {
        t = t.replace(&f.name, &format!("<AUTH {}>", f.resource));
    }
    normalize(&t)
}

#[test]
fn case1_oldest_lecturer() {
    let o = run(&fixtures::secvgu1(), 4, fixtures::OLDEST_LECTURER_FACTS);
    assert_eq!(step_text(&o, "TEMP1"), normalize(&golden("optimized_case1.sql")));
    assert_eq!(o.reports[0].disposition, Disposition::Guarded);

    let o = run(&fixtures::secvgu2(), 4, fixtures::OLDEST_LECTURER_FACTS);
    assert!(o.secured.procedure.steps.iter().all(|s| matches!(s, Step::Create(_))));
    assert_eq!(o.reports[0].disposition, Disposition::Kept);
}

#[test]
fn case2_every_student() {
    let o = run(&fixtures::secvgu2(), 5, fixtures::EVERY_STUDENT_FACTS);
    assert_eq!(step_text(&o, "TEMP2"), normalize(&golden("optimized_case2.sql")));
}

#[test]
fn case3_own_enrolments() {
    let o = run(&fixtures::secvgu2(), 6, fixtures::OWN_ENROLMENTS_FACTS);
    assert_eq!(step_text(&o, "TEMP2"), normalize(&golden("optimized_case3_temp2.sql")));
    assert_eq!(step_text(&o, "TEMP5"), normalize(&golden("optimized_case3_temp5.sql")));
    assert!(o.reports.iter().all(|r| r.disposition == Disposition::Removed));
}
