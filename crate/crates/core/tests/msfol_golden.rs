//! Generated elimination problems against the reference scripts.

use fgac_core::fixtures;
use fgac_core::msfol::{data_model_theory, elimination_problem, SmtScript};
use fgac_core::ocl::parse_ocl;
use fgac_core::policy::{Resource, SecurityModel};

fn normalize(s: &str) -> String {
    let spaced: String = s
        .replace("invalidClassifier", "invalClassifier")
        .chars()
        .flat_map(|c| match c {
            '(' | ')' => vec![' ', c, ' '],
            _ => vec![c],
        })
        .collect();
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

fn problem(policy: &SecurityModel, resource: &str, fact: &str) -> String {
    let res: Resource = resource.parse().unwrap();
    let kw = policy.keywords(&res).unwrap();
    let fact = parse_ocl(fact, &policy.data_model, &kw).unwrap();
    let auth = policy.lookup_auth("Lecturer", &res).unwrap();
    elimination_problem(&policy.data_model, &kw, &[fact], &auth).unwrap().to_string()
}

const OLDEST: &str = "Lecturer.allInstances()->forAll(l | l.age <= caller.age)";
const EVERY: &str = "Student.allInstances()->forAll(s | s.lecturers->includes(caller))";

#[test]
fn theory_matches() {
    let t = SmtScript {
        commands: data_model_theory(&fixtures::university()),
    };
    assert_eq!(normalize(&t.to_string()), normalize(&golden("university_theory.smt2")));
}

#[test]
fn elimination_scripts_match() {
    let cases = [
        ("case1_secvgu1.smt2", fixtures::secvgu1(), "Student:age", OLDEST),
        ("case1_secvgu2.smt2", fixtures::secvgu2(), "Student:age", OLDEST),
        ("case2_secvgu2.smt2", fixtures::secvgu2(), "Enrolment", EVERY),
        ("case3a_secvgu2.smt2", fixtures::secvgu2(), "Enrolment", "caller = lecturers"),
        ("case3b_secvgu2.smt2", fixtures::secvgu2(), "Student:age", "caller.students->includes(self)"),
    ];
    for (file, policy, res, fact) in cases {
        let got = normalize(&problem(&policy, res, fact));
        let want = normalize(&golden(file));
        assert_eq!(got, want, "{file}");
    }
}
