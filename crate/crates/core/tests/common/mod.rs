//! Random scenarios and OCL constraints over the University model.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use fgac_core::model::{Scenario, Value};

pub const LECTURERS: [&str; 4] = ["Huong", "Manuel", "Hieu", "Lan"];
pub const STUDENTS: [&str; 4] = ["Thanh", "Chau", "Binh", "An"];

/// A random scenario over the first `nl` lecturers and `ns` students.
/// Lecturer ages are never null; student ages and emails sometimes are.
pub fn random_scenario(rng: &mut ChaCha8Rng, nl: usize, ns: usize, link_p: f64) -> Scenario {
    let mut sc = Scenario::default();
    let email = |rng: &mut ChaCha8Rng, id: &str| {
        if rng.gen_bool(0.2) {
            Value::Null
        } else {
            Value::Str(format!("{}@vgu.edu.vn", id.to_lowercase()))
        }
    };
    for id in &LECTURERS[..nl] {
        let attrs = [
            ("age", Value::Int(rng.gen_range(30..=36))),
            ("email", email(rng, id)),
            ("name", Value::Str(id.to_string())),
        ];
        sc.add_object("Lecturer", id, &attrs);
    }
    for id in &STUDENTS[..ns] {
        let age = if rng.gen_bool(0.15) {
            Value::Null
        } else {
            Value::Int(rng.gen_range(16..=22))
        };
        let attrs = [("age", age), ("email", email(rng, id)), ("name", Value::Str(id.to_string()))];
        sc.add_object("Student", id, &attrs);
    }
    for l in &LECTURERS[..nl] {
        for s in &STUDENTS[..ns] {
            if rng.gen_bool(link_p) {
                sc.add_link("Enrolment", l, s);
            }
        }
    }
    sc.normalized()
}

/// Random boolean OCL over the University model with keywords `caller`
/// (Lecturer) and `self` (Student).
pub struct OclGen<'r> {
    pub rng: &'r mut ChaCha8Rng,
    pub fresh: usize,
}

impl OclGen<'_> {
    fn var(&mut self) -> String {
        self.fresh += 1;
        format!("v{}", self.fresh)
    }

    fn object(&mut self, class: &str, scope: &[(String, String)]) -> String {
        let mut pool: Vec<String> = scope.iter().filter(|(_, c)| c == class).map(|(v, _)| v.clone()).collect();
        pool.push(if class == "Lecturer" { "caller".into() } else { "self".into() });
        pool.choose(self.rng).unwrap().clone()
    }

    fn collection(&mut self, class: &str, depth: u32, scope: &[(String, String)]) -> String {
        match self.rng.gen_range(0..if depth > 0 { 3 } else { 2 }) {
            0 => format!("{class}.allInstances()"),
            1 => {
                let (other, end) = if class == "Student" {
                    ("Lecturer", "students")
                } else {
                    ("Student", "lecturers")
                };
                format!("{}.{end}", self.object(other, scope))
            }
            _ => {
                let v = self.var();
                let src = self.collection(class, depth - 1, scope);
                let mut inner = scope.to_vec();
                inner.push((v.clone(), class.to_string()));
                let body = self.boolean(depth - 1, &inner);
                format!("{src}->select({v} | {body})")
            }
        }
    }

    /// An integer term; `null` only where the comparison is an equality.
    fn int(&mut self, scope: &[(String, String)], nullable: bool) -> String {
        match self.rng.gen_range(0..6) {
            0 => self.rng.gen_range(15..40).to_string(),
            1 if nullable => "null".into(),
            1..=3 => format!("{}.age", self.object("Lecturer", scope)),
            _ => format!("{}.age", self.object("Student", scope)),
        }
    }

    fn string(&mut self, scope: &[(String, String)]) -> String {
        let class = *["Lecturer", "Student"].choose(self.rng).unwrap();
        match self.rng.gen_range(0..5) {
            0 => format!("'{}'", LECTURERS.iter().chain(&STUDENTS).collect::<Vec<_>>().choose(self.rng).unwrap()),
            1 => "null".into(),
            2 => format!("{}.name", self.object(class, scope)),
            _ => format!("{}.email", self.object(class, scope)),
        }
    }

    pub fn boolean(&mut self, depth: u32, scope: &[(String, String)]) -> String {
        let class = *["Lecturer", "Student"].choose(self.rng).unwrap();
        let leaf = self.rng.gen_range(0..6);
        let pick = if depth == 0 { leaf } else { self.rng.gen_range(0..12) };
        match pick {
            0 | 1 => {
                let op = *["=", "<>", "<", "<=", ">", ">="].choose(self.rng).unwrap();
                let nullable = matches!(op, "=" | "<>");
                format!("{} {op} {}", self.int(scope, nullable), self.int(scope, nullable))
            }
            2 => {
                let op = *["=", "<>"].choose(self.rng).unwrap();
                format!("{} {op} {}", self.string(scope), self.string(scope))
            }
            3 => format!("{} = {}", self.object(class, scope), self.object(class, scope)),
            4 => format!("{}->includes({})", self.collection(class, depth, scope), self.object(class, scope)),
            5 => format!("{}->isEmpty()", self.collection(class, depth, scope)),
            6 => format!("not ({})", self.boolean(depth - 1, scope)),
            7 | 8 => {
                let op = *["and", "or"].choose(self.rng).unwrap();
                format!("({}) {op} ({})", self.boolean(depth - 1, scope), self.boolean(depth - 1, scope))
            }
            _ => {
                let kind = *["forAll", "exists"].choose(self.rng).unwrap();
                let v = self.var();
                let src = self.collection(class, depth - 1, scope);
                let mut inner = scope.to_vec();
                inner.push((v.clone(), class.to_string()));
                let body = self.boolean(depth - 1, &inner);
                format!("{src}->{kind}({v} | {body})")
            }
        }
    }
}

