//! The University case study bundled with the crate: data model, the three
//! policies, the manual SQL registry, the six example queries and the
//! context facts used for optimisation.

use std::sync::Arc;

use crate::model::DataModel;
use crate::policy::SecurityModel;

pub const UNIVERSITY_JSON: &str = include_str!("../../../data/university.json");
pub const SECVGU1_JSON: &str = include_str!("../../../data/policies/SecVGU1.json");
pub const SECVGU2_JSON: &str = include_str!("../../../data/policies/SecVGU2.json");
pub const SECVGUA_JSON: &str = include_str!("../../../data/policies/SecVGUA.json");
pub const REGISTRY_JSON: &str = include_str!("../../../data/registry.json");
pub const OLDEST_LECTURER_FACTS: &str = include_str!("../../../data/facts/oldest_lecturer.json");
pub const EVERY_STUDENT_FACTS: &str = include_str!("../../../data/facts/lecturer_of_every_student.json");
pub const OWN_ENROLMENTS_FACTS: &str = include_str!("../../../data/facts/own_enrolments.json");
pub const VGU_SCENARIO_JSON: &str = include_str!("../../../data/scenarios/vgu.json");

/// Query texts, indexed from 1.
pub const QUERIES: [&str; 6] = [
    include_str!("../../../data/queries/q1.sql"),
    include_str!("../../../data/queries/q2.sql"),
    include_str!("../../../data/queries/q3.sql"),
    include_str!("../../../data/queries/q4.sql"),
    include_str!("../../../data/queries/q5.sql"),
    include_str!("../../../data/queries/q6.sql"),
];

pub fn query(n: usize) -> &'static str {
    QUERIES[n - 1].trim()
}

pub fn university() -> DataModel {
    DataModel::from_json(UNIVERSITY_JSON).expect("bundled model is valid")
}

fn policy(text: &str) -> SecurityModel {
    SecurityModel::from_json(text, Arc::new(university())).expect("bundled policy is valid")
}

pub fn secvgu1() -> SecurityModel {
    policy(SECVGU1_JSON)
}

pub fn secvgu2() -> SecurityModel {
    policy(SECVGU2_JSON)
}

pub fn secvgua() -> SecurityModel {
    policy(SECVGUA_JSON)
}
