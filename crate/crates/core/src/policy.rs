//! Role-based, fine-grained read policies.
//!
//! A [`SecurityModel`] assigns to each (role, resource) pair an OCL
//! authorization constraint. Resources are class attributes (`Class:attr`)
//! and associations. Decisions fail closed: anything but a literal `true`
//! denies, and so does a missing rule.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::model::{DataModel, ObjectRef, Scenario};
use crate::ocl::{eval_ocl, parse_ocl, Binding, KeywordRole, Keywords, OclError, OclExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("malformed policy document: {0}")]
    Parse(String),
    #[error("policy refers to data model {found}, expected {expected}")]
    ModelMismatch { expected: String, found: String },
    #[error("unknown resource `{0}`")]
    UnknownResource(String),
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("unknown user class `{0}`")]
    UnknownUserClass(String),
    #[error("duplicate rule for role {role} on {resource}")]
    DuplicateRule { role: String, resource: Resource },
    #[error("constraint for role {role} on {resource}: {source}")]
    Constraint {
        role: String,
        resource: Resource,
        source: Box<OclError>,
    },
    #[error("evaluation failed: {0}")]
    Eval(OclError),
    #[error("{0}")]
    BadTarget(String),
}

/// A protected piece of information.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resource {
    Attribute { class: String, attribute: String },
    Association { association: String },
}

impl Resource {
    pub fn attribute(class: &str, attribute: &str) -> Resource {
        Resource::Attribute {
            class: class.to_string(),
            attribute: attribute.to_string(),
        }
    }

    pub fn association(name: &str) -> Resource {
        Resource::Association {
            association: name.to_string(),
        }
    }

    /// Checks that the resource exists in `dm`.
    pub fn validate(&self, dm: &DataModel) -> Result<(), PolicyError> {
        let ok = match self {
            Resource::Attribute { class, attribute } => dm.attribute(class, attribute).is_some(),
            Resource::Association { association } => dm.association(association).is_some(),
        };
        if ok {
            Ok(())
        } else {
            Err(PolicyError::UnknownResource(self.to_string()))
        }
    }

    /// Keywords available to a constraint on this resource: `caller` plus
    /// `self` for attributes, or the two end names for associations.
    pub fn keywords(&self, dm: &DataModel, user_class: &str) -> Result<Keywords, PolicyError> {
        self.validate(dm)?;
        let kw = Keywords::new().with("caller", user_class, KeywordRole::Caller);
        Ok(match self {
            Resource::Attribute { class, .. } => kw.with("self", class, KeywordRole::SelfObject),
            Resource::Association { association } => {
                let a = dm.association(association).expect("validated");
                kw.with(&a.end1.name, &a.end1.class, KeywordRole::AssociationEnd)
                    .with(&a.end2.name, &a.end2.class, KeywordRole::AssociationEnd)
            }
        })
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resource::Attribute { class, attribute } => write!(f, "{class}:{attribute}"),
            Resource::Association { association } => f.write_str(association),
        }
    }
}

impl FromStr for Resource {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Resource, PolicyError> {
        let bad = || PolicyError::UnknownResource(s.to_string());
        let s = s.trim();
        match s.split_once(':') {
            Some((c, a)) if !c.is_empty() && !a.is_empty() && !a.contains(':') => {
                Ok(Resource::attribute(c, a))
            }
            Some(_) => Err(bad()),
            None if !s.is_empty() => Ok(Resource::association(s)),
            None => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub role: String,
    pub resource: Resource,
    pub constraint: OclExpr,
    /// Constraint text as written in the policy document.
    pub source: String,
}

#[derive(Debug, Clone)]
pub struct SecurityModel {
    pub name: String,
    pub data_model: Arc<DataModel>,
    pub user_class: String,
    pub roles: BTreeSet<String>,
    rules: BTreeMap<(String, Resource), Rule>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct PolicyDoc {
    name: String,
    data_model: String,
    user_class: String,
    roles: Vec<String>,
    #[serde(default)]
    rules: Vec<RuleDoc>,
}

#[derive(Deserialize)]
struct RuleDoc {
    role: String,
    resource: String,
    constraint: String,
}

impl SecurityModel {
    pub fn new(
        name: &str,
        data_model: Arc<DataModel>,
        user_class: &str,
        roles: &[&str],
    ) -> Result<SecurityModel, PolicyError> {
        if data_model.class(user_class).is_none() {
            return Err(PolicyError::UnknownUserClass(user_class.to_string()));
        }
        Ok(SecurityModel {
            name: name.to_string(),
            data_model,
            user_class: user_class.to_string(),
            roles: roles.iter().map(|r| r.to_string()).collect(),
            rules: BTreeMap::new(),
        })
    }

    /// Parses, type-checks and stores one rule.
    pub fn add_rule(&mut self, role: &str, resource: Resource, constraint: &str) -> Result<(), PolicyError> {
        if !self.roles.contains(role) {
            return Err(PolicyError::UnknownRole(role.to_string()));
        }
        let kw = resource.keywords(&self.data_model, &self.user_class)?;
        let parsed = parse_ocl(constraint, &self.data_model, &kw).map_err(|source| PolicyError::Constraint {
            role: role.to_string(),
            resource: resource.clone(),
            source: Box::new(source),
        })?;
        let key = (role.to_string(), resource.clone());
        if self.rules.contains_key(&key) {
            return Err(PolicyError::DuplicateRule {
                role: role.to_string(),
                resource,
            });
        }
        self.rules.insert(
            key,
            Rule {
                role: role.to_string(),
                resource,
                constraint: parsed,
                source: constraint.to_string(),
            },
        );
        Ok(())
    }

    pub fn from_json(text: &str, dm: Arc<DataModel>) -> Result<SecurityModel, PolicyError> {
        let doc: PolicyDoc = serde_json::from_str(text).map_err(|e| PolicyError::Parse(e.to_string()))?;
        if doc.data_model != dm.name {
            return Err(PolicyError::ModelMismatch {
                expected: dm.name.clone(),
                found: doc.data_model,
            });
        }
        let roles: Vec<&str> = doc.roles.iter().map(String::as_str).collect();
        let mut s = SecurityModel::new(&doc.name, dm, &doc.user_class, &roles)?;
        for r in &doc.rules {
            s.add_rule(&r.role, r.resource.parse()?, &r.constraint)?;
        }
        Ok(s)
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn rule(&self, role: &str, resource: &Resource) -> Option<&Rule> {
        self.rules.get(&(role.to_string(), resource.clone()))
    }

    pub fn keywords(&self, resource: &Resource) -> Result<Keywords, PolicyError> {
        resource.keywords(&self.data_model, &self.user_class)
    }

    /// The constraint for a role on a resource; `false` when no rule exists.
    pub fn lookup_auth(&self, role: &str, resource: &Resource) -> Result<OclExpr, PolicyError> {
        if !self.roles.contains(role) {
            return Err(PolicyError::UnknownRole(role.to_string()));
        }
        resource.validate(&self.data_model)?;
        Ok(self
            .rule(role, resource)
            .map(|r| r.constraint.clone())
            .unwrap_or(OclExpr::Bool(false)))
    }

    /// Decides whether `caller` acting as `role` may read `resource` for the
    /// given targets (`self`, or the two association ends).
    pub fn auth_decision(
        &self,
        sc: &Scenario,
        caller: &ObjectRef,
        role: &str,
        resource: &Resource,
        targets: &Binding,
    ) -> Result<bool, PolicyError> {
        let constraint = self.lookup_auth(role, resource)?;
        if caller.class != self.user_class {
            return Err(PolicyError::BadTarget(format!("caller {caller} is not a {}", self.user_class)));
        }
        let kw = self.keywords(resource)?;
        let mut binding = Binding::new();
        binding.insert("caller".to_string(), caller.clone());
        for (name, class) in kw.iter().skip(1) {
            match targets.get(name) {
                Some(o) if o.class == class => {
                    binding.insert(name.to_string(), o.clone());
                }
                Some(o) => return Err(PolicyError::BadTarget(format!("{name} = {o} is not a {class}"))),
                None => return Err(PolicyError::BadTarget(format!("missing target `{name}`"))),
            }
        }
        let v = eval_ocl(&self.data_model, sc, &constraint, &binding).map_err(PolicyError::Eval)?;
        Ok(v.is_true())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::Value;

    fn scenario() -> Scenario {
        let mut sc = Scenario::default();
        sc.add_object("Lecturer", "Huong", &[("age", Value::Int(40))]);
        sc.add_object("Lecturer", "Manuel", &[("age", Value::Int(50))]);
        sc.add_object("Student", "Thanh", &[("age", Value::Int(20))]);
        sc.add_link("Enrolment", "Huong", "Thanh");
        sc
    }

    fn target(name: &str, id: &str, class: &str) -> Binding {
        Binding::from([(name.to_string(), ObjectRef::new(id, class))])
    }

    #[test]
    fn resources_parse_from_text() {
        assert_eq!("Student:age".parse::<Resource>().unwrap(), Resource::attribute("Student", "age"));
        assert_eq!("Enrolment".parse::<Resource>().unwrap(), Resource::association("Enrolment"));
        assert!("a:b:c".parse::<Resource>().is_err());
    }

    #[test]
    fn decisions_follow_constraints() {
        let s = fixtures::secvgu2();
        let sc = scenario();
        let huong = ObjectRef::new("Huong", "Lecturer");
        let manuel = ObjectRef::new("Manuel", "Lecturer");
        let age = Resource::attribute("Student", "age");
        let thanh = target("self", "Thanh", "Student");
        assert!(s.auth_decision(&sc, &huong, "Lecturer", &age, &thanh).unwrap());
        assert!(!s.auth_decision(&sc, &manuel, "Lecturer", &age, &thanh).unwrap());
    }

    #[test]
    fn missing_rules_deny_and_unknown_roles_error() {
        let s = fixtures::secvgu2();
        let sc = scenario();
        let huong = ObjectRef::new("Huong", "Lecturer");
        let email = Resource::attribute("Student", "email");
        let thanh = target("self", "Thanh", "Student");
        assert_eq!(s.lookup_auth("Lecturer", &email).unwrap(), OclExpr::Bool(false));
        assert!(!s.auth_decision(&sc, &huong, "Lecturer", &email, &thanh).unwrap());
        assert_eq!(
            s.auth_decision(&sc, &huong, "Admin", &email, &thanh),
            Err(PolicyError::UnknownRole("Admin".into()))
        );
    }

    #[test]
    fn ill_typed_rules_are_rejected() {
        let dm = Arc::new(fixtures::university());
        let mut s = SecurityModel::new("P", dm, "Lecturer", &["Lecturer"]).unwrap();
        let err = s
            .add_rule("Lecturer", Resource::association("Enrolment"), "self.age > 3")
            .unwrap_err();
        assert!(matches!(err, PolicyError::Constraint { .. }), "{err}");
        s.add_rule("Lecturer", Resource::association("Enrolment"), "lecturers = caller").unwrap();
        assert!(matches!(
            s.add_rule("Lecturer", Resource::association("Enrolment"), "true"),
            Err(PolicyError::DuplicateRule { .. })
        ));
    }
}
