//! Declarations and axioms for a data model, keyword constants and the
//! closed-world interpretation of a scenario.

use super::sexp::{app, atom, Sexp};
use crate::model::{AttrType, DataModel, Scenario, Value};
use crate::ocl::Keywords;

pub(crate) fn sort_of(t: AttrType) -> &'static str {
    match t {
        AttrType::Int => "Int",
        AttrType::String => "String",
    }
}

pub(crate) fn null_of(sort: &str) -> Sexp {
    atom(format!("null{sort}"))
}

pub(crate) fn inval_of(sort: &str) -> Sexp {
    atom(format!("inval{sort}"))
}

pub(crate) fn attr_fun(class: &str, attr: &str) -> String {
    format!("{attr}_{class}")
}

fn declare_const(name: Sexp, sort: &str) -> Sexp {
    app("declare-const", [name, atom(sort)])
}

fn declare_fun(name: &str, args: &[&str], ret: &str) -> Sexp {
    app(
        "declare-fun",
        [atom(name), Sexp::List(args.iter().map(|a| atom(*a)).collect()), atom(ret)],
    )
}

fn assert(f: Sexp) -> Sexp {
    app("assert", [f])
}

pub(crate) fn int_literal(i: i64) -> Sexp {
    if i < 0 {
        app("-", [atom(i.unsigned_abs().to_string())])
    } else {
        atom(i.to_string())
    }
}

pub(crate) fn string_literal(s: &str) -> Sexp {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\"\""),
            ' '..='~' => out.push(c),
            _ => out.push_str(&format!("\\u{{{:x}}}", c as u32)),
        }
    }
    out.push('"');
    atom(out)
}

/// Sorts, null/invalid constants, class predicates, disjointness,
/// attribute functions and association predicates.
pub fn data_model_theory(dm: &DataModel) -> Vec<Sexp> {
    let mut out = vec![app("declare-sort", [atom("Classifier"), atom("0")])];
    for sort in ["Classifier", "Int", "String"] {
        out.push(declare_const(null_of(sort), sort));
        out.push(declare_const(inval_of(sort), sort));
        out.push(assert(app("distinct", [null_of(sort), inval_of(sort)])));
    }
    for c in &dm.classes {
        out.push(declare_fun(&c.name, &["Classifier"], "Bool"));
        for special in [null_of("Classifier"), inval_of("Classifier")] {
            out.push(assert(Sexp::not(app(&c.name, [special]))));
        }
    }
    for a in &dm.classes {
        for b in &dm.classes {
            if a.name != b.name {
                out.push(assert(Sexp::quantified(
                    "forall",
                    &["x"],
                    Sexp::implies(app(&a.name, [atom("x")]), Sexp::not(app(&b.name, [atom("x")]))),
                )));
            }
        }
    }
    for c in &dm.classes {
        for a in &c.attributes {
            let f = attr_fun(&c.name, &a.name);
            let sort = sort_of(a.ty);
            out.push(declare_fun(&f, &["Classifier"], sort));
            for special in [null_of("Classifier"), inval_of("Classifier")] {
                out.push(assert(Sexp::eq(app(&f, [special]), inval_of(sort))));
            }
            out.push(assert(Sexp::quantified(
                "forall",
                &["x"],
                Sexp::implies(
                    app(&c.name, [atom("x")]),
                    app("distinct", [app(&f, [atom("x")]), inval_of(sort)]),
                ),
            )));
        }
    }
    for a in &dm.associations {
        out.push(declare_fun(&a.name, &["Classifier", "Classifier"], "Bool"));
        out.push(assert(Sexp::quantified(
            "forall",
            &["x"],
            Sexp::quantified(
                "forall",
                &["y"],
                Sexp::implies(
                    app(&a.name, [atom("x"), atom("y")]),
                    Sexp::and(vec![app(&a.end1.class, [atom("x")]), app(&a.end2.class, [atom("y")])]),
                ),
            ),
        )));
    }
    out
}

/// One constant per keyword, typed by its class.
pub fn sigma(keywords: &Keywords) -> Vec<Sexp> {
    let mut out = Vec::new();
    for (name, class) in keywords.iter() {
        out.push(declare_const(atom(name), "Classifier"));
        out.push(assert(app(class, [atom(name)])));
    }
    out
}

/// SMT constant naming the object with the given id.
pub fn object_constant(id: &str) -> Sexp {
    let plain = id.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c));
    if plain {
        atom(format!("obj_{id}"))
    } else {
        atom(format!("|obj_{}|", id.replace(['|', '\\'], "_")))
    }
}

/// Fixes class extents, attribute values and links to exactly those of
/// the scenario.
pub fn scenario_theory(dm: &DataModel, sc: &Scenario) -> Vec<Sexp> {
    let mut out = Vec::new();
    let mut all = vec![null_of("Classifier"), inval_of("Classifier")];
    for c in &dm.classes {
        for o in sc.instances(&c.name) {
            out.push(declare_const(object_constant(&o.id), "Classifier"));
            all.push(object_constant(&o.id));
        }
    }
    out.push(assert(app("distinct", all)));
    let x = || atom("x");
    for c in &dm.classes {
        let objs = sc.instances(&c.name);
        for o in &objs {
            out.push(assert(app(&c.name, [object_constant(&o.id)])));
        }
        let members = objs.iter().map(|o| Sexp::eq(x(), object_constant(&o.id))).collect();
        out.push(assert(Sexp::quantified(
            "forall",
            &["x"],
            Sexp::implies(app(&c.name, [x()]), Sexp::or(members)),
        )));
        for a in &c.attributes {
            let sort = sort_of(a.ty);
            let f = attr_fun(&c.name, &a.name);
            for o in &objs {
                let v = match (sc.attribute_value(o, &a.name), a.ty) {
                    (Value::Int(i), _) => int_literal(i),
                    (Value::Str(s), _) => string_literal(&s),
                    (Value::Null, _) => null_of(sort),
                };
                if !v.is_atom(&format!("null{sort}")) {
                    out.push(assert(app("distinct", [v.clone(), null_of(sort), inval_of(sort)])));
                }
                out.push(assert(Sexp::eq(app(&f, [object_constant(&o.id)]), v)));
            }
        }
    }
    for a in &dm.associations {
        let links: Vec<(String, String)> = sc.links.get(&a.name).cloned().unwrap_or_default();
        for (p, q) in &links {
            out.push(assert(app(&a.name, [object_constant(p), object_constant(q)])));
        }
        let cases = links
            .iter()
            .map(|(p, q)| {
                Sexp::and(vec![
                    Sexp::eq(atom("x"), object_constant(p)),
                    Sexp::eq(atom("y"), object_constant(q)),
                ])
            })
            .collect();
        out.push(assert(Sexp::quantified(
            "forall",
            &["x", "y"],
            Sexp::implies(app(&a.name, [atom("x"), atom("y")]), Sexp::or(cases)),
        )));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn literals() {
        assert_eq!(int_literal(-3).to_string(), "(- 3)");
        assert_eq!(string_literal("a\"b").to_string(), "\"a\"\"b\"");
        assert_eq!(string_literal("ô").to_string(), "\"\\u{f4}\"");
        assert_eq!(object_constant("Huong").to_string(), "obj_Huong");
        assert_eq!(object_constant("a b").to_string(), "|obj_a b|");
    }

    #[test]
    fn theory_shape() {
        let t = data_model_theory(&fixtures::university());
        // sort + 3*3 constants + 2*3 class axioms + 2 disjointness
        // + 6 attributes * 4 + association declaration and typing
        assert_eq!(t.len(), 1 + 9 + 6 + 2 + 24 + 2);
    }
}
