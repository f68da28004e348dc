//! Canonical text for declared objects. Statement renderers emit complete
//! declarations that the parser accepts back; value renderers emit the bare
//! result text commands print.

use gradedcalc_core::atlas::{GluingData, GlobalFunction};
use gradedcalc_core::bundles::TransitionData;
use gradedcalc_core::coeffs::{rational_string, BasePoint};
use gradedcalc_core::fields::VectorField;
use gradedcalc_core::forms::Form;
use gradedcalc_core::grading::CoordinateSystem;
use gradedcalc_core::morphisms::DomainMorphism;
use gradedcalc_core::series::{GradedFunction, Truncation};

pub fn upto_suffix(trunc: Truncation) -> String {
    match trunc {
        Truncation::Exact => String::new(),
        Truncation::Weight(w) => format!(" upto {w}"),
    }
}

pub fn stmt_domain(name: &str, cs: &CoordinateSystem, weight: u32) -> String {
    let mut body = String::new();
    for x in cs.even_names() {
        body.push_str(&format!(" even {x};"));
    }
    for mu in 0..cs.n_graded() {
        body.push_str(&format!(
            " coord {} : {};",
            cs.graded_name(mu),
            cs.graded_degree(mu)
        ));
    }
    body.push_str(&format!(" trunc {weight};"));
    format!("domain {name} {{{body} }}")
}

pub fn point_values(p: &BasePoint) -> String {
    let inner: Vec<String> = p.0.iter().map(rational_string).collect();
    format!("({})", inner.join(", "))
}

pub fn stmt_point(name: &str, domain: &str, p: &BasePoint) -> String {
    format!("point {name} on {domain} = {};", point_values(p))
}

pub fn stmt_fn(name: &str, domain: &str, f: &GradedFunction) -> String {
    format!(
        "fn {name} : {} on {domain} = {}{};",
        f.degree(),
        f.render(),
        upto_suffix(f.trunc())
    )
}

/// The rule block `{ coord -> image; ... }` of a morphism, every target
/// coordinate in declaration order.
pub fn morphism_rules(m: &DomainMorphism) -> String {
    let target = m.target();
    let mut rules = Vec::new();
    for c in target.coords() {
        let image = m.pullback_coordinate(c);
        rules.push(format!("{} -> {};", target.coord_name(c), image.render()));
    }
    if rules.is_empty() {
        "{ }".to_string()
    } else {
        format!("{{ {} }}", rules.join(" "))
    }
}

pub fn stmt_morphism(name: &str, source: &str, target: &str, m: &DomainMorphism) -> String {
    format!(
        "morphism {name} : {source} -> {target}{} {}",
        upto_suffix(m.trunc()),
        morphism_rules(m)
    )
}

/// The rule block of a field, zero components skipped.
pub fn field_rules(x: &VectorField) -> String {
    let cs = x.cs();
    let mut rules = Vec::new();
    for c in cs.coords() {
        let comp = x.component(cs.coord_position(c));
        if !comp.is_zero() {
            rules.push(format!("{} -> {};", cs.coord_name(c), comp.render()));
        }
    }
    if rules.is_empty() {
        "{ }".to_string()
    } else {
        format!("{{ {} }}", rules.join(" "))
    }
}

pub fn stmt_field(name: &str, domain: &str, x: &VectorField) -> String {
    let upto = if x.is_zero() {
        String::new()
    } else {
        upto_suffix(x.trunc())
    };
    format!(
        "field {name} : {} on {domain}{upto} {}",
        x.degree(),
        field_rules(x)
    )
}

pub fn stmt_form(name: &str, domain: &str, w: &Form) -> String {
    let upto = if w.is_zero() {
        String::new()
    } else {
        upto_suffix(w.trunc())
    };
    format!(
        "form {name} : {} on {domain} = {}{upto};",
        w.p(),
        w.value().render()
    )
}

pub fn stmt_bundle(name: &str, domain: &str, t: &TransitionData) -> String {
    format!("bundle {name} on {domain} = {};", t.to_json())
}

pub fn stmt_atlas(name: &str, g: &GluingData) -> String {
    format!("atlas {name} = {};", g.to_json())
}

pub fn stmt_global(name: &str, atlas: &str, f: &GlobalFunction) -> String {
    format!("global {name} on {atlas} = {};", f.to_json())
}
