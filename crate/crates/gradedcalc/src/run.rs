//! Script execution. Declarations run first in order and populate a symbol
//! table; commands then run in order, each printing its result (text) or
//! contributing one entry to the JSON report. A failing command is reported
//! with its position and execution continues with the next command.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use gradedcalc_core::atlas::{check_global_function, GlobalFunction, GluingData, GluingReport};
use gradedcalc_core::bundles::{shifted_bundle_ek, CocycleReport, TransitionData};
use gradedcalc_core::coeffs::{rational_string, BaseCoefficient, BasePoint};
use gradedcalc_core::fields::{related_check, VectorField};
use gradedcalc_core::forms::{pullback_form, Form, ShiftedSystem};
use gradedcalc_core::grading::CoordinateSystem;
use gradedcalc_core::morphisms::{DegreeMatrices, DomainMorphism};
use gradedcalc_core::series::{GradedFunction, Truncation};
use serde_json::{json, Value};

use crate::ast::{Arg, Command, Expr, Span, Stmt};
use crate::render;

/// A positioned script error: where it happened, what category it falls in,
/// and a human-readable message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: u32,
    pub col: u32,
    pub kind: &'static str,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: &'static str, span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            line: span.line,
            col: span.col,
            kind,
            message: message.into(),
        }
    }

    pub fn syntax(span: Span, message: String) -> Diagnostic {
        Diagnostic::new("syntax", span, message)
    }

    fn name(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic::new("name", span, message)
    }

    fn type_error(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic::new("type", span, message)
    }

    fn degree(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic::new("degree", span, message)
    }

    fn runtime(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic::new("runtime", span, message)
    }

    fn descriptor(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic::new("descriptor", span, message)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "line": self.line,
            "col": self.col,
            "kind": self.kind,
            "message": self.message,
        })
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.col, self.kind, self.message)
    }
}

/// How a script is run: output format and the default truncation weight used
/// by domains that do not declare their own (command line beats environment).
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub json: bool,
    pub trunc: Option<u32>,
    pub env_trunc: Option<u32>,
}

impl Options {
    fn base_weight(&self) -> u32 {
        self.trunc.or(self.env_trunc).unwrap_or(8)
    }
}

/// What a run produced: everything destined for stdout, whether every stage
/// succeeded, and the collected positioned errors.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
}

/// Result of one command: the text lines it prints and its JSON payload.
#[derive(Debug)]
pub struct CommandOutput {
    pub lines: Vec<String>,
    pub payload: Value,
}

struct DomainEntry {
    cs: Arc<CoordinateSystem>,
    weight: u32,
}

/// A named value in the symbol table.
pub enum Obj {
    Func { f: GradedFunction, domain: String },
    PointV { p: BasePoint, domain: String },
    Morph { m: DomainMorphism, source: String, target: String },
    FieldV { x: VectorField, domain: String },
    FormV { w: Form, domain: String },
    BundleV { t: TransitionData, domain: String },
    AtlasV { g: GluingData },
    GlobalV { f: GlobalFunction, atlas: String },
}

impl Obj {
    pub fn describe(&self) -> &'static str {
        match self {
            Obj::Func { .. } => "a function",
            Obj::PointV { .. } => "a point",
            Obj::Morph { .. } => "a morphism",
            Obj::FieldV { .. } => "a field",
            Obj::FormV { .. } => "a form",
            Obj::BundleV { .. } => "a bundle",
            Obj::AtlasV { .. } => "an atlas",
            Obj::GlobalV { .. } => "a global function",
        }
    }
}

/// Evaluation context for an expression: the system its names live in, the
/// domain whose declared functions are visible, and — when evaluating inside
/// a differential-coordinate system — the lift applied to those functions.
struct EvalCtx<'a> {
    cs: &'a Arc<CoordinateSystem>,
    domain: Option<&'a str>,
    lift: Option<&'a Arc<ShiftedSystem>>,
}

/// Symbol table plus the state a script threads through its statements.
pub struct Engine {
    domains: BTreeMap<String, DomainEntry>,
    shifted: BTreeMap<String, Arc<ShiftedSystem>>,
    objects: BTreeMap<String, Obj>,
    current: Option<String>,
    default_weight: u32,
}

impl Engine {
    pub fn new(default_weight: u32) -> Engine {
        Engine {
            domains: BTreeMap::new(),
            shifted: BTreeMap::new(),
            objects: BTreeMap::new(),
            current: None,
            default_weight,
        }
    }

    pub fn object(&self, name: &str) -> Option<&Obj> {
        self.objects.get(name)
    }

    pub fn system(&self, domain: &str) -> Option<&Arc<CoordinateSystem>> {
        self.domains.get(domain).map(|e| &e.cs)
    }

    pub fn domain_weight(&self, domain: &str) -> Option<u32> {
        self.domains.get(domain).map(|e| e.weight)
    }

    fn check_free(&self, name: &str, span: Span) -> Result<(), Diagnostic> {
        if self.domains.contains_key(name) || self.objects.contains_key(name) {
            return Err(Diagnostic::name(span, format!("`{name}` is already defined")));
        }
        Ok(())
    }

    fn insert_object(&mut self, name: &str, span: Span, obj: Obj) -> Result<(), Diagnostic> {
        self.check_free(name, span)?;
        let domain = match &obj {
            Obj::Func { domain, .. }
            | Obj::PointV { domain, .. }
            | Obj::FieldV { domain, .. }
            | Obj::FormV { domain, .. } => Some(domain.clone()),
            _ => None,
        };
        if let Some(d) = domain {
            if let Some(entry) = self.domains.get(&d) {
                if entry.cs.coord_by_name(name).is_some() {
                    return Err(Diagnostic::name(
                        span,
                        format!("`{name}` is already a coordinate of `{d}`"),
                    ));
                }
            }
        }
        self.objects.insert(name.to_string(), obj);
        Ok(())
    }

    fn domain_entry(&self, name: &str, span: Span) -> Result<&DomainEntry, Diagnostic> {
        self.domains
            .get(name)
            .ok_or_else(|| Diagnostic::name(span, format!("unknown domain `{name}`")))
    }

    fn resolve_domain(&self, explicit: &Option<String>, span: Span) -> Result<String, Diagnostic> {
        match explicit {
            Some(d) => {
                self.domain_entry(d, span)?;
                Ok(d.clone())
            }
            None => self.current.clone().ok_or_else(|| {
                Diagnostic::name(span, "no domain has been declared yet; add `on <domain>`")
            }),
        }
    }

    fn shifted_system(&mut self, domain: &str, span: Span) -> Result<Arc<ShiftedSystem>, Diagnostic> {
        if let Some(sh) = self.shifted.get(domain) {
            return Ok(sh.clone());
        }
        let cs = self.domain_entry(domain, span)?.cs.clone();
        let sh = Arc::new(
            ShiftedSystem::new(&cs).map_err(|e| Diagnostic::runtime(span, e.to_string()))?,
        );
        self.shifted.insert(domain.to_string(), sh.clone());
        Ok(sh)
    }

    // ------------------------------------------------------------------
    // Expressions
    // ------------------------------------------------------------------

    fn eval(&self, e: &Expr, ctx: &EvalCtx) -> Result<GradedFunction, Diagnostic> {
        match e {
            Expr::Number(r, _) => Ok(GradedFunction::constant(ctx.cs.clone(), r.clone())),
            Expr::Name(n, sp) => self.eval_name(n, *sp, ctx),
            Expr::Neg(a, _) => Ok(self.eval(a, ctx)?.neg()),
            Expr::Add(a, b, sp) => {
                let x = self.eval(a, ctx)?;
                let y = self.eval(b, ctx)?;
                x.add(&y).map_err(|e| Diagnostic::degree(*sp, e.to_string()))
            }
            Expr::Sub(a, b, sp) => {
                let x = self.eval(a, ctx)?;
                let y = self.eval(b, ctx)?;
                x.sub(&y).map_err(|e| Diagnostic::degree(*sp, e.to_string()))
            }
            Expr::Mul(a, b, sp) => {
                let x = self.eval(a, ctx)?;
                let y = self.eval(b, ctx)?;
                x.mul(&y).map_err(|e| Diagnostic::runtime(*sp, e.to_string()))
            }
            Expr::Div(a, b, sp) => {
                let x = self.eval(a, ctx)?;
                let y = self.eval(b, ctx)?;
                let coeff = coefficient_part(&y).ok_or_else(|| {
                    Diagnostic::type_error(
                        *sp,
                        "the divisor must be a degree-0 expression in even coordinates only; \
                         use `invert` for general series",
                    )
                })?;
                let inv = coeff
                    .invert()
                    .map_err(|e| Diagnostic::runtime(*sp, e.to_string()))?;
                Ok(x.scale_coeff(&inv))
            }
            Expr::Pow(a, n, sp) => {
                let x = self.eval(a, ctx)?;
                x.pow(*n).map_err(|e| Diagnostic::runtime(*sp, e.to_string()))
            }
        }
    }

    fn eval_name(&self, name: &str, sp: Span, ctx: &EvalCtx) -> Result<GradedFunction, Diagnostic> {
        if let Some(c) = ctx.cs.coord_by_name(name) {
            return Ok(GradedFunction::coordinate(ctx.cs.clone(), c));
        }
        match (self.objects.get(name), ctx.domain) {
            (Some(Obj::Func { f, domain }), Some(d)) if domain == d => match ctx.lift {
                Some(sh) => sh
                    .lift(f)
                    .map_err(|e| Diagnostic::runtime(sp, e.to_string())),
                None => Ok(f.clone()),
            },
            (Some(Obj::Func { domain, .. }), _) => Err(Diagnostic::type_error(
                sp,
                format!("`{name}` is a function on `{domain}` and is not usable here"),
            )),
            (Some(o), _) => Err(Diagnostic::type_error(
                sp,
                format!("`{name}` is {}, which cannot appear in an expression", o.describe()),
            )),
            (None, _) => Err(Diagnostic::name(sp, format!("unknown name `{name}`"))),
        }
    }

    // ------------------------------------------------------------------
    // Declarations
    // ------------------------------------------------------------------

    pub fn declare(&mut self, stmt: &Stmt) -> Result<(), Diagnostic> {
        match stmt {
            Stmt::Trunc { weight, .. } => {
                self.default_weight = *weight;
                Ok(())
            }
            Stmt::Domain {
                name,
                evens,
                coords,
                weight,
                span,
            } => self.decl_domain(name, evens, coords, *weight, *span),
            Stmt::Fn {
                name,
                degree,
                domain,
                body,
                upto,
                span,
            } => self.decl_fn(name, *degree, domain, body, *upto, *span),
            Stmt::Point {
                name,
                domain,
                values,
                span,
            } => self.decl_point(name, domain, values, *span),
            Stmt::Morphism {
                name,
                source,
                target,
                upto,
                rules,
                span,
            } => self.decl_morphism(name, source, target, *upto, rules, *span),
            Stmt::Field {
                name,
                degree,
                domain,
                upto,
                rules,
                span,
            } => self.decl_field(name, *degree, domain, *upto, rules, *span),
            Stmt::Form {
                name,
                p,
                domain,
                body,
                upto,
                span,
            } => self.decl_form(name, *p, domain, body, *upto, *span),
            Stmt::Bundle {
                name,
                domain,
                descriptor,
                span,
            } => self.decl_bundle(name, domain, descriptor, *span),
            Stmt::Atlas {
                name,
                descriptor,
                span,
            } => self.decl_atlas(name, descriptor, *span),
            Stmt::Global {
                name,
                atlas,
                descriptor,
                span,
            } => self.decl_global(name, atlas, descriptor, *span),
            Stmt::Command(_) => Ok(()),
        }
    }

    fn decl_domain(
        &mut self,
        name: &str,
        evens: &[String],
        coords: &[(String, i64)],
        weight: Option<u32>,
        span: Span,
    ) -> Result<(), Diagnostic> {
        self.check_free(name, span)?;
        let cs = CoordinateSystem::new(evens.to_vec(), coords.to_vec())
            .map_err(|e| Diagnostic::type_error(span, e.to_string()))?;
        self.domains.insert(
            name.to_string(),
            DomainEntry {
                cs: Arc::new(cs),
                weight: weight.unwrap_or(self.default_weight),
            },
        );
        self.current = Some(name.to_string());
        Ok(())
    }

    fn decl_fn(
        &mut self,
        name: &str,
        degree: i64,
        domain: &Option<String>,
        body: &Expr,
        upto: Option<u32>,
        span: Span,
    ) -> Result<(), Diagnostic> {
        let dom = self.resolve_domain(domain, span)?;
        let cs = self.domains[&dom].cs.clone();
        let ctx = EvalCtx {
            cs: &cs,
            domain: Some(&dom),
            lift: None,
        };
        let mut f = self.eval(body, &ctx)?;
        f = coerce_degree(f, degree).map_err(|msg| Diagnostic::degree(body.span(), msg))?;
        if let Some(w) = upto {
            f = truncate_function(&f, w);
        }
        self.insert_object(name, span, Obj::Func { f, domain: dom })
    }

    fn decl_point(
        &mut self,
        name: &str,
        domain: &Option<String>,
        values: &[gradedcalc_core::coeffs::Rat],
        span: Span,
    ) -> Result<(), Diagnostic> {
        let dom = self.resolve_domain(domain, span)?;
        let cs = &self.domains[&dom].cs;
        if values.len() != cs.n_even() {
            return Err(Diagnostic::type_error(
                span,
                format!(
                    "`{dom}` has {} even coordinate(s), but {} value(s) were given",
                    cs.n_even(),
                    values.len()
                ),
            ));
        }
        self.insert_object(
            name,
            span,
            Obj::PointV {
                p: BasePoint(values.to_vec()),
                domain: dom,
            },
        )
    }

    fn decl_morphism(
        &mut self,
        name: &str,
        source: &str,
        target: &str,
        upto: Option<u32>,
        rules: &[crate::ast::Rule],
        span: Span,
    ) -> Result<(), Diagnostic> {
        self.check_free(name, span)?;
        let src_weight = self.domain_entry(source, span)?.weight;
        let src = self.domains[source].cs.clone();
        let tgt = self.domain_entry(target, span)?.cs.clone();

        let mut by_coord: BTreeMap<usize, &crate::ast::Rule> = BTreeMap::new();
        for rule in rules {
            let c = tgt.coord_by_name(&rule.coord).ok_or_else(|| {
                Diagnostic::name(
                    rule.coord_span,
                    format!("`{}` is not a coordinate of `{target}`", rule.coord),
                )
            })?;
            if by_coord.insert(tgt.coord_position(c), rule).is_some() {
                return Err(Diagnostic::name(
                    rule.coord_span,
                    format!("duplicate rule for `{}`", rule.coord),
                ));
            }
        }
        let missing: Vec<&str> = tgt
            .coords()
            .enumerate()
            .filter(|(a, _)| !by_coord.contains_key(a))
            .map(|(_, c)| tgt.coord_name(c))
            .collect();
        if !missing.is_empty() {
            return Err(Diagnostic::type_error(
                span,
                format!(
                    "every coordinate of `{target}` needs a rule; missing: {}",
                    missing.join(", ")
                ),
            ));
        }

        let ctx = EvalCtx {
            cs: &src,
            domain: Some(source),
            lift: None,
        };
        let mut underlying = Vec::with_capacity(tgt.n_even());
        let mut ybar = Vec::with_capacity(tgt.n_even());
        let mut thetabar = Vec::with_capacity(tgt.n_graded());
        for (a, c) in tgt.coords().enumerate() {
            let rule = by_coord[&a];
            let g = self.eval(&rule.rhs, &ctx)?;
            let want = tgt.coord_degree(c);
            let g = coerce_degree(g, want).map_err(|msg| {
                Diagnostic::degree(
                    rule.rhs.span(),
                    format!("rule for `{}`: {msg}", rule.coord),
                )
            })?;
            if a < tgt.n_even() {
                let body = g.body();
                let base = GradedFunction::from_coefficient(src.clone(), body.clone(), g.trunc());
                let corr = g
                    .sub(&base)
                    .map_err(|e| Diagnostic::runtime(rule.rhs.span(), e.to_string()))?;
                underlying.push(body);
                ybar.push(corr);
            } else {
                thetabar.push(g);
            }
        }
        let trunc = match upto {
            Some(w) => Truncation::Weight(w),
            None => Truncation::Weight(src_weight),
        };
        let m = DomainMorphism::new(src, tgt, underlying, ybar, thetabar, trunc)
            .map_err(|e| Diagnostic::runtime(span, e.to_string()))?;
        self.insert_object(
            name,
            span,
            Obj::Morph {
                m,
                source: source.to_string(),
                target: target.to_string(),
            },
        )
    }

    fn decl_field(
        &mut self,
        name: &str,
        degree: i64,
        domain: &Option<String>,
        upto: Option<u32>,
        rules: &[crate::ast::Rule],
        span: Span,
    ) -> Result<(), Diagnostic> {
        let dom = self.resolve_domain(domain, span)?;
        let cs = self.domains[&dom].cs.clone();
        let mut by_coord: BTreeMap<usize, &crate::ast::Rule> = BTreeMap::new();
        for rule in rules {
            let c = cs.coord_by_name(&rule.coord).ok_or_else(|| {
                Diagnostic::name(
                    rule.coord_span,
                    format!("`{}` is not a coordinate of `{dom}`", rule.coord),
                )
            })?;
            if by_coord.insert(cs.coord_position(c), rule).is_some() {
                return Err(Diagnostic::name(
                    rule.coord_span,
                    format!("duplicate rule for `{}`", rule.coord),
                ));
            }
        }
        let ctx = EvalCtx {
            cs: &cs,
            domain: Some(&dom),
            lift: None,
        };
        let mut comps = Vec::with_capacity(cs.coord_count());
        for (a, c) in cs.coords().enumerate() {
            let want = degree + cs.coord_degree(c);
            let comp = match by_coord.get(&a) {
                Some(rule) => {
                    let g = self.eval(&rule.rhs, &ctx)?;
                    let g = coerce_degree(g, want).map_err(|msg| {
                        Diagnostic::degree(
                            rule.rhs.span(),
                            format!("component at `{}`: {msg}", rule.coord),
                        )
                    })?;
                    match upto {
                        Some(w) => truncate_function(&g, w),
                        None => g,
                    }
                }
                None => GradedFunction::zero(cs.clone(), want, Truncation::Exact),
            };
            comps.push(comp);
        }
        let x = VectorField::new(cs, degree, comps)
            .map_err(|e| Diagnostic::runtime(span, e.to_string()))?;
        self.insert_object(name, span, Obj::FieldV { x, domain: dom })
    }

    fn decl_form(
        &mut self,
        name: &str,
        p: u32,
        domain: &Option<String>,
        body: &Expr,
        upto: Option<u32>,
        span: Span,
    ) -> Result<(), Diagnostic> {
        let dom = self.resolve_domain(domain, span)?;
        let sh = self.shifted_system(&dom, span)?;
        let doubled = sh.doubled().clone();
        let ctx = EvalCtx {
            cs: &doubled,
            domain: Some(&dom),
            lift: Some(&sh),
        };
        let mut value = self.eval(body, &ctx)?;
        if let Some(w) = upto {
            value = truncate_function(&value, w);
        }
        let w = Form::new(sh, p, value)
            .map_err(|e| Diagnostic::degree(body.span(), e.to_string()))?;
        self.insert_object(name, span, Obj::FormV { w, domain: dom })
    }

    fn decl_bundle(
        &mut self,
        name: &str,
        domain: &Option<String>,
        descriptor: &Value,
        span: Span,
    ) -> Result<(), Diagnostic> {
        let dom = self.resolve_domain(domain, span)?;
        let cs = self.domains[&dom].cs.clone();
        let t = TransitionData::from_json(cs, descriptor)
            .map_err(|e| Diagnostic::descriptor(span, e.to_string()))?;
        self.insert_object(name, span, Obj::BundleV { t, domain: dom })
    }

    fn decl_atlas(&mut self, name: &str, descriptor: &Value, span: Span) -> Result<(), Diagnostic> {
        let g = GluingData::from_json(descriptor)
            .map_err(|e| Diagnostic::descriptor(span, e.to_string()))?;
        self.insert_object(name, span, Obj::AtlasV { g })
    }

    fn decl_global(
        &mut self,
        name: &str,
        atlas: &str,
        descriptor: &Value,
        span: Span,
    ) -> Result<(), Diagnostic> {
        let glue = match self.objects.get(atlas) {
            Some(Obj::AtlasV { g }) => g,
            Some(o) => {
                return Err(Diagnostic::type_error(
                    span,
                    format!("`{atlas}` is {}, expected an atlas", o.describe()),
                ))
            }
            None => return Err(Diagnostic::name(span, format!("unknown atlas `{atlas}`"))),
        };
        let f = GlobalFunction::from_json(glue, descriptor)
            .map_err(|e| Diagnostic::descriptor(span, e.to_string()))?;
        self.insert_object(
            name,
            span,
            Obj::GlobalV {
                f,
                atlas: atlas.to_string(),
            },
        )
    }

    // ------------------------------------------------------------------
    // Object lookups for command arguments
    // ------------------------------------------------------------------

    fn lookup(&self, name: &str, span: Span) -> Result<&Obj, Diagnostic> {
        self.objects
            .get(name)
            .ok_or_else(|| Diagnostic::name(span, format!("unknown name `{name}`")))
    }

    fn get_fn(&self, name: &str, span: Span) -> Result<(&GradedFunction, &str), Diagnostic> {
        match self.lookup(name, span)? {
            Obj::Func { f, domain } => Ok((f, domain)),
            o => Err(Diagnostic::type_error(
                span,
                format!("`{name}` is {}, expected a function", o.describe()),
            )),
        }
    }

    fn get_point(&self, name: &str, span: Span) -> Result<(&BasePoint, &str), Diagnostic> {
        match self.lookup(name, span)? {
            Obj::PointV { p, domain } => Ok((p, domain)),
            o => Err(Diagnostic::type_error(
                span,
                format!("`{name}` is {}, expected a point", o.describe()),
            )),
        }
    }

    fn get_morph(&self, name: &str, span: Span) -> Result<(&DomainMorphism, &str, &str), Diagnostic> {
        match self.lookup(name, span)? {
            Obj::Morph { m, source, target } => Ok((m, source, target)),
            o => Err(Diagnostic::type_error(
                span,
                format!("`{name}` is {}, expected a morphism", o.describe()),
            )),
        }
    }

    fn get_field(&self, name: &str, span: Span) -> Result<(&VectorField, &str), Diagnostic> {
        match self.lookup(name, span)? {
            Obj::FieldV { x, domain } => Ok((x, domain)),
            o => Err(Diagnostic::type_error(
                span,
                format!("`{name}` is {}, expected a field", o.describe()),
            )),
        }
    }

    fn get_form(&self, name: &str, span: Span) -> Result<(&Form, &str), Diagnostic> {
        match self.lookup(name, span)? {
            Obj::FormV { w, domain } => Ok((w, domain)),
            o => Err(Diagnostic::type_error(
                span,
                format!("`{name}` is {}, expected a form", o.describe()),
            )),
        }
    }

    fn get_bundle(&self, name: &str, span: Span) -> Result<(&TransitionData, &str), Diagnostic> {
        match self.lookup(name, span)? {
            Obj::BundleV { t, domain } => Ok((t, domain)),
            o => Err(Diagnostic::type_error(
                span,
                format!("`{name}` is {}, expected a bundle", o.describe()),
            )),
        }
    }

    fn get_atlas(&self, name: &str, span: Span) -> Result<&GluingData, Diagnostic> {
        match self.lookup(name, span)? {
            Obj::AtlasV { g } => Ok(g),
            o => Err(Diagnostic::type_error(
                span,
                format!("`{name}` is {}, expected an atlas", o.describe()),
            )),
        }
    }

    // ------------------------------------------------------------------
    // Commands
    // ------------------------------------------------------------------

    pub fn command(&mut self, c: &Command) -> Result<CommandOutput, Diagnostic> {
        let (out, binds) = self.compute(c)?;
        if c.bind.len() > binds.len() {
            return Err(Diagnostic::type_error(
                c.span,
                format!(
                    "`{}` produces {} bindable result(s), but {} name(s) were given",
                    c.name,
                    binds.len(),
                    c.bind.len()
                ),
            ));
        }
        if !c.bind.is_empty() && c.bind.len() < binds.len() {
            return Err(Diagnostic::type_error(
                c.span,
                format!(
                    "`{}` binds {} results at once; give {} name(s) or none",
                    c.name,
                    binds.len(),
                    binds.len()
                ),
            ));
        }
        for ((name, span), obj) in c.bind.iter().zip(binds) {
            self.insert_object(name, *span, obj)?;
        }
        Ok(out)
    }

    fn compute(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        match c.name.as_str() {
            "simplify" => self.cmd_simplify(c),
            "mul" => self.cmd_mul(c),
            "invert" => self.cmd_invert(c),
            "partial" => self.cmd_partial(c),
            "taylor" => self.cmd_taylor(c),
            "pullback" => self.cmd_pullback(c),
            "compose" => self.cmd_compose(c),
            "dmat" => self.cmd_dmat(c),
            "rank" => self.cmd_rank(c),
            "invert-morphism" => self.cmd_invert_morphism(c),
            "bracket" => self.cmd_bracket(c),
            "apply" => self.cmd_apply(c),
            "euler" => self.cmd_euler(c),
            "related" => self.cmd_related(c),
            "d" => self.cmd_d(c),
            "ix" => self.cmd_ix(c),
            "lie" => self.cmd_lie(c),
            "pullback-form" => self.cmd_pullback_form(c),
            "primitive" => self.cmd_primitive(c),
            "cocycle" => self.cmd_cocycle(c),
            "dual" => self.cmd_dual(c),
            "shift" => self.cmd_shift(c),
            "pullback-bundle" => self.cmd_pullback_bundle(c),
            "ek" => self.cmd_ek(c),
            "verify-atlas" => self.cmd_verify_atlas(c),
            "check-global" => self.cmd_check_global(c),
            other => Err(Diagnostic::name(
                c.span,
                format!("unknown command `{other}`"),
            )),
        }
    }

    fn cmd_simplify(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 1)?;
        if let Some(entry) = self.domains.get(name) {
            let line = render::stmt_domain(name, &entry.cs, entry.weight);
            let payload = json!({
                "kind": "domain",
                "system": entry.cs.to_json(),
                "trunc": entry.weight,
            });
            return Ok((CommandOutput { lines: vec![line], payload }, vec![]));
        }
        let (line, payload) = match self.lookup(name, span)? {
            Obj::Func { f, domain } => (render::stmt_fn(name, domain, f), payload_fn(f, domain)),
            Obj::PointV { p, domain } => (
                render::stmt_point(name, domain, p),
                json!({"kind": "point", "domain": domain, "point": p.to_json()}),
            ),
            Obj::Morph { m, source, target } => (
                render::stmt_morphism(name, source, target, m),
                payload_morph(m, source, target),
            ),
            Obj::FieldV { x, domain } => (render::stmt_field(name, domain, x), payload_field(x, domain)),
            Obj::FormV { w, domain } => (render::stmt_form(name, domain, w), payload_form(w, domain)),
            Obj::BundleV { t, domain } => (render::stmt_bundle(name, domain, t), payload_bundle(t, domain)),
            Obj::AtlasV { g } => (render::stmt_atlas(name, g), payload_atlas(g)),
            Obj::GlobalV { f, atlas } => (
                render::stmt_global(name, atlas, f),
                json!({"kind": "global", "atlas": atlas, "global": f.to_json()}),
            ),
        };
        Ok((CommandOutput { lines: vec![line], payload }, vec![]))
    }

    fn cmd_mul(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (a, sa) = name_arg(c, 0, 2)?;
        let (b, sb) = name_arg(c, 1, 2)?;
        let left = self.lookup(a, sa)?;
        let right = self.lookup(b, sb)?;
        let (ld, rd) = (obj_domain(left), obj_domain(right));
        if ld != rd {
            return Err(Diagnostic::type_error(
                c.span,
                format!("`{a}` lives on `{}` but `{b}` lives on `{}`", disp(ld), disp(rd)),
            ));
        }
        match (left, right) {
            (Obj::Func { f, domain }, Obj::Func { f: g, .. }) => {
                let h = f.mul(g).map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
                let domain = domain.clone();
                Ok(func_result(h, domain))
            }
            (Obj::FormV { w, domain }, Obj::FormV { w: v, .. }) => {
                let u = w.mul(v).map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
                let domain = domain.clone();
                Ok(form_result(u, domain))
            }
            (Obj::Func { f, domain }, Obj::FormV { w, .. }) => {
                let domain = domain.clone();
                let f = f.clone();
                let w = w.clone();
                let sh = self.shifted_system(&domain, c.span)?;
                let lf = Form::from_function(sh, &f)
                    .map_err(|e| Diagnostic::runtime(sa, e.to_string()))?;
                let u = lf.mul(&w).map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
                Ok(form_result(u, domain))
            }
            (Obj::FormV { w, domain }, Obj::Func { f, .. }) => {
                let domain = domain.clone();
                let f = f.clone();
                let w = w.clone();
                let sh = self.shifted_system(&domain, c.span)?;
                let lf = Form::from_function(sh, &f)
                    .map_err(|e| Diagnostic::runtime(sb, e.to_string()))?;
                let u = w.mul(&lf).map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
                Ok(form_result(u, domain))
            }
            _ => Err(Diagnostic::type_error(
                c.span,
                "`mul` multiplies two functions, two forms, or a function and a form",
            )),
        }
    }

    fn cmd_invert(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 2)?;
        let (w, _) = uint_arg(c, 1, 2)?;
        let (f, domain) = self.get_fn(name, span)?;
        let g = f
            .invert(w)
            .map_err(|e| Diagnostic::runtime(span, e.to_string()))?;
        let domain = domain.to_string();
        Ok(func_result(g, domain))
    }

    fn cmd_partial(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 2)?;
        let (coord, cspan) = name_arg(c, 1, 2)?;
        let (f, domain) = self.get_fn(name, span)?;
        let cs = f.cs_arc();
        let cpos = cs.coord_by_name(coord).ok_or_else(|| {
            Diagnostic::name(cspan, format!("`{coord}` is not a coordinate of `{domain}`"))
        })?;
        let g = f.partial(cpos);
        let domain = domain.to_string();
        Ok(func_result(g, domain))
    }

    fn cmd_taylor(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 3)?;
        let (pt, pspan) = name_arg(c, 1, 3)?;
        let (q, _) = uint_arg(c, 2, 3)?;
        let (f, fdom) = self.get_fn(name, span)?;
        let (a, pdom) = self.get_point(pt, pspan)?;
        if fdom != pdom {
            return Err(Diagnostic::type_error(
                pspan,
                format!("`{pt}` is a point of `{pdom}`, but `{name}` lives on `{fdom}`"),
            ));
        }
        let split = f
            .taylor_split(a, q)
            .map_err(|e| Diagnostic::runtime(span, e.to_string()))?;
        let domain = fdom.to_string();
        let lines = vec![
            format!("T = {}", split.taylor.render()),
            format!("R = {}", split.remainder.render()),
        ];
        let payload = json!({
            "kind": "taylor",
            "domain": domain,
            "order": q,
            "center": split.center.to_json(),
            "t": split.taylor.to_json(),
            "r": split.remainder.to_json(),
        });
        let binds = vec![
            Obj::Func { f: split.taylor, domain: domain.clone() },
            Obj::Func { f: split.remainder, domain },
        ];
        Ok((CommandOutput { lines, payload }, binds))
    }

    fn cmd_pullback(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (mname, mspan) = name_arg(c, 0, 2)?;
        let (fname, fspan) = name_arg(c, 1, 2)?;
        let (m, msrc, mtgt) = self.get_morph(mname, mspan)?;
        let (f, fdom) = self.get_fn(fname, fspan)?;
        if fdom != mtgt {
            return Err(Diagnostic::type_error(
                fspan,
                format!("`{fname}` lives on `{fdom}`, but `{mname}` pulls back from `{mtgt}`"),
            ));
        }
        let g = m
            .pullback(f)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let domain = msrc.to_string();
        Ok(func_result(g, domain))
    }

    fn cmd_compose(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (a, sa) = name_arg(c, 0, 2)?;
        let (b, sb) = name_arg(c, 1, 2)?;
        let (phi, psrc, ptgt) = self.get_morph(a, sa)?;
        let (psi, qsrc, qtgt) = self.get_morph(b, sb)?;
        if ptgt != qsrc {
            return Err(Diagnostic::type_error(
                c.span,
                format!("`{a}` lands in `{ptgt}`, but `{b}` starts from `{qsrc}`"),
            ));
        }
        let m = DomainMorphism::compose(phi, psi)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let (source, target) = (psrc.to_string(), qtgt.to_string());
        Ok(morph_result(m, source, target))
    }

    fn cmd_dmat(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (dm, point) = self.differential_at(c)?;
        let mut lines = vec![format!("at {}", render::point_values(&point))];
        let mut blocks = Vec::new();
        for (d, block) in dm.blocks() {
            let rows: Vec<String> = block
                .entries
                .iter()
                .map(|row| {
                    let cells: Vec<String> = row.iter().map(rational_string).collect();
                    format!("[{}]", cells.join(", "))
                })
                .collect();
            lines.push(format!(
                "D^({d}) ({}x{}) = [{}]",
                block.rows,
                block.cols,
                rows.join(", ")
            ));
            blocks.push(json!({
                "degree": d,
                "rows": block.rows,
                "cols": block.cols,
                "entries": block
                    .entries
                    .iter()
                    .map(|row| row.iter().map(|r| Value::String(rational_string(r))).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            }));
        }
        let payload = json!({
            "kind": "differential",
            "point": point.to_json(),
            "blocks": blocks,
        });
        Ok((CommandOutput { lines, payload }, vec![]))
    }

    fn cmd_rank(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (dm, point) = self.differential_at(c)?;
        let mut lines = Vec::new();
        let mut ranks = serde_json::Map::new();
        for (d, r) in dm.ranks() {
            lines.push(format!("rank^({d}) = {r}"));
            ranks.insert(d.to_string(), json!(r));
        }
        let class = dm.classify().to_string();
        lines.push(format!("classification: {class}"));
        let payload = json!({
            "kind": "rank",
            "point": point.to_json(),
            "ranks": ranks,
            "classification": class,
        });
        Ok((CommandOutput { lines, payload }, vec![]))
    }

    fn differential_at(&self, c: &Command) -> Result<(DegreeMatrices, BasePoint), Diagnostic> {
        let (mname, mspan) = name_arg(c, 0, 2)?;
        let (pt, pspan) = name_arg(c, 1, 2)?;
        let (m, msrc, _) = self.get_morph(mname, mspan)?;
        let (a, pdom) = self.get_point(pt, pspan)?;
        if pdom != msrc {
            return Err(Diagnostic::type_error(
                pspan,
                format!("`{pt}` is a point of `{pdom}`, but `{mname}` starts from `{msrc}`"),
            ));
        }
        let dm = m
            .differential_matrices(a)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        Ok((dm, a.clone()))
    }

    fn cmd_invert_morphism(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (mname, mspan) = name_arg(c, 0, 2)?;
        let (w, _) = uint_arg(c, 1, 2)?;
        let (m, msrc, mtgt) = self.get_morph(mname, mspan)?;
        let m = m.clone();
        let (msrc, mtgt) = (msrc.to_string(), mtgt.to_string());
        let n0 = m.source().n_even();
        let inverse: Vec<BaseCoefficient> = if c.with.is_empty() {
            let identity = (0..n0)
                .all(|j| m.underlying()[j] == BaseCoefficient::variable(n0, j));
            if !identity {
                return Err(Diagnostic::type_error(
                    c.span,
                    "the underlying even map is not the identity; give its inverse \
                     with `with (expr, ...)` in target coordinates",
                ));
            }
            (0..n0).map(|j| BaseCoefficient::variable(n0, j)).collect()
        } else {
            let tgt_cs = m.target().clone();
            let ctx = EvalCtx {
                cs: &tgt_cs,
                domain: Some(&mtgt),
                lift: None,
            };
            if c.with.len() != m.target().n_even() {
                return Err(Diagnostic::type_error(
                    c.span,
                    format!(
                        "`with` needs one expression per even coordinate of `{mtgt}` ({}), got {}",
                        m.target().n_even(),
                        c.with.len()
                    ),
                ));
            }
            let mut exprs = Vec::with_capacity(c.with.len());
            for e in &c.with {
                let g = self.eval(e, &ctx)?;
                let coeff = coefficient_part(&g).ok_or_else(|| {
                    Diagnostic::type_error(
                        e.span(),
                        "`with` expressions must be degree-0 in even coordinates only",
                    )
                })?;
                exprs.push(coeff);
            }
            exprs
        };
        let inv = m
            .invert(&inverse, w)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        Ok(morph_result(inv, mtgt, msrc))
    }

    fn cmd_bracket(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (a, sa) = name_arg(c, 0, 2)?;
        let (b, sb) = name_arg(c, 1, 2)?;
        let (x, xd) = self.get_field(a, sa)?;
        let (y, yd) = self.get_field(b, sb)?;
        if xd != yd {
            return Err(Diagnostic::type_error(
                c.span,
                format!("`{a}` lives on `{xd}` but `{b}` lives on `{yd}`"),
            ));
        }
        let z = VectorField::bracket(x, y)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let domain = xd.to_string();
        Ok(field_result(z, domain))
    }

    fn cmd_apply(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (a, sa) = name_arg(c, 0, 2)?;
        let (b, sb) = name_arg(c, 1, 2)?;
        let (x, xd) = self.get_field(a, sa)?;
        let (f, fd) = self.get_fn(b, sb)?;
        if xd != fd {
            return Err(Diagnostic::type_error(
                c.span,
                format!("`{a}` lives on `{xd}` but `{b}` lives on `{fd}`"),
            ));
        }
        let g = x
            .apply(f)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let domain = xd.to_string();
        Ok(func_result(g, domain))
    }

    fn cmd_euler(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (dname, dspan) = name_arg(c, 0, 1)?;
        let entry = self.domain_entry(dname, dspan)?;
        let x = VectorField::euler(&entry.cs);
        let domain = dname.to_string();
        Ok(field_result(x, domain))
    }

    fn cmd_related(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (a, sa) = name_arg(c, 0, 3)?;
        let (b, sb) = name_arg(c, 1, 3)?;
        let (mn, sm) = name_arg(c, 2, 3)?;
        let (x, xd) = self.get_field(a, sa)?;
        let (y, yd) = self.get_field(b, sb)?;
        let (m, msrc, mtgt) = self.get_morph(mn, sm)?;
        if xd != msrc {
            return Err(Diagnostic::type_error(
                sa,
                format!("`{a}` lives on `{xd}`, but `{mn}` starts from `{msrc}`"),
            ));
        }
        if yd != mtgt {
            return Err(Diagnostic::type_error(
                sb,
                format!("`{b}` lives on `{yd}`, but `{mn}` lands in `{mtgt}`"),
            ));
        }
        let rel = related_check(x, y, m)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let lines = vec![format!("{rel}")];
        let payload = json!({"kind": "related", "related": rel});
        Ok((CommandOutput { lines, payload }, vec![]))
    }

    fn cmd_d(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 1)?;
        let (w, domain) = self.form_operand(name, span, c.span)?;
        let dw = w.d().map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        Ok(form_result(dw, domain))
    }

    fn cmd_ix(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (a, sa) = name_arg(c, 0, 2)?;
        let (b, sb) = name_arg(c, 1, 2)?;
        let (x, xd) = self.get_field(a, sa)?;
        let (w, wd) = self.get_form(b, sb)?;
        if xd != wd {
            return Err(Diagnostic::type_error(
                c.span,
                format!("`{a}` lives on `{xd}` but `{b}` lives on `{wd}`"),
            ));
        }
        let u = w
            .contract(x)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let domain = wd.to_string();
        Ok(form_result(u, domain))
    }

    fn cmd_lie(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (a, sa) = name_arg(c, 0, 2)?;
        let (b, sb) = name_arg(c, 1, 2)?;
        let (x, xd) = self.get_field(a, sa)?;
        let (w, wd) = self.get_form(b, sb)?;
        if xd != wd {
            return Err(Diagnostic::type_error(
                c.span,
                format!("`{a}` lives on `{xd}` but `{b}` lives on `{wd}`"),
            ));
        }
        let u = w
            .lie(x)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let domain = wd.to_string();
        Ok(form_result(u, domain))
    }

    fn cmd_pullback_form(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (mname, mspan) = name_arg(c, 0, 2)?;
        let (wname, wspan) = name_arg(c, 1, 2)?;
        let (m, msrc, mtgt) = self.get_morph(mname, mspan)?;
        let (w, wd) = self.get_form(wname, wspan)?;
        if wd != mtgt {
            return Err(Diagnostic::type_error(
                wspan,
                format!("`{wname}` lives on `{wd}`, but `{mname}` pulls back from `{mtgt}`"),
            ));
        }
        let m = m.clone();
        let w = w.clone();
        let msrc = msrc.to_string();
        let pulled = pullback_form(&m, &w)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let sh = self.shifted_system(&msrc, c.span)?;
        let pulled = pulled
            .reshift(&sh)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        Ok(form_result(pulled, msrc))
    }

    fn cmd_primitive(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 1)?;
        let (w, domain) = self.get_form(name, span)?;
        let dw = w.d().map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        if !dw.is_zero() {
            return Err(Diagnostic::runtime(
                span,
                format!("`{name}` is not closed, so it has no primitive"),
            ));
        }
        let prim = if w.deg() != 0 {
            w.exact_primitive_nonzero_degree()
        } else {
            w.primitive_deg_zero()
        };
        let prim = prim.map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let domain = domain.to_string();
        Ok(form_result(prim, domain))
    }

    fn cmd_cocycle(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 1)?;
        let (t, _) = self.get_bundle(name, span)?;
        let report = t
            .check_cocycle(None, None)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let (lines, payload) = cocycle_report(&report);
        Ok((CommandOutput { lines, payload }, vec![]))
    }

    fn cmd_dual(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 1)?;
        let (t, domain) = self.get_bundle(name, span)?;
        let dual = t.dual_transitions();
        let domain = domain.to_string();
        Ok(bundle_result(dual, domain))
    }

    fn cmd_shift(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 2)?;
        let (l, _) = int_arg(c, 1, 2)?;
        let (t, domain) = self.get_bundle(name, span)?;
        let shifted = t.shift_transitions(l);
        let domain = domain.to_string();
        Ok(bundle_result(shifted, domain))
    }

    fn cmd_pullback_bundle(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (bname, bspan) = name_arg(c, 0, 2)?;
        let (mname, mspan) = name_arg(c, 1, 2)?;
        let (t, bd) = self.get_bundle(bname, bspan)?;
        let (m, msrc, mtgt) = self.get_morph(mname, mspan)?;
        if mtgt != bd {
            return Err(Diagnostic::type_error(
                mspan,
                format!("`{bname}` lives over `{bd}`, but `{mname}` lands in `{mtgt}`"),
            ));
        }
        let pulled = t
            .pullback_transitions_uniform(m)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let domain = msrc.to_string();
        Ok(bundle_result(pulled, domain))
    }

    fn cmd_ek(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (bname, bspan) = name_arg(c, 0, 2)?;
        let (k, kspan) = int_arg(c, 1, 2)?;
        let (t, domain) = self.get_bundle(bname, bspan)?;
        let weight = self.domains[domain].weight;
        let mut g: BTreeMap<(usize, usize), Vec<Vec<BaseCoefficient>>> = BTreeMap::new();
        for (a, b) in t.overlaps() {
            let matrix = t.matrix(a, b).expect("declared overlap");
            let rows = matrix
                .iter()
                .map(|row| row.iter().map(|f| f.body()).collect())
                .collect();
            g.insert((a, b), rows);
        }
        let (bundle, glue) = shifted_bundle_ek(
            t.base(),
            t.charts(),
            t.fiber().rank(),
            &g,
            k,
            Truncation::Weight(weight),
        )
        .map_err(|e| Diagnostic::runtime(kspan, e.to_string()))?;
        let lines = vec![format!(
            "shifted bundle: {} charts, rank {}, fiber degree {k}",
            bundle.charts(),
            bundle.fiber().rank(),
        )];
        let payload = json!({
            "kind": "shifted-bundle",
            "domain": domain,
            "bundle": bundle.to_json(),
            "atlas": glue.to_json(),
        });
        let binds = vec![
            Obj::BundleV { t: bundle, domain: domain.to_string() },
            Obj::AtlasV { g: glue },
        ];
        Ok((CommandOutput { lines, payload }, binds))
    }

    fn cmd_verify_atlas(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 1)?;
        let g = self.get_atlas(name, span)?;
        let report = g
            .verify(None)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let (lines, payload) = gluing_report(&report);
        Ok((CommandOutput { lines, payload }, vec![]))
    }

    fn cmd_check_global(&mut self, c: &Command) -> Result<(CommandOutput, Vec<Obj>), Diagnostic> {
        let (name, span) = name_arg(c, 0, 1)?;
        let (f, atlas) = match self.lookup(name, span)? {
            Obj::GlobalV { f, atlas } => (f, atlas.clone()),
            o => {
                return Err(Diagnostic::type_error(
                    span,
                    format!("`{name}` is {}, expected a global function", o.describe()),
                ))
            }
        };
        let glue = self.get_atlas(&atlas, span)?;
        let pass = check_global_function(glue, f)
            .map_err(|e| Diagnostic::runtime(c.span, e.to_string()))?;
        let lines = vec![if pass { "PASS".to_string() } else { "FAIL".to_string() }];
        let payload = json!({"kind": "global-check", "pass": pass});
        Ok((CommandOutput { lines, payload }, vec![]))
    }

    /// A form argument for `d`: either a form by name, or a function lifted
    /// to its degree-0 differential-coordinate image.
    fn form_operand(&mut self, name: &str, span: Span, cspan: Span) -> Result<(Form, String), Diagnostic> {
        match self.lookup(name, span)? {
            Obj::FormV { w, domain } => Ok((w.clone(), domain.clone())),
            Obj::Func { f, domain } => {
                let f = f.clone();
                let domain = domain.clone();
                let sh = self.shifted_system(&domain, cspan)?;
                let w = Form::from_function(sh, &f)
                    .map_err(|e| Diagnostic::runtime(span, e.to_string()))?;
                Ok((w, domain))
            }
            o => Err(Diagnostic::type_error(
                span,
                format!("`{name}` is {}, expected a form or a function", o.describe()),
            )),
        }
    }
}

// ----------------------------------------------------------------------
// Command argument helpers
// ----------------------------------------------------------------------

fn check_arity(c: &Command, n: usize) -> Result<(), Diagnostic> {
    if c.args.len() != n {
        return Err(Diagnostic::type_error(
            c.span,
            format!(
                "`{}` takes {n} argument(s), got {}",
                c.name,
                c.args.len()
            ),
        ));
    }
    Ok(())
}

fn name_arg(c: &Command, i: usize, arity: usize) -> Result<(&str, Span), Diagnostic> {
    check_arity(c, arity)?;
    match &c.args[i] {
        Arg::Name(n, sp) => Ok((n, *sp)),
        Arg::Int(_, sp) => Err(Diagnostic::type_error(
            *sp,
            format!("argument {} of `{}` must be a name", i + 1, c.name),
        )),
    }
}

fn int_arg(c: &Command, i: usize, arity: usize) -> Result<(i64, Span), Diagnostic> {
    check_arity(c, arity)?;
    match &c.args[i] {
        Arg::Int(v, sp) => Ok((*v, *sp)),
        Arg::Name(_, sp) => Err(Diagnostic::type_error(
            *sp,
            format!("argument {} of `{}` must be an integer", i + 1, c.name),
        )),
    }
}

fn uint_arg(c: &Command, i: usize, arity: usize) -> Result<(u32, Span), Diagnostic> {
    let (v, sp) = int_arg(c, i, arity)?;
    u32::try_from(v).map(|w| (w, sp)).map_err(|_| {
        Diagnostic::type_error(
            sp,
            format!("argument {} of `{}` must be a nonnegative weight", i + 1, c.name),
        )
    })
}

fn obj_domain(o: &Obj) -> Option<&str> {
    match o {
        Obj::Func { domain, .. }
        | Obj::PointV { domain, .. }
        | Obj::FieldV { domain, .. }
        | Obj::FormV { domain, .. }
        | Obj::BundleV { domain, .. } => Some(domain),
        Obj::Morph { .. } | Obj::AtlasV { .. } | Obj::GlobalV { .. } => None,
    }
}

fn disp(d: Option<&str>) -> &str {
    d.unwrap_or("?")
}

/// The body of an expression that involves no graded coordinates and has
/// degree 0, if it is one.
fn coefficient_part(g: &GradedFunction) -> Option<BaseCoefficient> {
    if g.degree() != 0 {
        return None;
    }
    let zero = g.cs().zero_index();
    if g.terms().all(|(p, _)| *p == zero) {
        Some(g.body())
    } else {
        None
    }
}

/// Zero results adopt the expected degree; nonzero results must match it.
fn coerce_degree(f: GradedFunction, want: i64) -> Result<GradedFunction, String> {
    if f.degree() == want {
        Ok(f)
    } else if f.is_zero() {
        Ok(GradedFunction::zero(f.cs_arc().clone(), want, f.trunc()))
    } else {
        Err(format!(
            "expected degree {want}, but the expression has degree {}",
            f.degree()
        ))
    }
}

fn truncate_function(f: &GradedFunction, w: u32) -> GradedFunction {
    let trunc = Truncation::Weight(w).min(f.trunc());
    let terms = f.terms().map(|(p, c)| (p.clone(), c.clone())).collect();
    GradedFunction::from_term_list(f.cs_arc().clone(), f.degree(), trunc, terms)
        .expect("re-truncating an existing function")
}

// ----------------------------------------------------------------------
// Result and payload builders
// ----------------------------------------------------------------------

fn payload_fn(f: &GradedFunction, domain: &str) -> Value {
    json!({"kind": "function", "domain": domain, "function": f.to_json()})
}

fn payload_morph(m: &DomainMorphism, source: &str, target: &str) -> Value {
    json!({"kind": "morphism", "source": source, "target": target, "morphism": m.to_json()})
}

fn payload_field(x: &VectorField, domain: &str) -> Value {
    json!({"kind": "field", "domain": domain, "field": x.to_json()})
}

fn payload_form(w: &Form, domain: &str) -> Value {
    json!({"kind": "form", "domain": domain, "form": w.to_json()})
}

fn payload_bundle(t: &TransitionData, domain: &str) -> Value {
    json!({"kind": "bundle", "domain": domain, "bundle": t.to_json()})
}

fn payload_atlas(g: &GluingData) -> Value {
    json!({"kind": "atlas", "atlas": g.to_json()})
}

fn func_result(f: GradedFunction, domain: String) -> (CommandOutput, Vec<Obj>) {
    let lines = vec![f.render()];
    let payload = payload_fn(&f, &domain);
    (CommandOutput { lines, payload }, vec![Obj::Func { f, domain }])
}

fn morph_result(m: DomainMorphism, source: String, target: String) -> (CommandOutput, Vec<Obj>) {
    let lines = vec![format!(
        "{source} -> {target}{} {}",
        render::upto_suffix(m.trunc()),
        render::morphism_rules(&m)
    )];
    let payload = payload_morph(&m, &source, &target);
    (CommandOutput { lines, payload }, vec![Obj::Morph { m, source, target }])
}

fn field_result(x: VectorField, domain: String) -> (CommandOutput, Vec<Obj>) {
    let lines = vec![format!(
        "degree {}{} {}",
        x.degree(),
        render::upto_suffix(x.trunc()),
        render::field_rules(&x)
    )];
    let payload = payload_field(&x, &domain);
    (CommandOutput { lines, payload }, vec![Obj::FieldV { x, domain }])
}

fn form_result(w: Form, domain: String) -> (CommandOutput, Vec<Obj>) {
    let lines = vec![w.value().render()];
    let payload = payload_form(&w, &domain);
    (CommandOutput { lines, payload }, vec![Obj::FormV { w, domain }])
}

fn bundle_result(t: TransitionData, domain: String) -> (CommandOutput, Vec<Obj>) {
    let degrees: Vec<String> = t.fiber().degrees().iter().map(|d| d.to_string()).collect();
    let lines = vec![format!(
        "bundle over {domain}: {} charts, rank {}, fiber degrees [{}]",
        t.charts(),
        t.fiber().rank(),
        degrees.join(", ")
    )];
    let payload = payload_bundle(&t, &domain);
    (CommandOutput { lines, payload }, vec![Obj::BundleV { t, domain }])
}

fn cocycle_report(report: &CocycleReport) -> (Vec<String>, Value) {
    let failed = report.failures();
    let mut lines = vec![if failed == 0 {
        format!("PASS ({failed} triples failed)")
    } else {
        format!("FAIL ({failed} triples failed)")
    }];
    let mut witnesses = Vec::new();
    for check in &report.triples {
        if let Some(w) = &check.witness {
            let (a, b, cc) = check.triple;
            lines.push(format!(
                "  triple ({a},{b},{cc}) entry ({},{}): {} != {}",
                w.row, w.col, w.lhs, w.rhs
            ));
            witnesses.push(json!({
                "triple": [a, b, cc],
                "row": w.row,
                "col": w.col,
                "lhs": w.lhs,
                "rhs": w.rhs,
            }));
        }
    }
    let payload = json!({
        "kind": "cocycle",
        "pass": failed == 0,
        "checked": report.triples.len(),
        "failed": failed,
        "witnesses": witnesses,
    });
    (lines, payload)
}

fn gluing_report(report: &GluingReport) -> (Vec<String>, Value) {
    let total = report.identities.len() + report.inverses.len() + report.cocycles.len();
    let failed = report.failures();
    let mut lines = vec![if failed == 0 {
        format!("PASS ({total} checks, 0 failed)")
    } else {
        format!("FAIL ({total} checks, {failed} failed)")
    }];
    let mut witnesses = Vec::new();
    for check in &report.identities {
        if let Some(w) = &check.witness {
            let (a, b) = check.pair;
            lines.push(format!("  identity ({a},{b}) {w}"));
            witnesses.push(json!({
                "check": "identity", "pair": [a, b],
                "coordinate": w.coordinate, "lhs": w.lhs, "rhs": w.rhs,
            }));
        }
    }
    for check in &report.inverses {
        if let Some(w) = &check.witness {
            let (a, b) = check.pair;
            lines.push(format!("  inverse ({a},{b}) {w}"));
            witnesses.push(json!({
                "check": "inverse", "pair": [a, b],
                "coordinate": w.coordinate, "lhs": w.lhs, "rhs": w.rhs,
            }));
        }
    }
    for check in &report.cocycles {
        if let Some(w) = &check.witness {
            let (a, b, cc) = check.triple;
            lines.push(format!("  triple ({a},{b},{cc}) {w}"));
            witnesses.push(json!({
                "check": "cocycle", "triple": [a, b, cc],
                "coordinate": w.coordinate, "lhs": w.lhs, "rhs": w.rhs,
            }));
        }
    }
    let payload = json!({
        "kind": "gluing-report",
        "pass": failed == 0,
        "identities": report.identities.len(),
        "inverses": report.inverses.len(),
        "triples": report.cocycles.len(),
        "failed": failed,
        "witnesses": witnesses,
    });
    (lines, payload)
}

// ----------------------------------------------------------------------
// Script drivers
// ----------------------------------------------------------------------

fn failure(d: Diagnostic, opts: &Options) -> Outcome {
    let stdout = if opts.json {
        let doc = json!({"schema": 1, "ok": false, "error": d.to_json()});
        format!("{}\n", serde_json::to_string_pretty(&doc).expect("serialize"))
    } else {
        String::new()
    };
    Outcome {
        stdout,
        ok: false,
        diagnostics: vec![d],
    }
}

/// Parse and execute a script: declarations first (aborting on the first bad
/// one), then commands (reporting failures and continuing).
pub fn run_source(src: &str, opts: &Options) -> Outcome {
    let stmts = match crate::parser::parse(src) {
        Ok(s) => s,
        Err(d) => return failure(d, opts),
    };
    let mut engine = Engine::new(opts.base_weight());
    for stmt in &stmts {
        if !stmt.is_command() {
            if let Err(d) = engine.declare(stmt) {
                return failure(d, opts);
            }
        }
    }
    let mut text = String::new();
    let mut results = Vec::new();
    let mut diagnostics = Vec::new();
    for stmt in &stmts {
        let c = match stmt {
            Stmt::Command(c) => c,
            _ => continue,
        };
        match engine.command(c) {
            Ok(out) => {
                if opts.json {
                    results.push(json!({
                        "command": c.name,
                        "line": c.span.line,
                        "col": c.span.col,
                        "ok": true,
                        "output": out.payload,
                    }));
                } else {
                    text.push_str(&format!("> {}\n", c.raw));
                    for line in &out.lines {
                        text.push_str(line);
                        text.push('\n');
                    }
                }
            }
            Err(d) => {
                if opts.json {
                    results.push(json!({
                        "command": c.name,
                        "line": c.span.line,
                        "col": c.span.col,
                        "ok": false,
                        "error": d.to_json(),
                    }));
                } else {
                    text.push_str(&format!("> {}\n", c.raw));
                    text.push_str(&format!("error at {}:{}: {}\n", d.line, d.col, d.message));
                }
                diagnostics.push(d);
            }
        }
    }
    let ok = diagnostics.is_empty();
    let stdout = if opts.json {
        let doc = json!({"schema": 1, "ok": ok, "results": results});
        format!("{}\n", serde_json::to_string_pretty(&doc).expect("serialize"))
    } else {
        text
    };
    Outcome {
        stdout,
        ok,
        diagnostics,
    }
}

/// Parse a script and type-check its declarations without running commands.
pub fn check_source(src: &str, opts: &Options) -> Outcome {
    let stmts = match crate::parser::parse(src) {
        Ok(s) => s,
        Err(d) => return failure(d, opts),
    };
    let mut engine = Engine::new(opts.base_weight());
    let mut commands = 0usize;
    for stmt in &stmts {
        if stmt.is_command() {
            commands += 1;
        } else if let Err(d) = engine.declare(stmt) {
            return failure(d, opts);
        }
    }
    let declarations = stmts.len() - commands;
    let stdout = if opts.json {
        let doc = json!({
            "schema": 1,
            "ok": true,
            "declarations": declarations,
            "commands": commands,
        });
        format!("{}\n", serde_json::to_string_pretty(&doc).expect("serialize"))
    } else {
        "ok\n".to_string()
    };
    Outcome {
        stdout,
        ok: true,
        diagnostics: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_text(src: &str) -> Outcome {
        run_source(src, &Options::default())
    }

    #[test]
    fn declarations_then_commands() {
        let out = run_text(
            "domain D { even x; coord xi : 1; coord eta : 1; }\n\
             fn f : 2 = x*xi*eta;\n\
             simplify f;\n",
        );
        assert!(out.ok, "{:?}", out.diagnostics);
        assert_eq!(out.stdout, "> simplify f;\nfn f : 2 on D = x*xi*eta;\n");
    }

    #[test]
    fn commands_run_after_all_declarations() {
        // The command appears before the function it uses; declarations are
        // processed first, so it still resolves.
        let out = run_text(
            "domain D { even x; }\n\
             simplify g;\n\
             fn g : 0 = x*x;\n",
        );
        assert!(out.ok);
        assert!(out.stdout.contains("fn g : 0 on D = x^2;"));
    }

    #[test]
    fn degree_mismatch_is_positioned() {
        let out = run_text("domain D { even x; coord xi : 1; coord eta : 1; }\nfn f : 1 = xi*eta;\n");
        assert!(!out.ok);
        let d = &out.diagnostics[0];
        assert_eq!((d.line, d.col, d.kind), (2, 12, "degree"));
        assert!(d.message.contains("degree 1"), "{}", d.message);
        assert!(d.message.contains("degree 2"), "{}", d.message);
    }

    #[test]
    fn failing_command_reports_and_continues() {
        let out = run_text(
            "domain D { even x; }\nfn f : 0 = x;\npartial f y;\nsimplify f;\n",
        );
        assert!(!out.ok);
        assert_eq!(out.diagnostics.len(), 1);
        assert!(out.stdout.contains("error at 3:11:"));
        assert!(out.stdout.contains("fn f : 0 on D = x;"));
    }

    #[test]
    fn exterior_derivative_of_square() {
        let out = run_text("domain D { even x; }\nfn f : 0 = x^2;\nd f;\n");
        assert!(out.ok, "{:?}", out.diagnostics);
        assert_eq!(out.stdout, "> d f;\n2*x*dx\n");
    }

    #[test]
    fn taylor_binds_two_names() {
        let out = run_text(
            "domain D { even x; }\n\
             fn f : 0 = x^2 + x + 1;\n\
             point m = (1);\n\
             taylor f m 1 as T R;\n\
             simplify T;\n",
        );
        assert!(out.ok, "{:?}", out.diagnostics);
        assert!(out.stdout.contains("T = "));
        assert!(out.stdout.contains("fn T : 0 on D = "));
    }

    #[test]
    fn json_envelope_has_schema_and_results() {
        let out = run_source(
            "domain D { even x; }\nfn f : 0 = x;\nsimplify f;\nsimplify missing;\n",
            &Options { json: true, ..Options::default() },
        );
        assert!(!out.ok);
        let doc: Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(doc["schema"], 1);
        assert_eq!(doc["ok"], false);
        let results = doc["results"].as_array().unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0]["ok"], true);
        assert_eq!(results[1]["ok"], false);
        assert_eq!(results[1]["error"]["kind"], "name");
        assert_eq!(results[1]["error"]["line"], 4);
    }

    #[test]
    fn trunc_statement_sets_following_domain_weights() {
        let out = run_text(
            "trunc 3;\n\
             domain D { even x; coord a : 2; coord b : -2; }\n\
             fn f : 0 = 1 + a*b;\n\
             invert f 9;\n",
        );
        assert!(out.ok, "{:?}", out.diagnostics);
        // The Neumann tail stops at the requested weight, not the domain
        // default, because `invert` takes its own bound.
        assert!(out.stdout.contains("a^2*b^2"), "{}", out.stdout);
    }

    #[test]
    fn euler_field_and_lie_scale_by_degree() {
        let out = run_text(
            "domain D { even x; coord xi : 1; coord eta : 2; }\n\
             form w : 1 = xi*dx;\n\
             euler D as E;\n\
             lie E w;\n",
        );
        assert!(out.ok, "{:?}", out.diagnostics);
        // deg(w) = deg(xi) + deg(dx) - step = 1 + 1 - 1 = 1, so L_E w = w.
        assert!(out.stdout.contains("> lie E w;\nxi*dx\n"), "{}", out.stdout);
    }

    #[test]
    fn check_reports_ok_without_running_commands() {
        let out = check_source(
            "domain D { even x; }\nfn f : 0 = x;\npartial f nope;\n",
            &Options::default(),
        );
        // The bad command never runs; check only validates declarations.
        assert!(out.ok);
        assert_eq!(out.stdout, "ok\n");
    }
}
