//! Batch interpreter for graded-domain scripts: declarations build named
//! domains, functions, morphisms, fields, forms, bundles, and atlases;
//! commands compute with them and print canonical text or JSON.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod render;
pub mod run;

pub use run::{check_source, run_source, CommandOutput, Diagnostic, Engine, Obj, Options, Outcome};
