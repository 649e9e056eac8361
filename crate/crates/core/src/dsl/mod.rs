//! Concrete syntax for models: lexer, parser, printer and elaboration into
//! checked components.
//!
//! ```text
//! env { fout = 0.75 }
//! controller wlctrl reactivity 0.05 timestamp tau_1 {
//!   wlm := wl; ((?(wlm >= 6.5); fin := 0) U (?(wlm <= 3.5); fin := 1));
//! }
//! plant wl controllability 0.2 { wl' = fin - fout & wl >= 0 }
//! contract wl assume true guarantee 3 <= wl & wl <= 7 init true
//! invariant j { wl = (fin - fout) * (t - tau_1) + wlm }
//! system tank = ccs(wlctrl, wl) with j
//! ```

pub mod elaborate;
pub mod lexer;
pub mod model;
pub mod parser;
pub mod print;

use thiserror::Error;

use crate::ast::AstError;
use crate::component::ComponentError;

pub use elaborate::{elaborate, load, load_str, Elaborated, Model, Origin, Value};
pub use lexer::Pos;
pub use model::{Decl, Located, ModelFile, ScenarioValue, SystemExpr};
pub use parser::{parse_formula, parse_model, parse_program, parse_term};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("{pos}: syntax error: expected {expected}, found {found}")]
    Syntax {
        pos: Pos,
        expected: String,
        found: String,
    },
    #[error("{pos}: {source}")]
    Ast { pos: Pos, source: AstError },
    #[error("{pos}: unresolved {what} `{name}`")]
    Name {
        pos: Pos,
        name: String,
        what: &'static str,
    },
    #[error("{pos}: `{name}` is declared twice")]
    Duplicate { pos: Pos, name: String },
    #[error("{pos}: expected {expected}, `{name}` is {found}")]
    Kind {
        pos: Pos,
        name: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("{pos}: environment sets `{name}` = {env}, declaration says {declared}")]
    BoundMismatch {
        pos: Pos,
        name: String,
        declared: String,
        env: String,
    },
    #[error("{pos}: {source}")]
    Component { pos: Pos, source: ComponentError },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl DslError {
    pub fn pos(&self) -> Option<Pos> {
        match self {
            DslError::Syntax { pos, .. }
            | DslError::Ast { pos, .. }
            | DslError::Name { pos, .. }
            | DslError::Duplicate { pos, .. }
            | DslError::Kind { pos, .. }
            | DslError::BoundMismatch { pos, .. }
            | DslError::Component { pos, .. } => Some(*pos),
            DslError::Io { .. } => None,
        }
    }

    /// Parse-level problems as opposed to failed gates.
    pub fn is_syntax(&self) -> bool {
        matches!(
            self,
            DslError::Syntax { .. } | DslError::Ast { .. } | DslError::Io { .. }
        )
    }
}
