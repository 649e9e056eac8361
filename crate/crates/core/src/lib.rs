//! Modeling, composition and checking of component-based computer-controlled
//! hybrid systems.

pub mod ast;
pub mod check;
pub mod component;
pub mod composition;
pub mod dsl;
pub mod eval;
pub mod export;
pub mod obligation;
pub mod par;
pub mod semantics;
pub mod sim;
