pub mod dsl;
pub mod evaluation;
pub mod extraction;
pub mod inference;
pub mod kb;
pub mod learning;
pub mod ranking;
pub mod symbol;

pub use symbol::Symbol;
