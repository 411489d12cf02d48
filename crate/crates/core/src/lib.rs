pub mod expr;
pub mod jet;
pub mod field;
pub mod manifold;
pub mod checks;
pub mod reduction;
pub mod pipeline;
pub mod oracle;
pub mod session;
pub mod catalog;
pub mod run;
pub mod suite;
