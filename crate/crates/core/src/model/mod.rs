//! Model families, the rate-expression grammar and model documents.

mod document;
mod expr;
mod spec;

pub use document::{load_model, parse_model, ModelDocument};
pub use expr::{parse_rate_expr, BinOp, Expr, Func1, Func2, ParseError, ParseErrorKind, RateFunction};
pub use spec::{
    BirthDeathSpec, DiffusionSpec, DriftProfile, ModelSpec, RadialSpec, SingleDeathSpec, SingleDeathTail,
    StableSdeSpec, TimeChangedStableSpec, TreeNode, TreeRay, TreeSpec,
};
