#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod error;
pub mod lmi;
pub mod matrix;
pub mod models;
pub mod simulate;
