pub mod error;
pub mod kron;
pub mod moments;
pub mod sigma;
pub mod poly_update;
pub mod filter;
pub mod models;
pub mod harness;
