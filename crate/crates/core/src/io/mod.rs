//! File formats.

pub mod csv;
pub mod kv;
pub mod pgm;
pub mod qtag;
