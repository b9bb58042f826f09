//! Compiler-in-the-loop COBOL generation, repair and evaluation.

pub mod benchmark;
pub mod compiler;
pub mod digest;
pub mod evalkit;
pub mod llm;
pub mod repairloop;
pub mod source;
pub mod taxonomy;
