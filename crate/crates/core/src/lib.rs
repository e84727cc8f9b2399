pub mod builtin;
pub mod cli;
pub mod control;
pub mod csystem;
pub mod grammar;
pub mod report;
pub mod xmi;
