pub mod analysis;
pub mod cli;
pub mod expr;
pub mod io;
pub mod registry;
pub mod simulation;
pub mod synthesis;
