//! Headless runner, live operator service and command-line interface for
//! the somnav engine.

pub mod cli;
pub mod headless;
pub mod protocol;
pub mod server;
pub mod session;
