//! File formats, spectral tools, scan orchestration and the command-line
//! front end around [`nssl_core`].

pub mod cli;
pub mod config;
pub mod io;
pub mod records;
pub mod scan;
pub mod spectral;
pub mod verify;
