//! File formats, benchmark harness and command-line front end for
//! [`rotavg_core`].

pub mod bench;
pub mod cli;
pub mod cloud;
pub mod io;
