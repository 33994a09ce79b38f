//! Helpers shared by the integration and acceptance suites.
#![allow(dead_code)]

pub mod fixtures;
pub mod oracles;
pub mod stub_server;
pub mod synth;
