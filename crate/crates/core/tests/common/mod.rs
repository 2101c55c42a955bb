//! Independent reference computations and shared fixtures for the integration tests.
#![allow(dead_code)]

pub mod fixtures;
pub mod oracles;
