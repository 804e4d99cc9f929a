//! Oracles and fixtures shared by the integration tests. Nothing here calls
//! the code under test for the quantity being checked.
#![allow(dead_code)]

pub mod chain;
pub mod corpus;
pub mod ode;
