pub mod acceptance;
pub mod classify;
pub mod cli;
pub mod dd;
pub mod harmonic;
pub mod hyperbolic;
pub mod inner;
pub mod maps;
pub mod quad;
pub mod rng;
pub mod stats;
