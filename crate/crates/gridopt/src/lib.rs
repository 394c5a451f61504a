//! AC optimal power flow stack: case-file IO, grid modeling, Newton power
//! flow, four OPF formulations with analytic derivatives, a primal-dual
//! interior-point solver over an internal sparse symmetric-indefinite
//! factorization, and performance-profile benchmarking.

pub mod mpc;
pub mod bench;
pub mod grid;
pub mod ipm;
pub mod opf;
pub mod pf;
pub mod sparse;
