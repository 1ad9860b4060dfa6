//! Exact solver and verifier for the p-adic solubility of a diagonal form of
//! degree `k` paired with a linear form,
//!
//! ```text
//! a_1 x_1^k + … + a_s x_s^k = 0,    b_1 x_1 + … + b_s x_s = 0,
//! ```
//!
//! with engines for the degrees `k = p − 1`, `k = p(p − 1)`, `k = 2^τ`, and a
//! contraction pipeline for everything else.  Every answer is a certificate
//! that [`verify`] re-checks with exact arithmetic.

pub mod arith;
pub mod certificate;
pub mod combinat;
pub mod descent;
pub mod driver;
pub mod engine_contract;
pub mod engine_pm1;
pub mod engine_pow2;
pub mod engine_ppm1;
pub mod error;
pub mod generators;
pub mod hensel;
pub mod normalize;
pub mod oracle;
pub mod serde_util;
pub mod system;
pub mod transform;

pub use arith::{Int, Rat, Valuation};
pub use certificate::{verify, Certificate, CertificateKind, Payload, VerifyReport};
pub use driver::{solve, EngineChoice, SolveInput, SolveOptions};
pub use error::{Error, Result};
pub use hensel::{check_witness, HenselWitness};
pub use oracle::{find_nonsingular, gamma_star_bruteforce, CongruenceQuery, OracleReport};
pub use system::{stats, DiagLinSystem, PadicContext, SystemStats, SystemType};
pub use transform::{apply_transform, Transcript, TransformStep, VarImage};
