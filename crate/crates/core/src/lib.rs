pub mod asymptotics;
pub mod duality;
pub mod error;
pub mod fredholm;
pub mod linalg;
pub mod markov;
pub mod moments;
pub mod par;
pub mod polymer;
pub mod qfunc;
pub mod quadrature;
pub mod transform;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
