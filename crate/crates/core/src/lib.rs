//! Operator-valued free, Boolean and conditionally free additive convolution on truncated
//! moment data, with the Boolean-to-free Bercovici-Pata map, limit theorems and analytic
//! subordination for matrix-valued distributions.

pub mod alg;
pub mod convolve;
pub mod distribution;
pub mod error;
pub mod guard;
pub mod io;
pub mod multimap;
pub mod oracle;
pub mod random;
pub mod scalar;
pub mod series;
pub mod subordination;
pub mod transforms;
pub mod verify;

pub use alg::{Embedding, Inclusion, LinearMap, Mat, C64};
pub use distribution::{DistPair, Family, Functional, OVDistribution, OperatorModel};
pub use error::{Error, Result};
pub use multimap::MultiMap;
pub use oracle::Kind;
pub use series::{NCSeries, Shape};
pub use transforms::TransformKind;
