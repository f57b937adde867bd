//! Exact algebraic models for configuration spaces of points: Kontsevich graph
//! complexes, decorated graphs over a manifold, framed variants and the
//! cohomology machinery to compute with them.

pub mod cartan;
pub mod error;
pub mod framed;
pub mod graph;
pub mod homology;
pub mod kontsevich;
pub mod linalg;
pub mod manifold;
pub mod scalar;

pub use error::Error;
pub use graph::{canonical_form, Color, Deco, Edge, Graph, GraphComb, LinComb};
pub use linalg::SparseMatrix;
pub use scalar::{Scalar, Q};

pub type Result<T> = std::result::Result<T, Error>;
