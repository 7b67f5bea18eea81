//! Decoupled implicit Bidomain solver on structured Q1 hexahedral meshes
//! with BDDC and FETI-DP preconditioners.

pub mod bidomain;
pub mod cholesky;
pub mod conductivity;
pub mod dualprimal;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod ionic;
pub mod krylov;
pub mod linsolve;
pub mod mesh;
pub mod output;
pub mod scaling;
pub mod schur;
pub mod sparse;
pub mod system;
pub mod topology;

pub use conductivity::{ConductivityTensors, Medium};
pub use error::{Error, Result};
pub use mesh::{GeometryKind, HexMesh, MeshConfig};
pub use sparse::CsrMatrix;
