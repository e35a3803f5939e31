pub mod adapt;
pub mod assembly;
pub mod estimator;
pub mod experiment;
pub mod mesh;
pub mod norms;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod taylor;
