//! Fiber-Fourier calculus on the unit tangent bundle.

pub mod eval;
pub mod function;
pub mod grid;
pub mod io;
pub mod ops;
pub mod random;

pub use eval::PointEvaluator;
pub use function::FiberFunction;
pub use grid::{BaseGrid, PhaseGrid};
pub use io::FiberFunctionRecord;
pub use ops::{curvature_function, frame_residuals, lambda_function, magnetic_curvature_function, Operator, LEAKAGE_TOLERANCE};
pub use random::{random_fiber_function, AnalyticFiberFunction, RandomFiberSpec};
