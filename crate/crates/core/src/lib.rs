pub mod banded;
pub mod continuation;
pub mod eigen;
pub mod evolve;
pub mod error;
pub mod field;
pub mod grid;
pub mod ground_state;
pub mod io;
pub mod laplacian;
pub mod linearized;
pub mod params;

pub use error::{Error, Result};
pub use grid::build_grid;
