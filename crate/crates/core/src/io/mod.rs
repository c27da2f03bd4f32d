//! Parameter files and result output.

mod checkpoint;
mod params;
mod stats;
mod vtk;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use params::{parse_params, FromParam, ParamTree};
pub use stats::{StatsWriter, StepRecord, STATS_HEADER};
pub use vtk::{read_vtk, write_vtk, write_vtk_file, VtkData, VtkField};
