//! Darcy datasets: grid fields, GRF permeability groups, TPMS voxel lattices
//! and the `PNDS` dataset file format.

mod dataset;
mod grf;
mod grid;
mod io;
mod tpms;

pub use dataset::{
    default_schedule, generate_groups, generate_sample, Dataset, DatasetManifest, GridSample, GroupSpec, SampleGroup,
    DEFAULT_LENGTH_SCALE,
};
pub use grf::{make_permeability, sample_grf};
pub use grid::GridField;
pub use io::{read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use tpms::{admissible_range, level_set, tpms_voxel, tpms_voxel_in_range, Network, TpmsKind, VoxelGrid};
