//! Deformable tetrahedral SDF grid and Marching Tetrahedra.

mod checkpoint;
mod grid;
mod mt;
pub mod pyramid;

pub use checkpoint::{load_grid, save_grid};
pub use grid::{barycentric, build_grid, tet_signed_volume, TetGrid};
pub use mt::{
    crossing_point, extract, extract_tets, marching_tetrahedra, mt_vertex_jacobian, surface_backward, EdgeJacobian,
    MtSurface,
};
