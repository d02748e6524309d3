//! Mesh refinement and texture recovery on a deformable tetrahedral SDF.
//!
//! The crate covers the whole geometry/appearance loop:
//!
//! - [`scene`]: horizontal camera rigs, skeleton pose images, pose sheets
//! - [`tetra`]: the tetrahedral SDF grid and Marching Tetrahedra
//! - [`sdf`] / [`fit`]: mesh signed distance and grid adaptation to a coarse mesh
//! - [`raster`]: deterministic rasterizer with analytic gradients
//! - [`sculpt`]: normal-map driven refinement of the grid
//! - [`unwrap`] / [`texture`]: cylindrical UV atlas and texture baking
//! - [`pipeline`]: end-to-end orchestration with reproducible reports

pub mod camera;
pub mod error;
pub mod fit;
pub mod image;
pub mod math;
pub mod optim;
pub mod pipeline;
pub mod raster;
pub mod mesh;
pub mod scene;
pub mod sculpt;
pub mod sdf;
pub mod testkit;
pub mod texture;
pub mod tetra;
pub mod unwrap;

pub use camera::{load_camera_rig, save_camera_rig, Camera, CameraRig, ViewTag};
pub use error::{Error, Result};
pub use image::{load_image, save_image, ImageKind, ImagePlane};
pub use math::{Aabb, Vec3};
pub use mesh::{load_mesh, save_mesh, TriMesh};
pub use tetra::TetGrid;
