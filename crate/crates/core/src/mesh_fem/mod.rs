//! Trilinear hexahedral discretization of the slab, the state operator
//! `-div(e^xi grad u)` with a Robin term `e^m u` on the bottom, and pointwise
//! observation on the top face.

mod assembly;
mod element;
mod field;
pub mod io;
mod mesh;
mod sensors;
mod surface;

pub use assembly::{
    assemble, boundary_mass, default_source, source_load, state_operator, volume_mass,
    volume_stiffness, AssembledSystem, STATE_TAG,
};
pub use field::{Field, Support};
pub use mesh::{build_box_mesh, BoundaryFace, FaceTag, Mesh, BASE_LENGTH, HEIGHT};
pub use sensors::SensorGrid;
pub use surface::BottomSurface;
