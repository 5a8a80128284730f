//! Geometric primitives: rotations, similarity transforms, the parametric
//! mesh, triangle frames and orbit cameras.

pub mod camera;
pub mod frames;
pub mod mesh;
pub mod mesh_io;
pub mod rotation;
pub mod transform;

pub use camera::{
    camera_from_orbit, camera_in_frame, project, rotate_about_vertical, vertical_rotation, Camera, OrbitRig,
    Projection, NEAR_PLANE,
};
pub use frames::{triangle_frame, triangle_frame_backward, triangle_frames, TriangleFrame};
pub use mesh::{icosphere, mesh_eval, triangle_area, MeshParams, ParametricMesh, EPS_AREA};
pub use mesh_io::{load_mesh, parse_blendshapes, parse_obj, save_mesh, write_blendshapes, write_obj};
pub use rotation::{rodrigues_exp, rodrigues_jacobian, rotation_angle, skew, RotationVector};
pub use transform::{apply_transform, to_matrix, SimilarityTransform};
