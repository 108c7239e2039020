pub mod geometry;
pub mod dmp;
pub mod costs;
pub mod pi2;
pub mod dataset;
pub mod mlp;
pub mod perception;
pub mod planner;

pub use costs::{ModelConfig, ModelFamily};
pub use dmp::{Dmp, DmpConfig, ForcingWeights};
pub use geometry::{Frame, Trajectory, Vec3};
pub use mlp::MlpModel;
pub use perception::{Aabb, Detection, Mode, PointCloud};
pub use planner::{ObstacleSet, PlanMode, PlanResult};
