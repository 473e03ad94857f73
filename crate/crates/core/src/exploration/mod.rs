//! Piecewise-linear exploration of forests: the tree/contour bijection, the
//! direct extrema sampler, crossing-count local times and time clocks.

mod clock;
mod contour;
mod explorer;
mod local_time;
mod path;

pub use clock::{parametrize, path_of_vertices, ClockConvention};
pub use contour::{contour_of_tree, infer_tags, tree_of_contour};
pub use explorer::{
    explore_direct, height_at, ExplorationDraws, Explorer, ScriptedDraws, Step, DEFAULT_EXTREMA_CAP,
};
pub use local_time::{
    crossing_pairs, local_time, local_time_profile, occupation_check, LevelFunction,
    LocalTimeValue,
};
pub use path::{Excursion, HeightPath, MinimumTag, Segment};
