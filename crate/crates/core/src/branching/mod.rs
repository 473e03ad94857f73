//! Galton-Watson trees and forests with batch births, and the population
//! (mass) process they generate.

mod moments;
mod population;
mod tree;

pub use moments::{mean_population, scaled_mean, second_moment_population};
pub use population::{
    gillespie_endpoints, gillespie_population, linear_birth_death_sample, population_path,
    rescale_path, PopulationPath,
    DEFAULT_EVENT_CAP,
};
pub use tree::{simulate_forest, simulate_tree, BirthEvent, Forest, Individual, Tree, TreeCaps};
