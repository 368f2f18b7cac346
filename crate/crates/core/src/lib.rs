//! Tree-ensemble feature importances, their population (infinite-sample)
//! counterparts, and the Shapley values of information-based games.

pub mod data;
pub mod error;
pub mod forest;
pub mod game;
pub mod impurity;
pub mod info;
pub mod population;
pub mod relevance;
pub mod tree;

pub use data::{Column, ColumnKind, Dataset};
pub use error::{Error, Result};
pub use forest::{build_forest, ClassSelector, Forest, LocalImportanceMatrix, LocalMethod};
pub use game::{shapley_exact, GameKind, ShapleyVector, TUGame};
pub use impurity::Impurity;
pub use info::{Assignment, JointDistribution, Target, VariableSubset};
pub use population::{pop_global_mdi, pop_local_mdi, PopulationImportance};
pub use tree::{build_tree, Tree};
