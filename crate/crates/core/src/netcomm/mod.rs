//! Community structure of the retweet network: symmetrization, modularity,
//! Louvain optimization and per-community score profiles.

mod graph;
mod louvain;
mod profile;

pub use graph::{modularity, symmetrize, UndirectedGraph};
pub use louvain::{louvain, CommunityPartition, LouvainOptions, MIN_PASS_GAIN};
pub use profile::{profile_communities, CommunityProfile, ProfileOptions};
