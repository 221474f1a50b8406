//! Hierarchical household task planning: scene graphs, a STRIPS planner,
//! the subgoal pipeline, rewards and trace-guided policy optimization.

pub mod pddl;
pub mod planner;
pub mod scene_graph;
pub mod llm_client;
pub mod pipeline;
pub mod reward;
pub mod cli;
pub mod synth;
pub mod tgpo;
