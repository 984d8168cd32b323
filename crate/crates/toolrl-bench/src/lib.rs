//! Shared fixtures for the benchmarks in `benches/`.

use toolrl::env::{generate_tasks, TaskDistribution, TaskSpec};
use toolrl::policy::{ActionVocabulary, Featurizer, PolicyParams};
use toolrl::trainers::{cold_start_bc, ColdStartConfig, ScriptedTeacher};
use toolrl::trajectory::ToolRegistry;

pub struct Fixture {
    pub dist: TaskDistribution,
    pub registry: ToolRegistry,
    pub featurizer: Featurizer,
    pub tasks: Vec<TaskSpec>,
    pub params: PolicyParams,
}

/// Default task family, a handful of tasks, and a lightly cold-started
/// policy so benched rollouts take realistic paths instead of flailing at
/// zero weights.
pub fn fixture() -> Fixture {
    let dist = TaskDistribution::default();
    let registry = dist.tool_registry();
    let vocab = ActionVocabulary::from_registry(&registry);
    let featurizer = Featurizer::new(vocab, dist.query_feature_dim(), 8);
    let tasks = generate_tasks(&dist, 16, 42).expect("default distribution");
    let teacher = ScriptedTeacher::default();
    let config = ColdStartConfig {
        epochs: 20,
        ..ColdStartConfig::default()
    };
    let params = cold_start_bc(&teacher, &tasks, &featurizer, &config, 42).params;
    Fixture {
        dist,
        registry,
        featurizer,
        tasks,
        params,
    }
}
