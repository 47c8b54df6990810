//! Second-order gradient-boosted decision trees with nonconvex robust losses,
//! plus the label-noise benchmark harness built around them.
//!
//! * [`loss`]: loss families in p̂, raw-score gradients/Hessians, positivity check.
//! * [`tree`]: exact greedy tree growth on gradient/Hessian pairs.
//! * [`booster`]: the boosting loop, prediction and model documents.
//! * [`dataset`]: columnar CSV data and seeded splits.
//! * [`noise`]: binary and multi-class pair-flip label noise.
//! * [`metrics`]: AUCPR, accuracy and rank tables.
//! * [`experiment`]: key=value configs, synthetic fixtures, sweeps, ablations, reports.

pub mod booster;
pub mod dataset;
pub mod experiment;
pub mod loss;
pub mod metrics;
pub mod noise;
pub mod tree;

pub use booster::{fit, train, BoosterConfig, BoosterError, BoosterModel};
pub use dataset::{load_csv, train_test_split, CsvSchema, FeatureMatrix, SplitPlan, TabularDataset};
pub use loss::{GradHessPair, LossFamily, LossSpec, PHat};
pub use metrics::{accuracy, aucpr, rank_methods, RankTable};
pub use noise::{inject_binary, inject_multiclass, FlipLog, NoiseSpec};
pub use tree::{grow_tree, Tree, TreeConfig};
