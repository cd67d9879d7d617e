//! The generalist-specialist pipeline and its building blocks.

pub mod ignorance;
pub mod learner;
pub mod pipeline;
pub mod plan;
pub mod specialists;

pub use ignorance::{concentration, ignorance_report, IgnoranceReport};
pub use learner::{train, Consolidation, Learner, LearnerRef, TrainSpec};
pub use pipeline::{
    consolidate_run, consolidate_with, load_demos, method_name, resume_gsl, return_curve, run_baseline, run_gsl,
    ConsolidationOutcome, RunDir, RunOptions, RunReport, SpecialistSummary,
};
pub use plan::{select_lowest_variations, split_into_subsets, GslPlan, Phase, SpecialistRecord, StepLedger};
pub use specialists::{run_specialist, train_specialists, SpecialistJob, SpecialistOutcome};
