//! Config-driven execution of the tier stages over a work directory.

mod config;
mod run;

pub use config::{
    check_stage_order, ClassifyConfig, GeneratorConfig, IoConfig, OrganizeConfig, PipelineConfig, ScheduleConfig, SeedConfig, Stage,
};
pub use run::{
    exit_code, make_client, read_text_seeds, run_pipeline, schedule_inputs, RunReport, StageReport, StageRunner, CHUNKS_FILE,
    DUP_MAP_FILE, EXIT_FAILURE, EXIT_OK, EXIT_USAGE, INDEX_DIR, INDEX_FILE, MODEL_FILE, SCHEDULE_FILE, VERIFICATION_PREFIX,
};
