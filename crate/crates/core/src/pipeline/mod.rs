//! Configured end-to-end runs with reproducible outputs and a manifest.

mod config;
mod heatmap;
mod manifest;
mod run;
mod source;

pub use config::{DataConfig, LagConfig, RunConfig, Stage, UniverseConfig, UNLISTED_SECTOR};
pub use heatmap::{emit_heatmap_data, HeatmapGrid};
pub use manifest::{hash_inputs, hash_outputs, sha256_file, FileHash, Manifest, StageRecord, StageStatus};
pub use run::{
    collect, fit_correlators, open_source, rank_stocks, resolve_pairs, restrict_lags, run_pipeline, FitEntry,
    PairSums, PassNeeds, PassOutput, Ranking, SignRow,
};
pub use source::{FileSource, MarketSource, SourceDay, SynthSource};
