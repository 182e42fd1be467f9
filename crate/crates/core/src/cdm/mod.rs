//! Conjunction data messages: records, ingestion, noise families and the
//! fitted transition model.

pub mod dist;
pub mod fit;
pub mod ingest;
pub mod noise;
pub mod record;

pub use dist::{Gnd, Nct};
pub use fit::{fit_gnd, fit_nct, fit_noise_model, FitError};
pub use ingest::{ingest_csv, ingest_reader, write_csv, IngestConfig, IngestError, IngestReport, TimeUnit};
pub use noise::{NoiseModel, NoiseModelError, StepNoise};
pub use record::{
    grid_time, label_true_risk, CdmGeometry, CdmRecord, EventSeries, RiskLabel, CUTOFF_STEP, HORIZON, LAST_STEP,
    STATE_BOUND_KM, START_HOURS, STEP_HOURS,
};
