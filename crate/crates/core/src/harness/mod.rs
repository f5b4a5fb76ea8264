//! Experiment orchestration: phantoms, corrupted media, synthetic data,
//! cross-grid reconstruction, scoring and result bundles.

mod bundle;
mod config;
mod experiment;
mod metrics;
mod noise;
mod phantom;

pub use bundle::{cell_image, plot_maps, plot_series, read_array, write_array, ArrayHeader};
pub use config::{
    AcousticInclusion, AcousticSpec, DetectorSpec, ExperimentConfig, GridConfig, Inclusion, Method, PhantomSpec, Seeds,
    Shape, SideName, SourceSmoothing, Target, TimeConfig,
};
pub use experiment::{
    detector_points, generate, load_generation, reconstruct, run_experiment, time_axis, write_generation,
    write_reconstruction, Generation, GenerationReport, Outcome,
};
pub use metrics::{relative_error, Prolongation};
pub use noise::{add_awgn, add_data_noise, corrupt_medium, noise_sigma, MediumReport, NoiseReport};
pub use phantom::{inclusion_values, make_phantom, AcousticMaps, Phantom};

#[cfg(test)]
mod tests;
