//! Forward data generator: image-source path enumeration, the per-path
//! polarimetric CSI chain, and sparse dataset synthesis.

mod chain;
mod dataset;
mod paths;

pub use chain::{
    analytic_incident_field, analytic_incident_field_pol, emitted_field, path_csi, path_csi_pol, path_field, path_field_with,
    split_polarization, GRAZING_CUTOFF,
};
pub use dataset::{
    generate_dataset, linspace, sample_receivers, CsiRecord, Dataset, DatasetHeader, PathMeta, RxPol, SimConfig,
    TxDescriptor, DATASET_FORMAT, MAX_REJECTIONS,
};
pub use paths::{enumerate_paths, Path, PathKind};
