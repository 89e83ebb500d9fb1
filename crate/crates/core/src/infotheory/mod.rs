//! Histogram entropy estimators and the CENT features built on them.

mod cent;
mod entropy;
mod histogram;
mod theory;

pub use cent::{
    cent_from_activations, cent_per_filter, cent_per_layer, extract_cent_features, filter_count,
    filter_values, CentConfig, CentMatrix, CentMode, CentSource, CentVector,
};
pub use entropy::{
    conditional_entropy, conditional_mutual_information, entropy, entropy_of_counts,
    mutual_information, ContingencyTable, LabelSpace, MutualInformation,
};
pub use histogram::{make_histogram, Binning, Histogram, RangeMode, DEFAULT_BINS};
pub use theory::{
    dpi_check, expected_cent, expected_cent_from_dump, partition_check, partition_check_from_dump,
    DpiReport, ExpectedCent, FilterSelector, PartitionReport, ResponseHistograms, DPI_SLACK,
};
