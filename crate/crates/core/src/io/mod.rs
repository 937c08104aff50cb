//! File formats: point clouds, rasters and reports.

mod cloud_file;
mod raster_file;
mod report;

pub use cloud_file::{
    encode_binary, ingest_cloud, parse_binary, parse_text, write_cloud_binary, write_cloud_text, BINARY_MAGIC,
};
pub use raster_file::{
    display_range, emit_raster, parse_raster_csv, raster_to_csv, raster_to_ppm, read_raster_csv, CSV_HEADER,
    NO_DATA_RGB,
};
pub use report::{
    compare_reports, ClampCount, Comparison, ComparisonRow, CoverageReport, MetricDelta, RunMetadata, Winner,
};
