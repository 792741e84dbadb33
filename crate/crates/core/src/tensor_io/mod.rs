//! Patch grids, masks, heat maps and their on-disk formats.

mod format;
mod grid;
mod manifest;

pub use format::{
    decode_feature_grid, decode_heatmap, decode_mask, encode_feature_grid, encode_heatmap,
    encode_mask, load_feature_grid, load_heatmap, load_mask, read_feature_grid, read_heatmap,
    read_mask, save_feature_grid, save_heatmap, save_mask, write_feature_grid, write_heatmap,
    write_mask, FEATURE_MAGIC, FORMAT_VERSION, HEAD_MAGIC, HEAT_MAGIC, MASK_MAGIC,
};
pub(crate) use format::{read_file, write_f32s, write_file, write_header, Decoder};
pub use grid::{BinaryMask, FeatureGrid, HeatMap, NORM_TOLERANCE};
pub use manifest::{DatasetManifest, ManifestEntry};
