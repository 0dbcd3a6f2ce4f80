//! File formats: ENVI cubes, spectral library CSV, ground-truth masks, detection maps.

mod envi;
mod library;
mod maps;
mod mask;

pub use envi::{cube_paths, read_cube, read_cube_with_header, write_cube, write_cube_with_fields, EnviHeader};
pub use library::{read_library_raw, read_spectral_library, write_spectral_library, RawLibrary};
pub use maps::{read_map_csv, read_map_grid, write_map_csv, write_map_grid, write_map_pgm};
pub use mask::{read_mask, read_mask_csv, read_mask_pgm, read_pgm, write_mask, write_mask_csv, write_mask_pgm, write_pgm};
