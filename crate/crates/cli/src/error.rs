use std::fmt;

use awcbir::catalog::CatalogError;
use awcbir::dss::DssError;
use awcbir::features::FeatureError;
use awcbir::pipeline::PipelineError;
use awcbir::radiometry::RadiometryError;
use awcbir::synth::SynthError;
use awcbir::tile_io::TileIoError;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NOT_FOUND: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl fmt::Display) -> Self {
        Self { code: EXIT_VALIDATION, message: message.to_string() }
    }

    pub fn not_found(message: impl fmt::Display) -> Self {
        Self { code: EXIT_NOT_FOUND, message: message.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn tile_io_code(e: &TileIoError) -> u8 {
    match e {
        TileIoError::NotFound { .. } => EXIT_NOT_FOUND,
        TileIoError::IoFailure { .. } | TileIoError::ChecksumMismatch { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn catalog_code(e: &CatalogError) -> u8 {
    match e {
        CatalogError::IoFailure { .. } | CatalogError::Corrupt { .. } | CatalogError::SfvUnreadable { .. } => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn dss_code(e: &DssError) -> u8 {
    match e {
        DssError::Io { .. } | DssError::Feature(FeatureError::Io(_)) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

impl From<TileIoError> for CliError {
    fn from(e: TileIoError) -> Self {
        Self { code: tile_io_code(&e), message: e.to_string() }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        Self { code: catalog_code(&e), message: e.to_string() }
    }
}

impl From<RadiometryError> for CliError {
    fn from(e: RadiometryError) -> Self {
        Self::validation(e)
    }
}

impl From<DssError> for CliError {
    fn from(e: DssError) -> Self {
        Self { code: dss_code(&e), message: e.to_string() }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let code = match &e {
            PipelineError::TileIo(t) => tile_io_code(t),
            PipelineError::BandInput { source, .. } => match source {
                TileIoError::IoFailure { .. } => EXIT_IO,
                _ => EXIT_VALIDATION,
            },
            PipelineError::Catalog(c) => catalog_code(c),
            PipelineError::Dss(d) => dss_code(d),
            PipelineError::Feature(FeatureError::Io(_)) | PipelineError::Io { .. } => EXIT_IO,
            PipelineError::MaskMissing { .. } => EXIT_NOT_FOUND,
            PipelineError::Radiometry(_) | PipelineError::Feature(_) => EXIT_VALIDATION,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        let code = match &e {
            SynthError::Io { .. } => EXIT_IO,
            SynthError::TileIo(t) => tile_io_code(t),
            _ => EXIT_VALIDATION,
        };
        Self { code, message: e.to_string() }
    }
}
