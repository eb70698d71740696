use std::path::PathBuf;

use crate::model::{ClassId, Oid};
use crate::storage::PageId;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("object {0} has no page in the directory")]
    DirectoryMiss(Oid),

    #[error("page {page} has {free} free bytes, object needs {needed}")]
    PageFull { page: PageId, free: u32, needed: u32 },

    #[error("object {oid} needs {size} bytes, larger than a {page_size}-byte page")]
    ObjectTooLarge { oid: Oid, size: u32, page_size: u32 },

    #[error("page {0} still holds objects and cannot be freed")]
    NonEmptyFree(PageId),

    #[error("unknown page {0}")]
    UnknownPage(PageId),

    #[error("unknown class {0}")]
    UnknownClass(ClassId),

    #[error("class {0} already belongs to a multi-class segment")]
    SegmentConflict(ClassId),

    #[error("cannot aggregate an empty list of reports")]
    EmptyAggregate,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
