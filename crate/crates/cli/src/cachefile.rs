//! On-disk embedding cache format.
//!
//! A cache file is newline-delimited JSON: a header record
//! `{"dim": n, "provider_tag": s}` followed by one
//! `{"text": s, "vector": [..]}` record per cached text. Vectors are
//! stored exactly as cached (already unit-normalized by the embedding
//! layer) and re-inserted verbatim on load, so a save/load round trip
//! reproduces every vector bit for bit.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use flowmine_core::embedding::{EmbeddingCache, EmbeddingError, EmbeddingVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from reading or writing cache files.
#[derive(Debug, Error)]
pub enum CacheFileError {
    /// The file could not be read or written.
    #[error("cannot access {path}: {source}")]
    Io {
        /// The file involved.
        path: String,
        /// The underlying IO failure.
        #[source]
        source: std::io::Error,
    },
    /// A record failed to parse.
    #[error("{path}:{line}: {message}")]
    Malformed {
        /// The file involved.
        path: String,
        /// One-based line number of the offending record.
        line: usize,
        /// What was wrong with it.
        message: String,
    },
    /// A parsed vector was rejected by the cache.
    #[error("{path}:{line}: {source}")]
    Rejected {
        /// The file involved.
        path: String,
        /// One-based line number of the offending record.
        line: usize,
        /// Why the cache refused it.
        #[source]
        source: EmbeddingError,
    },
    /// The file had no header record.
    #[error("{path} is missing the header record")]
    MissingHeader {
        /// The file involved.
        path: String,
    },
}

fn io_error(path: &Path, source: std::io::Error) -> CacheFileError {
    CacheFileError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// The leading record identifying the cache's shape and source model.
#[derive(Debug, Serialize, Deserialize)]
struct HeaderRecord {
    dim: usize,
    provider_tag: String,
}

/// One cached text.
#[derive(Debug, Serialize, Deserialize)]
struct VectorRecord {
    text: String,
    vector: Vec<f64>,
}

/// Reads a cache file.
pub fn load_cache(path: &Path) -> Result<EmbeddingCache, CacheFileError> {
    let file = fs::File::open(path).map_err(|e| io_error(path, e))?;
    let reader = BufReader::new(file);
    let mut cache: Option<EmbeddingCache> = None;
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| io_error(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match cache.as_mut() {
            None => {
                let header: HeaderRecord = serde_json::from_str(&line).map_err(|e| {
                    CacheFileError::Malformed {
                        path: path.display().to_string(),
                        line: line_no,
                        message: format!("invalid header record: {e}"),
                    }
                })?;
                let built = EmbeddingCache::new(header.dim, &header.provider_tag).map_err(|e| {
                    CacheFileError::Rejected {
                        path: path.display().to_string(),
                        line: line_no,
                        source: e,
                    }
                })?;
                cache = Some(built);
            }
            Some(cache) => {
                let record: VectorRecord = serde_json::from_str(&line).map_err(|e| {
                    CacheFileError::Malformed {
                        path: path.display().to_string(),
                        line: line_no,
                        message: format!("invalid vector record: {e}"),
                    }
                })?;
                EmbeddingVector::new(record.vector)
                    .and_then(|v| cache.insert(&record.text, v))
                    .map_err(|e| CacheFileError::Rejected {
                        path: path.display().to_string(),
                        line: line_no,
                        source: e,
                    })?;
            }
        }
    }
    cache.ok_or_else(|| CacheFileError::MissingHeader {
        path: path.display().to_string(),
    })
}

/// Serializes a cache: header first, then entries in the cache's sorted
/// text order, trailing newline included.
pub fn cache_to_string(cache: &EmbeddingCache) -> String {
    let header = HeaderRecord {
        dim: cache.dim(),
        provider_tag: cache.provider_tag().to_string(),
    };
    let mut out = serde_json::to_string(&header).expect("headers serialize infallibly");
    out.push('\n');
    for (text, vector) in cache.entries() {
        let record = VectorRecord {
            text: text.to_string(),
            vector: vector.values().to_vec(),
        };
        out.push_str(&serde_json::to_string(&record).expect("records serialize infallibly"));
        out.push('\n');
    }
    out
}

/// Writes a cache file.
pub fn save_cache(path: &Path, cache: &EmbeddingCache) -> Result<(), CacheFileError> {
    fs::write(path, cache_to_string(cache)).map_err(|e| io_error(path, e))
}
