//! Download-once cache for public corpora, keyed by content hash.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions, TryLockError};
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};
use tracing::info;

use crate::error::{Error, Result};
use crate::llm::BackendError;

const INDEX: &str = "index.json";
const LOCK: &str = ".lock";

async fn lock_dir(dir: &Path) -> Result<File> {
    let path = dir.join(LOCK);
    let file = OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    loop {
        match file.try_lock() {
            Ok(()) => return Ok(file),
            Err(TryLockError::WouldBlock) => tokio::time::sleep(Duration::from_millis(50)).await,
            Err(TryLockError::Error(e)) => return Err(Error::io(&path, e)),
        }
    }
}

fn read_index(dir: &Path) -> Result<BTreeMap<String, String>> {
    let path = dir.join(INDEX);
    match fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes)
            .map_err(|e| Error::integrity(format!("unreadable cache index: {e}"), vec![path])),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(BTreeMap::new()),
        Err(e) => Err(Error::io(&path, e)),
    }
}

fn extension_of(url: &str) -> &str {
    let last = url
        .split(['?', '#'])
        .next()
        .unwrap_or(url)
        .rsplit('/')
        .next()
        .unwrap_or("");
    match last.rsplit_once('.') {
        Some((_, ext))
            if !ext.is_empty()
                && ext.len() <= 8
                && ext.chars().all(|c| c.is_ascii_alphanumeric()) =>
        {
            ext
        }
        _ => "bin",
    }
}

async fn download(url: &str) -> Result<Vec<u8>> {
    let retryable =
        |e: reqwest::Error| Error::Backend(BackendError::Retryable(format!("{url}: {e}")));
    let resp = reqwest::get(url).await.map_err(retryable)?;
    let status = resp.status();
    if !status.is_success() {
        let err = if status.is_server_error() || status.as_u16() == 429 || status.as_u16() == 408 {
            BackendError::Retryable(format!("{url}: HTTP {status}"))
        } else {
            BackendError::Fatal {
                status: status.as_u16(),
                body: format!("{url}: download failed"),
            }
        };
        return Err(Error::Backend(err));
    }
    Ok(resp.bytes().await.map_err(retryable)?.to_vec())
}

/// Returns the cached copy of `url`, downloading it on first use. Cached
/// files are named by their SHA-256 and re-verified on every hit.
pub async fn fetch_dataset(url: &str, cache_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    let _lock = lock_dir(cache_dir).await?;
    let mut index = read_index(cache_dir)?;

    if let Some(hash) = index.get(url) {
        let path = cache_dir.join(format!("{hash}.{}", extension_of(url)));
        let bytes = fs::read(&path).map_err(|_| {
            Error::integrity(
                format!("cached copy of {url} is missing"),
                vec![path.clone()],
            )
        })?;
        if hex::encode(Sha256::digest(&bytes)) != *hash {
            return Err(Error::integrity(
                format!("cached copy of {url} does not match its hash"),
                vec![path],
            ));
        }
        info!(url, path = %path.display(), "dataset cache hit");
        return Ok(path);
    }

    let bytes = download(url).await?;
    let hash = hex::encode(Sha256::digest(&bytes));
    let path = cache_dir.join(format!("{hash}.{}", extension_of(url)));
    let tmp = path.with_extension("part");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    index.insert(url.to_string(), hash);
    let index_path = cache_dir.join(INDEX);
    fs::write(&index_path, serde_json::to_vec_pretty(&index)?)
        .map_err(|e| Error::io(&index_path, e))?;
    info!(url, bytes = bytes.len(), "dataset downloaded");
    Ok(path)
}
