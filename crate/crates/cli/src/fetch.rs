//! `fetch-wordnet`: download the WordNet 3.0 database and install the noun
//! files after checking their digests.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use sha2::{Digest, Sha256};

use crate::{write_file, CliError};

pub const WORDNET_URL: &str = "https://wordnetcode.princeton.edu/3.0/WNdb-3.0.tar.gz";

/// SHA-256 of the WordNet 3.0 `dict/data.noun`.
pub const DATA_NOUN_SHA256: &str = "489f145e0f68877c0be5bd0eb4117adaaac52f38f6204eb8d85dbe2158b614cc";
/// SHA-256 of the WordNet 3.0 `dict/index.noun`.
pub const INDEX_NOUN_SHA256: &str = "a490d99d93d017bf4822fe2f0ffa51fd73911ce271dc7535fade21f8814b5a04";

const NOUN_FILES: [(&str, &str); 2] = [("data.noun", DATA_NOUN_SHA256), ("index.noun", INDEX_NOUN_SHA256)];

fn fetch_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.starts_with(&[0x1f, 0x8b])
}

/// Pulls `data.noun` and `index.noun` out of a (possibly gzipped) tar
/// archive. Archives nested inside the archive are searched too, which
/// covers package tarballs that wrap the original distribution.
pub fn extract_noun_files(archive: &[u8]) -> Result<(Vec<u8>, Vec<u8>), CliError> {
    let mut found: [Option<Vec<u8>>; 2] = [None, None];
    search(archive, &mut found, 0)?;
    match found {
        [Some(data), Some(index)] => Ok((data, index)),
        _ => Err(fetch_error("archive does not contain dict/data.noun and dict/index.noun")),
    }
}

fn search(archive: &[u8], found: &mut [Option<Vec<u8>>; 2], depth: u32) -> Result<(), CliError> {
    if depth > 2 {
        return Ok(());
    }
    let mut tar_bytes = Vec::new();
    let reader: Box<dyn Read + '_> = if is_gzip(archive) {
        Box::new(GzDecoder::new(archive))
    } else {
        Box::new(archive)
    };
    let mut reader = reader;
    reader
        .read_to_end(&mut tar_bytes)
        .map_err(|e| fetch_error(format!("cannot decompress archive: {e}")))?;
    let mut tar = tar::Archive::new(tar_bytes.as_slice());
    let entries = tar.entries().map_err(|e| fetch_error(format!("bad tar archive: {e}")))?;
    for entry in entries {
        let mut entry = entry.map_err(|e| fetch_error(format!("bad tar entry: {e}")))?;
        let path = entry
            .path()
            .map_err(|e| fetch_error(format!("bad tar path: {e}")))?
            .to_string_lossy()
            .into_owned();
        let mut contents = Vec::new();
        entry
            .read_to_end(&mut contents)
            .map_err(|e| fetch_error(format!("cannot read {path}: {e}")))?;
        for (slot, (name, _)) in found.iter_mut().zip(NOUN_FILES) {
            if path.ends_with(&format!("dict/{name}")) && slot.is_none() {
                *slot = Some(std::mem::take(&mut contents));
            }
        }
        if path.ends_with(".tar.gz") || path.ends_with(".tgz") || path.ends_with(".tar") {
            search(&contents, found, depth + 1)?;
        }
    }
    Ok(())
}

/// Checks digests and writes both files into `dest`.
pub fn install(archive: &[u8], dest: &Path) -> Result<(), CliError> {
    let (data, index) = extract_noun_files(archive)?;
    for ((name, expected), bytes) in NOUN_FILES.iter().zip([&data, &index]) {
        let got = sha256_hex(bytes);
        if got != *expected {
            return Err(fetch_error(format!("{name}: sha256 {got} does not match {expected}")));
        }
    }
    for ((name, _), bytes) in NOUN_FILES.iter().zip([data, index]) {
        write_file(&dest.join(name), bytes).map_err(|e| fetch_error(e.to_string()))?;
    }
    Ok(())
}

pub async fn download(url: &str) -> Result<Vec<u8>, CliError> {
    let response = reqwest::get(url)
        .await
        .map_err(|e| fetch_error(format!("download {url}: {e}")))?;
    if !response.status().is_success() {
        return Err(fetch_error(format!("download {url}: HTTP {}", response.status())));
    }
    let bytes = response
        .bytes()
        .await
        .map_err(|e| fetch_error(format!("download {url}: {e}")))?;
    Ok(bytes.to_vec())
}
