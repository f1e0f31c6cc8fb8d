//! JSON containers for codes, models and reports.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CodeBlock, SparseCode};
use crate::error::{MbnError, Result};

pub const CODE_FORMAT: &str = "mbn-sparse-code";
pub const CODE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BlockHeader {
    k: u32,
    #[serde(rename = "V")]
    v: usize,
}

#[derive(Serialize, Deserialize)]
struct CodeFile {
    format: String,
    version: u32,
    n: usize,
    blocks: Vec<BlockHeader>,
    /// Row-major assignments, block after block.
    assignments: Vec<Vec<u32>>,
}

/// Writes `contents` to a sibling temp file and renames it into place.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path.file_name().ok_or_else(|| MbnError::Format(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    write_atomic(path.as_ref(), &bytes)
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| MbnError::Format(e.to_string()))
}

pub fn code_to_json(code: &SparseCode) -> Result<String> {
    let file = CodeFile {
        format: CODE_FORMAT.into(),
        version: CODE_VERSION,
        n: code.n(),
        blocks: code.blocks().iter().map(|b| BlockHeader { k: b.k(), v: b.v() }).collect(),
        assignments: code.blocks().iter().map(|b| b.assignments().to_vec()).collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn code_from_json(text: &str) -> Result<SparseCode> {
    let file: CodeFile = serde_json::from_str(text).map_err(|e| MbnError::Format(e.to_string()))?;
    if file.format != CODE_FORMAT {
        return Err(MbnError::Format(format!("unexpected format tag '{}'", file.format)));
    }
    if file.version != CODE_VERSION {
        return Err(MbnError::Format(format!("unsupported version {}", file.version)));
    }
    if file.blocks.len() != file.assignments.len() {
        return Err(MbnError::Format("block headers and payloads disagree".into()));
    }
    let blocks = file
        .blocks
        .iter()
        .zip(file.assignments)
        .map(|(h, a)| CodeBlock::new(file.n, h.v, h.k, a).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    SparseCode::new(blocks)
}

pub fn save_code(code: &SparseCode, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), code_to_json(code)?.as_bytes())
}

pub fn load_code(path: impl AsRef<Path>) -> Result<SparseCode> {
    code_from_json(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let code = SparseCode::single(CodeBlock::new(3, 2, 2, vec![0, 1, 1, 1, 0, 0]).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        save_code(&code, &p).unwrap();
        assert_eq!(load_code(&p).unwrap(), code);
    }

    #[test]
    fn out_of_range_entry_is_rejected() {
        let text = r#"{"format":"mbn-sparse-code","version":1,"n":2,"blocks":[{"k":2,"V":1}],"assignments":[[0,3]]}"#;
        assert!(matches!(code_from_json(text), Err(MbnError::InvalidCode(_))));
    }

    #[test]
    fn empty_block_list_is_rejected() {
        let text = r#"{"format":"mbn-sparse-code","version":1,"n":2,"blocks":[],"assignments":[]}"#;
        assert!(matches!(code_from_json(text), Err(MbnError::InvalidCode(_))));
    }

    #[test]
    fn garbage_is_format_error() {
        assert!(matches!(code_from_json("{not json"), Err(MbnError::Format(_))));
    }
}
