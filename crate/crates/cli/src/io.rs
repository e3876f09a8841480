use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::failure::Failure;

/// Parse a JSON file, reporting the failing field path on schema errors.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    parse_json(&text).map_err(|m| Failure::Input(format!("{}: {m}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("at `{path}`: {}", e.inner())
        }
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Input(e.to_string()))?;
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<PathBuf, Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::io(path, e))?;
    Ok(path.to_path_buf())
}

/// File name of the `index`-th catheter.
pub fn catheter_file(index: usize) -> String {
    format!("catheter_{index:03}.json")
}

/// `catheter_XXX.json` files in `dir`, sorted, keyed by file stem.
pub fn catheter_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Failure::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("catheter_") && name.ends_with(".json") {
            out.push((name.trim_end_matches(".json").to_string(), path.clone()));
        }
    }
    out.sort();
    Ok(out)
}
