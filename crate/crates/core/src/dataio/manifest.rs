//! Dataset manifests: UTF-8 CSV with a class-table comment line.
//!
//! ```text
//! # classes: smooth,textured
//! image_id,path,label
//! img_0000,images/img_0000.tnsr,0
//! ```
//!
//! `path` is relative to the manifest's directory. `label` is written as a
//! class index; a class name is also accepted on read.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::tensor_file::{load_tensor, save_tensor};
use super::Dataset;
use crate::error::{Error, FormatError, Result};

const CLASSES_PREFIX: &str = "# classes:";
const HEADER: &str = "image_id,path,label";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub image_id: String,
    pub path: PathBuf,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub classes: Vec<String>,
    pub rows: Vec<ManifestRow>,
}

fn check_field(field: &str, what: &str) -> Result<()> {
    if field.is_empty() || field.contains([',', '\n', '\r']) {
        return Err(Error::contract(format!(
            "{what} `{field}` must be non-empty and free of commas/newlines"
        )));
    }
    Ok(())
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::contract("manifest class table is empty"));
        }
        for c in &self.classes {
            check_field(c, "class name")?;
        }
        let mut seen = HashSet::new();
        for row in &self.rows {
            check_field(&row.image_id, "image id")?;
            check_field(&row.path.to_string_lossy(), "path")?;
            if !seen.insert(row.image_id.as_str()) {
                return Err(Error::contract(format!(
                    "duplicate image id `{}`",
                    row.image_id
                )));
            }
            if row.label >= self.classes.len() {
                return Err(Error::contract(format!(
                    "image `{}` has label {} outside the class table",
                    row.image_id, row.label
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        self.validate()?;
        let mut s = format!("{CLASSES_PREFIX} {}\n{HEADER}\n", self.classes.join(","));
        for row in &self.rows {
            // Forward slashes keep manifests portable.
            let path = row.path.to_string_lossy().replace('\\', "/");
            writeln!(s, "{},{},{}", row.image_id, path, row.label).unwrap();
        }
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut classes: Option<Vec<String>> = None;
        let mut header_seen = false;
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let lineno = n + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix(CLASSES_PREFIX) {
                classes = Some(rest.split(',').map(|c| c.trim().to_string()).collect());
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line.trim() != HEADER {
                    return Err(FormatError::Malformed(format!(
                        "line {lineno}: expected header `{HEADER}`"
                    )));
                }
                header_seen = true;
                continue;
            }
            let classes = classes.as_ref().ok_or_else(|| {
                FormatError::Malformed(format!("line {lineno}: row before `{CLASSES_PREFIX}` line"))
            })?;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [id, path, label] = fields[..] else {
                return Err(FormatError::Malformed(format!(
                    "line {lineno}: expected 3 fields, found {}",
                    fields.len()
                )));
            };
            let label = match label.parse::<usize>() {
                Ok(i) => i,
                Err(_) => classes.iter().position(|c| c == label).ok_or_else(|| {
                    FormatError::Malformed(format!("line {lineno}: unknown class `{label}`"))
                })?,
            };
            rows.push(ManifestRow {
                image_id: id.to_string(),
                path: PathBuf::from(path),
                label,
            });
        }
        let classes = classes
            .ok_or_else(|| FormatError::Malformed(format!("missing `{CLASSES_PREFIX}` line")))?;
        let m = Manifest { classes, rows };
        m.validate()
            .map_err(|e| FormatError::Malformed(e.to_string()))?;
        Ok(m)
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Manifest::parse(&text).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_manifest(path: impl AsRef<Path>, manifest: &Manifest) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, manifest.to_csv()?).map_err(|e| Error::io(path, e))
}

/// Loads every image listed in a manifest.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let m = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut images = Vec::with_capacity(m.rows.len());
    for row in &m.rows {
        images.push(load_tensor(base.join(&row.path)).map_err(|e| e.for_image(&row.image_id))?);
    }
    Dataset::new(
        m.rows.iter().map(|r| r.image_id.clone()).collect(),
        images,
        m.rows.iter().map(|r| r.label).collect(),
        m.classes,
    )
}

/// Writes each image to `dir/images/<id>.tnsr` and the manifest to
/// `dir/<manifest_name>`; returns the manifest path.
pub fn save_dataset(dir: impl AsRef<Path>, manifest_name: &str, data: &Dataset) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let images_dir = dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::io(&images_dir, e))?;
    let mut rows = Vec::with_capacity(data.len());
    for ((id, image), &label) in data.ids.iter().zip(&data.images).zip(&data.labels) {
        check_field(id, "image id")?;
        let rel = PathBuf::from("images").join(format!("{id}.tnsr"));
        save_tensor(dir.join(&rel), image)?;
        rows.push(ManifestRow {
            image_id: id.clone(),
            path: rel,
            label,
        });
    }
    let path = dir.join(manifest_name);
    write_manifest(
        &path,
        &Manifest {
            classes: data.class_names.clone(),
            rows,
        },
    )?;
    Ok(path)
}
