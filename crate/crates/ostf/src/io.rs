//! File formats: PNG images, JSON Lines manifests / predictions / recipes,
//! the session registry and the ICDAR ground-truth importer.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};
use log::warn;
use ostf_core::dataset::{
    parse_icdar_gt, LineWarning, Manifest, Record, Session, TamperingMethod, MANIFEST_FORMAT, MANIFEST_VERSION,
};
use ostf_core::eval::ImagePredictions;
use ostf_core::jitter::JitterRecipe;
use ostf_core::Image;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn read_image(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    Ok(Image::new(w, h, rgb.into_raw())?)
}

pub fn encode_png(img: &Image) -> Vec<u8> {
    let buf = RgbImage::from_raw(img.width(), img.height(), img.as_raw().to_vec())
        .expect("image buffer length matches its dimensions");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    out.into_inner()
}

/// Writes `img` as PNG, creating parent directories.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    write_bytes(path, &encode_png(img))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    format: String,
    version: u32,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

/// Parses a manifest: an optional header line followed by one record per
/// line. Blank lines are ignored.
pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest> {
    let mut manifest = Manifest::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let json_err = |source| Error::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        };
        let value: serde_json::Value = serde_json::from_str(line).map_err(json_err)?;
        if value.get("format").is_some() {
            let header: ManifestHeader = serde_json::from_value(value).map_err(json_err)?;
            if header.format != MANIFEST_FORMAT || header.version > MANIFEST_VERSION {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    message: format!("unsupported manifest {} v{}", header.format, header.version),
                });
            }
            manifest.metadata.extend(header.metadata);
            continue;
        }
        manifest.records.push(serde_json::from_value(value).map_err(json_err)?);
    }
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    parse_manifest(&read_text(path)?, path)
}

pub fn manifest_to_string(m: &Manifest) -> String {
    let header = ManifestHeader {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        metadata: m.metadata.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in &m.records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_manifest(path: &Path, m: &Manifest) -> Result<()> {
    write_bytes(path, manifest_to_string(m).as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    let file = fs::File::create(path).map_err(Error::io(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })?;
        w.write_all(b"\n").map_err(Error::io(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_predictions(path: &Path) -> Result<Vec<ImagePredictions>> {
    read_jsonl(path)
}

/// One line of the recipes file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeRecord {
    pub image: String,
    #[serde(flatten)]
    pub recipe: JitterRecipe,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionPaths {
    train: PathBuf,
    test: PathBuf,
}

/// Loads a session registry, `{"DST": {"train": "...", "test": "..."}, ...}`.
/// Relative manifest paths resolve against the registry's directory.
pub fn read_sessions(path: &Path) -> Result<Vec<Session>> {
    let text = read_text(path)?;
    let map: BTreeMap<String, SessionPaths> = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut sessions = Vec::with_capacity(map.len());
    for (name, paths) in map {
        let method = TamperingMethod::from_name(&name).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: format!("unknown session {name:?}"),
        })?;
        let train = read_manifest(&base.join(&paths.train))?;
        let test = read_manifest(&base.join(&paths.test))?;
        sessions.push(Session::new(method, train, test));
    }
    sessions.sort_by_key(|s| s.method);
    Ok(sessions)
}

const IMAGE_EXTENSIONS: [&str; 6] = ["jpg", "jpeg", "png", "JPG", "JPEG", "PNG"];

/// Warning from the importer, attributed to a ground-truth file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportWarning {
    pub file: PathBuf,
    pub warning: LineWarning,
}

/// Builds a manifest from one ground-truth text file per image
/// (`gt_<stem>.txt` or `<stem>.txt`). Image sizes are read from the image
/// headers; every instance is authentic.
pub fn import_icdar(gt_dir: &Path, images_dir: &Path) -> Result<(Manifest, Vec<ImportWarning>)> {
    let mut files: Vec<PathBuf> = fs::read_dir(gt_dir)
        .map_err(Error::io(gt_dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("txt")))
        .collect();
    files.sort();
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for file in files {
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let stem = stem.strip_prefix("gt_").unwrap_or(stem);
        let Some(image) = IMAGE_EXTENSIONS
            .iter()
            .map(|ext| images_dir.join(format!("{stem}.{ext}")))
            .find(|p| p.is_file())
        else {
            warn!("{}: no matching image in {}", file.display(), images_dir.display());
            continue;
        };
        let (width, height) = image::image_dimensions(&image).map_err(|source| Error::Image {
            path: image.clone(),
            source,
        })?;
        let bytes = fs::read(&file).map_err(Error::io(&file))?;
        let (instances, line_warnings) = parse_icdar_gt(&String::from_utf8_lossy(&bytes));
        warnings.extend(line_warnings.into_iter().map(|warning| ImportWarning {
            file: file.clone(),
            warning,
        }));
        records.push(Record {
            image: image
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string(),
            width,
            height,
            instances,
        });
    }
    if records.is_empty() {
        return Err(ostf_core::Error::EmptyManifest.into());
    }
    let mut manifest = Manifest::new(records);
    manifest.metadata.insert("source".into(), gt_dir.display().to_string());
    Ok((manifest, warnings))
}
