use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use huewave::clustering::read_assignments;
use huewave::datagen::read_dataset;
use huewave::embedio::read_embeddings;
use huewave::{Embedding, ImageRecord};
use serde::Serialize;

pub const CONFIG_FILE: &str = "config.json";

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or parameter values (exit 1).
    Usage(String),
    /// Unreadable, malformed, or inconsistent inputs (exit 2).
    Data(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl From<huewave::Error> for CliError {
    fn from(e: huewave::Error) -> Self {
        match e {
            huewave::Error::InvalidSpec(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

#[derive(Serialize)]
struct RunConfig<'a, P> {
    command: &'a str,
    version: &'a str,
    params: &'a P,
}

/// An output directory. Creating one records the producing config.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create<P: Serialize>(root: &Path, command: &str, params: &P) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| data(format!("creating {}: {e}", root.display())))?;
        let dir = OutDir { root: root.to_path_buf() };
        let config = RunConfig { command, version: env!("CARGO_PKG_VERSION"), params };
        dir.write_json(CONFIG_FILE, &config)?;
        Ok(dir)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn writer(&self, name: &str) -> CliResult<BufWriter<File>> {
        let p = self.path(name);
        File::create(&p).map(BufWriter::new).map_err(|e| data(format!("creating {}: {e}", p.display())))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> CliResult {
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Runs a library writer against a file in this directory.
    pub fn write_with<F>(&self, name: &str, f: F) -> CliResult
    where
        F: FnOnce(&mut BufWriter<File>) -> huewave::Result<()>,
    {
        let mut w = self.writer(name)?;
        f(&mut w).map_err(|e| data(format!("writing {name}: {e}")))?;
        w.flush()?;
        Ok(())
    }
}

pub fn load_dataset(dir: &Path) -> CliResult<Vec<ImageRecord>> {
    let images = read_dataset(dir).map_err(|e| data(format!("dataset {}: {e}", dir.display())))?;
    if images.is_empty() {
        return Err(data(format!("dataset {} is empty", dir.display())));
    }
    Ok(images)
}

pub fn load_embeddings(path: &Path) -> CliResult<Vec<Embedding>> {
    let file = read_embeddings(path).map_err(|e| data(format!("embeddings {}: {e}", path.display())))?;
    if file.records.is_empty() {
        return Err(data(format!("embedding file {} has no records", path.display())));
    }
    Ok(file.records)
}

/// Reorders records keyed by image id to follow `ids`. Every id must be
/// present exactly once.
pub fn align<T>(ids: &[String], keyed: Vec<(String, T)>, what: &str) -> CliResult<Vec<T>> {
    let mut map: HashMap<String, T> = HashMap::with_capacity(keyed.len());
    for (id, v) in keyed {
        if map.insert(id.clone(), v).is_some() {
            return Err(data(format!("{what}: duplicate image id {id:?}")));
        }
    }
    let out = ids
        .iter()
        .map(|id| map.remove(id).ok_or_else(|| data(format!("{what}: no entry for image {id:?}"))))
        .collect::<CliResult<Vec<T>>>()?;
    if let Some(extra) = map.keys().min() {
        return Err(data(format!("{what}: image {extra:?} is not in the dataset")));
    }
    Ok(out)
}

pub fn load_assignments(path: &Path, ids: &[String]) -> CliResult<Vec<usize>> {
    let f = File::open(path).map_err(|e| data(format!("assignments {}: {e}", path.display())))?;
    let rows = read_assignments(f).map_err(|e| data(format!("assignments {}: {e}", path.display())))?;
    align(ids, rows, "assignments")
}

pub fn aligned_embeddings(path: &Path, ids: &[String]) -> CliResult<Vec<Embedding>> {
    let keyed = load_embeddings(path)?.into_iter().map(|e| (e.image_id.clone(), e)).collect();
    align(ids, keyed, "embeddings")
}

pub fn image_ids(images: &[ImageRecord]) -> Vec<String> {
    images.iter().map(|i| i.id.clone()).collect()
}

/// A `name=path` argument.
#[derive(Debug, Clone, Serialize)]
pub struct Named {
    pub name: String,
    pub path: PathBuf,
}

pub fn parse_named(s: &str) -> Result<Named, String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok(Named { name: name.to_string(), path: PathBuf::from(path) })
        }
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

/// File-name-safe form of an algorithm name.
pub fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
