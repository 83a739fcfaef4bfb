use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use cooccur::survey::io::{read_deployments_csv, read_images_csv, HistoryJson};
use cooccur::survey::{DeploymentWindow, DetectionHistory, ImageRecord};

/// Bumped whenever a JSON output changes shape.
pub const SCHEMA_VERSION: u32 = 1;

/// Envelope shared by every JSON output.
#[derive(Serialize)]
struct Document<'a, C, B> {
    schema_version: u32,
    command: &'a str,
    config: &'a C,
    #[serde(flatten)]
    body: B,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(BufReader::new(file))
}

pub fn read_images(path: &Path) -> Result<Vec<ImageRecord>> {
    read_images_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn read_deployments(path: Option<&PathBuf>) -> Result<Option<Vec<DeploymentWindow>>> {
    path.map(|p| read_deployments_csv(open(p)?).with_context(|| format!("reading {}", p.display())))
        .transpose()
}

pub fn read_history(path: &Path) -> Result<DetectionHistory> {
    let doc: HistoryJson =
        serde_json::from_reader(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    DetectionHistory::try_from(doc).with_context(|| format!("reading {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    /// Writes through `f` into `name`, flushing before returning.
    pub fn write<F>(&self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn json<C: Serialize, B: Serialize>(&self, name: &str, command: &str, config: &C, body: B) -> Result<()> {
        let doc = Document {
            schema_version: SCHEMA_VERSION,
            command,
            config,
            body,
        };
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            writeln!(w)?;
            Ok(())
        })
    }
}
