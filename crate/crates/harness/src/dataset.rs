//! Dataset manifests: `path,label[,x0,y0,x1,y1]`, paths relative to the manifest.

use std::path::{Path, PathBuf};

use nuisance_core::imagegeom::io::load_image;
use nuisance_core::{BBox, Image};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub path: PathBuf,
    pub label: usize,
    pub gt: Option<BBox>,
}

impl DatasetEntry {
    pub fn load(&self) -> Result<Image> {
        load_image(&self.path).map_err(|e| HarnessError::Data(format!("{}: {e}", self.path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<DatasetEntry>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")), &path.display().to_string())
    }

    pub fn parse(text: &str, base: &Path, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("path")) {
                continue;
            }
            let err = |msg: String| HarnessError::Data(format!("{origin}:{}: {msg}", i + 1));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 2 && f.len() != 6 {
                return Err(err(format!("expected 2 or 6 fields, found {}", f.len())));
            }
            let label = f[1].parse::<usize>().map_err(|_| err(format!("bad label '{}'", f[1])))?;
            let gt = if f.len() == 6 {
                let v: Vec<f64> = f[2..].iter().map(|s| s.parse::<f64>().map_err(|_| err(format!("bad coordinate '{s}'")))).collect::<Result<_>>()?;
                Some(BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| err(e.to_string()))?)
            } else {
                None
            };
            let p = Path::new(f[0]);
            let path = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            entries.push(DatasetEntry { path, label, gt });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks labels against the classifier's class count.
    pub fn check_labels(&self, classes: usize) -> Result<()> {
        match self.entries.iter().position(|e| e.label >= classes) {
            Some(i) => Err(HarnessError::Data(format!(
                "entry {} has label {} but the classifier has {classes} classes",
                i + 1,
                self.entries[i].label
            ))),
            None => Ok(()),
        }
    }

    pub fn require_gt(&self) -> Result<()> {
        match self.entries.iter().position(|e| e.gt.is_none()) {
            Some(i) => Err(HarnessError::Data(format!("entry {} has no ground-truth box", i + 1))),
            None => Ok(()),
        }
    }
}
