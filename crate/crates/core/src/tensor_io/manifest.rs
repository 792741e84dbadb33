//! Dataset manifests: one `image_id<TAB>feature_path[<TAB>gt_mask_path]` entry per line.
//!
//! Relative paths resolve against the manifest's directory. Blank lines are
//! skipped.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub feature_path: PathBuf,
    pub gt_mask_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.image_id.is_empty() {
                return Err(Error::Manifest {
                    line: i + 1,
                    message: "empty image id".into(),
                });
            }
            if !seen.insert(e.image_id.as_str()) {
                return Err(Error::Manifest {
                    line: i + 1,
                    message: format!("duplicate image id {:?}", e.image_id),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Parses manifest text. Does not touch the filesystem.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Manifest {
                line: lineno + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(err(format!(
                    "expected 2 or 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let image_id = fields[0].to_string();
            if image_id.is_empty() {
                return Err(err("empty image id".into()));
            }
            if fields[1].is_empty() {
                return Err(err("empty feature path".into()));
            }
            if !seen.insert(image_id.clone()) {
                return Err(err(format!("duplicate image id {image_id:?}")));
            }
            let resolve = |p: &str| {
                let p = Path::new(p);
                if p.is_absolute() {
                    p.to_path_buf()
                } else {
                    base_dir.join(p)
                }
            };
            let gt_mask_path = match fields.get(2) {
                Some(p) if !p.is_empty() => Some(resolve(p)),
                _ => None,
            };
            entries.push(ManifestEntry {
                image_id,
                feature_path: resolve(fields[1]),
                gt_mask_path,
            });
        }
        Ok(Self { entries })
    }

    /// Reads and parses a manifest file, then checks that every referenced
    /// file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let manifest = Self::parse(&text, base)?;
        manifest.check_files()?;
        Ok(manifest)
    }

    pub fn check_files(&self) -> Result<()> {
        for (i, e) in self.entries.iter().enumerate() {
            let missing = |p: &Path| Error::Manifest {
                line: i + 1,
                message: format!("{}: file not found", p.display()),
            };
            if !e.feature_path.is_file() {
                return Err(missing(&e.feature_path));
            }
            if let Some(gt) = &e.gt_mask_path {
                if !gt.is_file() {
                    return Err(missing(gt));
                }
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serializes with paths written as given.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = write!(out, "{}\t{}", e.image_id, e.feature_path.display());
            if let Some(gt) = &e.gt_mask_path {
                let _ = write!(out, "\t{}", gt.display());
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_in_order_and_resolves_relative_paths() {
        let text = "b\tfeat/b.ucft\tgt/b.ucmk\n\na\t/abs/a.ucft\n";
        let m = DatasetManifest::parse(text, Path::new("/data")).unwrap();
        let ids: Vec<_> = m.entries().iter().map(|e| e.image_id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        assert_eq!(m.entries()[0].feature_path, Path::new("/data/feat/b.ucft"));
        assert_eq!(
            m.entries()[0].gt_mask_path.as_deref(),
            Some(Path::new("/data/gt/b.ucmk"))
        );
        assert_eq!(m.entries()[1].feature_path, Path::new("/abs/a.ucft"));
        assert!(m.entries()[1].gt_mask_path.is_none());
    }

    #[test]
    fn rejects_duplicates_and_bad_lines() {
        let dup = DatasetManifest::parse("a\tx\na\ty\n", Path::new("."));
        assert!(matches!(dup, Err(Error::Manifest { line: 2, .. })));
        let bad = DatasetManifest::parse("only-one-field\n", Path::new("."));
        assert!(matches!(bad, Err(Error::Manifest { line: 1, .. })));
    }

    #[test]
    fn load_checks_files_exist() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.ucft"), b"").unwrap();
        let path = dir.path().join("m.tsv");
        std::fs::write(&path, "a\ta.ucft\n").unwrap();
        assert_eq!(DatasetManifest::load(&path).unwrap().len(), 1);
        std::fs::write(&path, "a\ta.ucft\tmissing.ucmk\n").unwrap();
        assert!(DatasetManifest::load(&path).is_err());
    }
}
