//! Output directories and their manifests.

use std::fs;
use std::path::{Path, PathBuf};

use dualq_core::metrics::sha256_file;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Relative output paths are resolved under this directory.
pub const OUTPUT_ROOT_ENV: &str = "DUALQ_OUTPUT_ROOT";
pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

/// `explicit` if absolute, otherwise under the output root; `default_name`
/// when no path was given.
pub fn resolve_out(explicit: Option<&Path>, default_name: &str) -> PathBuf {
    match explicit {
        Some(p) if p.is_absolute() => p.to_path_buf(),
        Some(p) => output_root().join(p),
        None => output_root().join(default_name),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Run,
    Corpus,
    Validation,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub kind: OutputKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    /// Run directories, in seed order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// Hashes of the input manifests this output was derived from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn new(kind: OutputKind) -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            kind,
            fingerprint: None,
            runs: Vec::new(),
            seeds: Vec::new(),
            inputs: Vec::new(),
            files: Vec::new(),
        }
    }

    /// Hashes every file under `dir` and writes `manifest.json`.
    pub fn write(mut self, dir: &Path) -> Result<Manifest> {
        self.files = list_files(dir)?
            .into_iter()
            .map(|rel| {
                let path = dir.join(&rel);
                Ok(FileEntry {
                    sha256: sha256_file(&path)?,
                    bytes: fs::metadata(&path)?.len(),
                    path: rel,
                })
            })
            .collect::<Result<_>>()?;
        let mut json = serde_json::to_vec_pretty(&self)?;
        json.push(b'\n');
        fs::write(dir.join(MANIFEST_FILE), json)?;
        Ok(self)
    }

    /// Reads the manifest of `dir` and checks every listed file against its
    /// hash. Files missing from the manifest are also an error.
    pub fn verify(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text =
            fs::read(&path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        let manifest: Manifest = serde_json::from_slice(&text)
            .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(CliError::runtime(format!(
                "{}: unsupported manifest version {}",
                path.display(),
                manifest.version
            )));
        }
        for f in &manifest.files {
            let p = dir.join(&f.path);
            let actual =
                sha256_file(&p).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))?;
            if actual != f.sha256 {
                return Err(CliError::runtime(format!("{}: hash mismatch", p.display())));
            }
        }
        let listed: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
        if let Some(extra) = list_files(dir)?
            .into_iter()
            .find(|p| !listed.contains(&p.as_str()))
        {
            return Err(CliError::runtime(format!(
                "{}: {extra} is not listed in the manifest",
                dir.display()
            )));
        }
        Ok(manifest)
    }

    /// SHA-256 of a directory's manifest file.
    pub fn digest(dir: &Path) -> Result<String> {
        Ok(sha256_file(&dir.join(MANIFEST_FILE))?)
    }
}

/// Files under `dir` as sorted `/`-separated relative paths, excluding the
/// top-level manifest.
fn list_files(dir: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let path = entry.path();
            if entry.file_type()?.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("walk stays under root");
                let rel: Vec<_> = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect();
                out.push(rel.join("/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.retain(|p| p != MANIFEST_FILE);
    out.sort();
    Ok(out)
}

/// A directory filled under a temporary name and moved into place by
/// [`Staging::commit`]. Dropping it uncommitted removes it.
#[derive(Debug)]
pub struct Staging {
    tmp: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staging {
    /// Checks that `target` may be written and creates the staging
    /// directory next to it.
    ///
    /// An existing non-empty `target` is only replaced with `force`, and
    /// only if it holds a manifest (i.e. was written by this tool).
    pub fn new(target: &Path, force: bool) -> Result<Self> {
        if target.exists() {
            let empty = target.is_dir() && fs::read_dir(target)?.next().is_none();
            if !empty {
                if !force {
                    return Err(CliError::config(format!(
                        "{} exists; pass --force to overwrite",
                        target.display()
                    )));
                }
                if !target.join(MANIFEST_FILE).is_file() {
                    return Err(CliError::config(format!(
                        "{} has no {MANIFEST_FILE}; refusing to overwrite a directory this tool did not write",
                        target.display()
                    )));
                }
            }
        }
        let name = target
            .file_name()
            .ok_or_else(|| CliError::config(format!("invalid output path {}", target.display())))?;
        let parent = target
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(parent)?;
        let tmp = parent.join(format!(".{}.partial", name.to_string_lossy()));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir(&tmp)?;
        Ok(Staging {
            tmp,
            target: target.to_path_buf(),
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.tmp
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target)?;
        }
        fs::rename(&self.tmp, &self.target)?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("a.txt"), "alpha").unwrap();
        fs::write(dir.path().join("sub/b.txt"), "beta").unwrap();
        let m = Manifest::new(OutputKind::Corpus).write(dir.path()).unwrap();
        assert_eq!(m.files.len(), 2);
        assert_eq!(m.files[1].path, "sub/b.txt");
        assert_eq!(Manifest::verify(dir.path()).unwrap(), m);

        fs::write(dir.path().join("sub/b.txt"), "gamma").unwrap();
        assert!(Manifest::verify(dir.path()).is_err());
        fs::write(dir.path().join("sub/b.txt"), "beta").unwrap();
        fs::write(dir.path().join("c.txt"), "extra").unwrap();
        assert!(Manifest::verify(dir.path()).is_err());
    }

    #[test]
    fn staging_refuses_foreign_directories() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out");
        fs::create_dir(&target).unwrap();
        fs::write(target.join("notes.txt"), "keep").unwrap();
        assert_eq!(Staging::new(&target, false).unwrap_err().exit_code(), 1);
        assert_eq!(Staging::new(&target, true).unwrap_err().exit_code(), 1);
        assert!(target.join("notes.txt").exists());
    }

    #[test]
    fn uncommitted_staging_is_removed() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out");
        let tmp = {
            let s = Staging::new(&target, false).unwrap();
            fs::write(s.path().join("x"), "1").unwrap();
            s.path().to_path_buf()
        };
        assert!(!tmp.exists());
        assert!(!target.exists());
    }
}
