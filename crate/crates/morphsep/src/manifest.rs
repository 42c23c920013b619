//! Batch manifests.
//!
//! One entry per line, tab-separated:
//!
//! ```text
//! mixture.wav<TAB>voice=voice.wav,harmonic=drone.wav<TAB>truth.txt
//! ```
//!
//! The reference and segment columns are optional; `-` leaves one empty.
//! Relative paths are resolved against the manifest's directory.

use std::path::{Path, PathBuf};

use morphsep_core::SourceRole;

use crate::fsutil::read_to_string;
use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub mixture: PathBuf,
    pub references: Vec<(SourceRole, PathBuf)>,
    pub segments: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

/// Parses `role=path`.
pub fn parse_role_path(spec: &str) -> Result<(SourceRole, PathBuf), Error> {
    let (role, path) = spec
        .split_once('=')
        .ok_or_else(|| Error::format(format!("expected role=path, got `{spec}`")))?;
    let role = SourceRole::parse(role.trim()).ok_or_else(|| Error::format(format!("unknown role `{role}`")))?;
    Ok((role, PathBuf::from(path.trim())))
}

impl Manifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self, Error> {
        let resolve = |p: &str| {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() > 3 || cols[0].is_empty() || cols[0] == "-" {
                return Err(Error::format(format!(
                    "manifest line {}: expected 1 to 3 columns",
                    i + 1
                )));
            }
            let references = match cols.get(1) {
                Some(c) if !c.is_empty() && *c != "-" => c
                    .split(',')
                    .map(|s| parse_role_path(s).map(|(r, p)| (r, resolve(p.to_str().unwrap_or_default()))))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| Error::format(format!("manifest line {}: {e}", i + 1)))?,
                _ => Vec::new(),
            };
            let segments = match cols.get(2) {
                Some(c) if !c.is_empty() && *c != "-" => Some(resolve(c)),
                _ => None,
            };
            entries.push(ManifestEntry {
                mixture: resolve(cols[0]),
                references,
                segments,
            });
        }
        Ok(Self { entries })
    }

    /// Reads a manifest and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let base = path.parent().unwrap_or(Path::new("."));
        let m = Self::parse(&read_to_string(path)?, base)?;
        for e in &m.entries {
            let files = std::iter::once(&e.mixture)
                .chain(e.references.iter().map(|(_, p)| p))
                .chain(e.segments.iter());
            for f in files {
                if !f.is_file() {
                    return Err(Error::format(format!(
                        "manifest references missing file {}",
                        f.display()
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| {
                let refs = if e.references.is_empty() {
                    "-".to_string()
                } else {
                    e.references
                        .iter()
                        .map(|(r, p)| format!("{r}={}", p.display()))
                        .collect::<Vec<_>>()
                        .join(",")
                };
                let seg = e.segments.as_ref().map_or("-".to_string(), |p| p.display().to_string());
                format!("{}\t{refs}\t{seg}\n", e.mixture.display())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_columns_and_resolves_paths() {
        let text = "# batch\nmix.wav\tvoice=v.wav,percussive=/abs/p.wav\ttruth.txt\nother.wav\n";
        let m = Manifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].mixture, PathBuf::from("/data/mix.wav"));
        assert_eq!(
            m.entries[0].references,
            vec![
                (SourceRole::Voice, PathBuf::from("/data/v.wav")),
                (SourceRole::Percussive, PathBuf::from("/abs/p.wav")),
            ]
        );
        assert_eq!(m.entries[0].segments, Some(PathBuf::from("/data/truth.txt")));
        assert!(m.entries[1].references.is_empty());
        assert_eq!(Manifest::parse(&m.to_text(), Path::new("/elsewhere")).unwrap(), m);
    }

    #[test]
    fn rejects_bad_lines_and_missing_files() {
        assert!(Manifest::parse("mix.wav\tdrums=d.wav\n", Path::new(".")).is_err());
        assert!(Manifest::parse("a\tb\tc\td\n", Path::new(".")).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        std::fs::write(&p, "nope.wav\n").unwrap();
        assert!(Manifest::load(&p).unwrap_err().to_string().contains("missing file"));
    }
}
