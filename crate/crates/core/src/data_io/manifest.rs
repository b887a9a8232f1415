use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{EcgRecord, Gender};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    /// Sample CSV, relative to the manifest's directory unless absolute.
    pub csv: String,
    pub fs: f64,
    pub gender: Option<Gender>,
    pub age_years: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub records: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.csv);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();

    let mut seen = BTreeSet::new();
    for entry in &manifest.records {
        if !seen.insert(entry.subject_id.as_str()) {
            return Err(Error::invalid(format!(
                "duplicate subject_id `{}` in manifest {}",
                entry.subject_id,
                path.display()
            )));
        }
        if !(entry.fs > 0.0) {
            return Err(Error::invalid(format!(
                "subject `{}` has non-positive fs {}",
                entry.subject_id, entry.fs
            )));
        }
        let csv = manifest.resolve(entry);
        if !csv.is_file() {
            return Err(Error::io(
                csv,
                std::io::Error::new(std::io::ErrorKind::NotFound, "sample file not found"),
            ));
        }
    }
    Ok(manifest)
}

pub fn load_record(manifest: &DatasetManifest, entry: &ManifestEntry) -> Result<EcgRecord> {
    let samples = read_samples_csv(manifest.resolve(entry))?;
    let mut record = EcgRecord::new(entry.subject_id.clone(), samples, entry.fs)?;
    record.gender = entry.gender;
    record.age_years = entry.age_years;
    Ok(record)
}

/// Reads one amplitude per line. The first line may be the header
/// `amplitude`; blank lines are skipped. Line numbers in errors are 1-based.
pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let token = line.trim();
        if token.is_empty() || (idx == 0 && token.eq_ignore_ascii_case("amplitude")) {
            continue;
        }
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("expected a finite number, found `{token}`"),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no samples".into(),
        });
    }
    Ok(out)
}

/// Writes samples with shortest round-trip formatting, so reading the file
/// back reproduces every value bit-exactly.
pub fn write_samples_csv(path: impl AsRef<Path>, samples: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = String::with_capacity(samples.len() * 12 + 10);
    buf.push_str("amplitude\n");
    for v in samples {
        buf.push_str(&format!("{v:?}\n"));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes `manifest` and one CSV per record into the manifest's directory.
pub fn write_dataset(manifest: impl AsRef<Path>, dataset: &str, records: &[EcgRecord]) -> Result<()> {
    let path = manifest.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        let csv = format!("{}.csv", r.subject_id);
        write_samples_csv(dir.join(&csv), &r.samples)?;
        entries.push(ManifestEntry {
            subject_id: r.subject_id.clone(),
            csv,
            fs: r.fs,
            gender: r.gender,
            age_years: r.age_years,
        });
    }
    let manifest = DatasetManifest {
        dataset: dataset.to_string(),
        records: entries,
        base_dir: PathBuf::new(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
