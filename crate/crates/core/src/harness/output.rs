use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Bumped whenever a column or JSON field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// A file produced by an experiment, held in memory until written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// CSV with a leading `schema_version` column on every row.
pub fn csv_artifact<R: Serialize>(name: &str, rows: &[R]) -> Result<Artifact> {
    #[derive(Serialize)]
    struct Versioned<'a, R> {
        schema_version: u32,
        #[serde(flatten)]
        row: &'a R,
    }
    // flatten makes the csv writer see maps, which it cannot serialize; go through JSON values
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(vec![]);
    let mut header: Option<Vec<String>> = None;
    for r in rows {
        let v = serde_json::to_value(Versioned {
            schema_version: SCHEMA_VERSION,
            row: r,
        })
        .map_err(|e| Error::Io(e.to_string()))?;
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Io("csv rows must be structs".into()))?;
        if header.is_none() {
            let h: Vec<String> = obj.keys().cloned().collect();
            w.write_record(&h).map_err(|e| Error::Io(e.to_string()))?;
            header = Some(h);
        }
        let cells: Vec<String> = header
            .as_ref()
            .unwrap()
            .iter()
            .map(|k| match &obj[k] {
                serde_json::Value::Null => String::new(),
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect();
        w.write_record(&cells).map_err(|e| Error::Io(e.to_string()))?;
    }
    if header.is_none() {
        w.write_record(["schema_version"])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    Ok(Artifact {
        name: name.to_string(),
        contents: String::from_utf8(bytes).expect("csv output is utf-8"),
    })
}

/// Pretty JSON with `schema_version` as the first field.
pub fn json_artifact<T: Serialize>(name: &str, report: &T) -> Result<Artifact> {
    let mut v = serde_json::to_value(report).map_err(|e| Error::Io(e.to_string()))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::Io("json report must be a struct".into()))?;
    let mut out = serde_json::Map::new();
    out.insert("schema_version".into(), SCHEMA_VERSION.into());
    out.append(obj);
    let mut s = serde_json::to_string_pretty(&out).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(Artifact {
        name: name.to_string(),
        contents: s,
    })
}

/// Writes each artifact through a temporary file in `dir` and a rename.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for a in artifacts {
        let target = dir.join(&a.name);
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(a.contents.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target).map_err(|e| Error::Io(e.error.to_string()))?;
        written.push(target);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        k: usize,
        lambda: f64,
        theta: Option<f64>,
    }

    #[test]
    fn csv_has_version_column() {
        let a = csv_artifact(
            "t.csv",
            &[
                Row {
                    k: 1,
                    lambda: 0.5,
                    theta: None,
                },
                Row {
                    k: 2,
                    lambda: 1e-20,
                    theta: Some(-1.0),
                },
            ],
        )
        .unwrap();
        let lines: Vec<&str> = a.contents.lines().collect();
        assert_eq!(lines[0], "schema_version,k,lambda,theta");
        assert_eq!(lines[1], "1,1,0.5,");
        assert_eq!(lines[2], "1,2,1e-20,-1.0");
    }

    #[test]
    fn json_starts_with_version() {
        let a = json_artifact(
            "r.json",
            &Row {
                k: 3,
                lambda: 2.0,
                theta: None,
            },
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&a.contents).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert!(a.contents.trim_start().starts_with("{\n  \"schema_version\""));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let a = Artifact {
            name: "x.csv".into(),
            contents: "old".into(),
        };
        write_artifacts(dir.path(), &[a]).unwrap();
        let b = Artifact {
            name: "x.csv".into(),
            contents: "new".into(),
        };
        write_artifacts(dir.path(), &[b]).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("x.csv")).unwrap(), "new");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
