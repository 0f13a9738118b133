//! Run directories: versioned creation, tracked writes, the manifest and
//! the plot-data bundle.
//!
//! Layout: `manifest.json`, `config.toml`, `fields/*.csv`, `traces/*.json`,
//! `verdicts/*.json`, `plotdata/*.csv`, and `error.json` after a failure.
//! Wall times live only in the manifest, so every other file is a pure
//! function of the configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

/// An output directory that records every file written into it.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: BTreeMap<String, String>,
    timings: BTreeMap<String, f64>,
}

/// First of `base`, `base-v2`, `base-v3`, … that is absent or empty.
pub fn versioned_dir(base: &Path) -> Result<PathBuf> {
    let free = |p: &Path| -> Result<bool> {
        Ok(!p.exists() || (p.is_dir() && fs::read_dir(p)?.next().is_none()))
    };
    if free(base)? {
        return Ok(base.to_path_buf());
    }
    let name = base
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path {} has no final component", base.display())))?
        .to_string_lossy()
        .into_owned();
    for k in 2.. {
        let candidate = base.with_file_name(format!("{name}-v{k}"));
        if free(&candidate)? {
            return Ok(candidate);
        }
    }
    unreachable!("directory versions are unbounded")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunDir {
    /// Creates the run directory under a fresh version of `base`.
    pub fn create(base: &Path) -> Result<Self> {
        let root = versioned_dir(base)?;
        fs::create_dir_all(&root)?;
        Ok(RunDir {
            root,
            files: BTreeMap::new(),
            timings: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `contents` to the relative path `rel`; each path once.
    pub fn write(&mut self, rel: &str, contents: &[u8]) -> Result<()> {
        if rel == MANIFEST || self.files.contains_key(rel) {
            return Err(Error::Io(format!("{rel} written twice in one run")));
        }
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.files.insert(rel.to_owned(), sha256_hex(contents));
        Ok(())
    }

    pub fn write_json(&mut self, rel: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Records a file produced outside [`RunDir::write`].
    pub fn register(&mut self, rel: &str) -> Result<()> {
        let bytes = fs::read(self.root.join(rel))?;
        self.files.insert(rel.to_owned(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn record_time(&mut self, label: &str, seconds: f64) {
        self.timings.insert(label.to_owned(), seconds);
    }

    /// Hash over the sorted `(path, sha256)` list, which excludes the
    /// manifest and therefore every wall time.
    pub fn payload_hash(&self) -> String {
        let mut listing = String::new();
        for (path, hash) in &self.files {
            let _ = writeln!(listing, "{path} {hash}");
        }
        sha256_hex(listing.as_bytes())
    }

    /// Writes `manifest.json` and returns it.
    pub fn finish(self, command: &str, status: &str, config: Value) -> Result<Value> {
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(path, hash)| json!({ "path": path, "sha256": hash }))
            .collect();
        let manifest = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "status": status,
            "directory": self.root.display().to_string(),
            "config": config,
            "wall_times_s": self.timings,
            "files": files,
            "payload_sha256": self.payload_hash(),
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join(MANIFEST), text)?;
        Ok(manifest)
    }
}

/// Plot CSVs written by [`emit_plot_data`] and the figure classes that had
/// no input.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlotBundle {
    pub written: Vec<String>,
    pub missing: Vec<String>,
}

fn read_json(path: &Path) -> Result<Option<Value>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)?;
    Ok(Some(serde_json::from_str(&text)?))
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:?}"),
        None => String::new(),
    }
}

/// `(log d, log u)` rows from every `fields/*.csv` with `index,x,d,u` columns.
fn fit_series(root: &Path) -> Result<Option<String>> {
    let dir = root.join("fields");
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut names: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    names.sort();
    let mut out = String::from("field,log_d,log_u\n");
    let mut rows = 0;
    for path in names {
        let text = fs::read_to_string(&path)?;
        let mut lines = text.lines();
        if lines.next() != Some("index,x,d,u") {
            continue;
        }
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            let (Some(d), Some(u)) = (cols.get(2), cols.get(3)) else { continue };
            let (Ok(d), Ok(u)) = (d.parse::<f64>(), u.parse::<f64>()) else { continue };
            if d > 0.0 && u > 0.0 {
                let _ = writeln!(out, "{stem},{:?},{:?}", d.ln(), u.ln());
                rows += 1;
            }
        }
    }
    Ok((rows > 0).then_some(out))
}

fn continuation_series(root: &Path) -> Result<Option<String>> {
    let Some(trace) = read_json(&root.join("traces/continuation.json"))? else {
        return Ok(None);
    };
    let mut out = String::from("eps,sup_norm\n");
    for r in trace["records"].as_array().into_iter().flatten() {
        let _ = writeln!(out, "{},{}", num(&r["eps"]), num(&r["sup_norm"]));
    }
    Ok(Some(out))
}

fn sobolev_series(root: &Path) -> Result<Option<String>> {
    let Some(doc) = read_json(&root.join("verdicts/sobolev.json"))? else {
        return Ok(None);
    };
    let mut out = String::from("rho,level,energy,ratio\n");
    for probe in doc["data"]["probes"].as_array().into_iter().flatten() {
        let levels = probe["levels"].as_array().cloned().unwrap_or_default();
        let energies = probe["energies"].as_array().cloned().unwrap_or_default();
        let ratios = probe["ratios"].as_array().cloned().unwrap_or_default();
        for (j, (n, e)) in levels.iter().zip(&energies).enumerate() {
            // the coarsest level has no ratio
            let ratio = if j == 0 { String::new() } else { ratios.get(j - 1).map(num).unwrap_or_default() };
            let _ = writeln!(out, "{},{},{},{ratio}", num(&probe["rho"]), n, num(e));
        }
    }
    Ok(Some(out))
}

fn nonexistence_series(root: &Path) -> Result<Option<String>> {
    let Some(doc) = read_json(&root.join("verdicts/nonexistence.json"))? else {
        return Ok(None);
    };
    let mut out = String::from("beta_tilde,gamma,level,hardy\n");
    for entry in doc["data"]["entries"].as_array().into_iter().flatten() {
        for series in entry["hardy"].as_array().into_iter().flatten() {
            let levels = series["levels"].as_array().cloned().unwrap_or_default();
            let values = series["values"].as_array().cloned().unwrap_or_default();
            for (n, h) in levels.iter().zip(&values) {
                let _ = writeln!(out, "{},{},{},{}", num(&entry["beta_tilde"]), num(&series["gamma"]), n, num(h));
            }
        }
    }
    Ok(Some(out))
}

/// Writes one tidy CSV per figure class found in the run directory `root`:
/// `fit_series.csv`, `continuation.csv`, `sobolev.csv`, `nonexistence.csv`
/// under `plotdata/`. Classes without inputs are listed in `missing`.
pub fn emit_plot_data(root: &Path) -> Result<PlotBundle> {
    let classes: [(&str, fn(&Path) -> Result<Option<String>>); 4] = [
        ("fit_series", fit_series),
        ("continuation", continuation_series),
        ("sobolev", sobolev_series),
        ("nonexistence", nonexistence_series),
    ];
    let mut bundle = PlotBundle::default();
    for (name, build) in classes {
        match build(root)? {
            Some(csv) => {
                let rel = format!("plotdata/{name}.csv");
                fs::create_dir_all(root.join("plotdata"))?;
                fs::write(root.join(&rel), csv)?;
                bundle.written.push(rel);
            }
            None => bundle.missing.push(name.to_owned()),
        }
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versions_skip_occupied_directories() {
        let tmp = tempfile::tempdir().unwrap();
        let base = tmp.path().join("run");
        assert_eq!(versioned_dir(&base).unwrap(), base);
        fs::create_dir_all(&base).unwrap();
        assert_eq!(versioned_dir(&base).unwrap(), base);
        fs::write(base.join("x"), "1").unwrap();
        assert_eq!(versioned_dir(&base).unwrap(), tmp.path().join("run-v2"));
    }

    #[test]
    fn manifest_lists_each_file_once() {
        let tmp = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(&tmp.path().join("r")).unwrap();
        run.write("fields/a.csv", b"index,x,d,u\n").unwrap();
        run.write_json("verdicts/v.json", &json!({ "ok": true })).unwrap();
        assert!(run.write("fields/a.csv", b"again").is_err());
        let root = run.root().to_path_buf();
        let m = run.finish("solve", "pass", json!({})).unwrap();
        let files: Vec<&str> = m["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap()).collect();
        assert_eq!(files, vec!["fields/a.csv", "verdicts/v.json"]);
        assert!(root.join(MANIFEST).exists());
    }

    #[test]
    fn empty_run_gives_empty_bundle() {
        let tmp = tempfile::tempdir().unwrap();
        let b = emit_plot_data(tmp.path()).unwrap();
        assert!(b.written.is_empty());
        assert_eq!(b.missing.len(), 4);
    }

    #[test]
    fn sobolev_rows_per_level() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir_all(tmp.path().join("verdicts")).unwrap();
        let probe = |rho: f64| json!({ "rho": rho, "levels": [8, 16, 32], "energies": [1.0, 2.0, 4.0], "ratios": [2.0, 2.0] });
        let doc = json!({ "data": { "probes": [probe(0.8), probe(1.2)] } });
        fs::write(tmp.path().join("verdicts/sobolev.json"), doc.to_string()).unwrap();
        let b = emit_plot_data(tmp.path()).unwrap();
        assert_eq!(b.written, vec!["plotdata/sobolev.csv"]);
        let csv = fs::read_to_string(tmp.path().join("plotdata/sobolev.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 6);
    }
}
