//! Result tables, traces and the metadata sidecar.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use pathkernel::State;
use serde_json::{json, Value};

/// Result table columns, in order.
pub const COLUMNS: [&str; 7] = [
    "gamma",
    "phi_avg",
    "se_phi",
    "dphi",
    "se_dphi",
    "n_samples",
    "overflow_count",
];
pub const DETERMINISTIC_COLUMN: &str = "phi_avg_deterministic";

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub gamma: f64,
    pub phi_avg: f64,
    pub se_phi: f64,
    pub dphi: f64,
    pub se_dphi: f64,
    pub n_samples: usize,
    pub overflow_count: usize,
    pub deterministic: Option<f64>,
}

/// Shortest round-trip decimal form, so equal values give equal bytes.
fn num(v: f64) -> String {
    format!("{v}")
}

pub struct TableWriter {
    writer: csv::Writer<File>,
    deterministic: bool,
}

impl TableWriter {
    pub fn create(path: &Path, deterministic: bool) -> Result<Self> {
        let mut writer =
            csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        let mut header: Vec<&str> = COLUMNS.to_vec();
        if deterministic {
            header.push(DETERMINISTIC_COLUMN);
        }
        writer.write_record(&header)?;
        writer.flush()?;
        Ok(Self {
            writer,
            deterministic,
        })
    }

    /// Writes and flushes one row, so a failed sweep leaves a valid prefix.
    pub fn write(&mut self, row: &Row) -> Result<()> {
        let mut rec = vec![
            num(row.gamma),
            num(row.phi_avg),
            num(row.se_phi),
            num(row.dphi),
            num(row.se_dphi),
            row.n_samples.to_string(),
            row.overflow_count.to_string(),
        ];
        if self.deterministic {
            rec.push(num(row.deterministic.unwrap_or(f64::NAN)));
        }
        self.writer.write_record(&rec)?;
        self.writer.flush()?;
        Ok(())
    }
}

/// `t, x0, x1, ...`.
pub fn write_trace(path: &Path, trace: &[(f64, State<f64>)]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let dim = trace.first().map_or(0, |(_, x)| x.dim());
    let mut header = vec!["t".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (t, x) in trace {
        let mut rec = vec![num(*t)];
        rec.extend(x.iter().map(|&c| num(c)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `t, lambda` running estimates.
pub fn write_lyapunov(path: &Path, trace: &[(f64, f64)]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["t", "lambda"])?;
    for (t, l) in trace {
        w.write_record([num(*t), num(*l)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `<out>.meta.json`. The timestamp lives only here.
pub fn write_meta(
    out: &Path,
    kind: &str,
    config: &impl serde::Serialize,
    results: Value,
    error: Option<String>,
) -> Result<()> {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = json!({
        "tool": "pathkernel",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": kind,
        "status": if error.is_none() { "ok" } else { "failed" },
        "error": error,
        "timestamp": timestamp,
        "config": config,
        "results": results,
    });
    let path = meta_path(out);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(file, &meta)?;
    Ok(())
}
