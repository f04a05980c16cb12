//! Crawl-log ingestion: one row per crawl with a changed-since-last-crawl
//! bit, fitted to a page ensemble by maximum likelihood.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use freshcrawl::estimation::{mle_estimate, EstimatorConfig, ObservationLog, RateBounds};
use freshcrawl::{Error, ObservationLogF64, PageEnsembleF64, Result};

pub const HEADER: [&str; 4] = ["page_id", "crawl_time", "changed", "importance"];

/// Bounds used for crawl logs unless overridden.
pub const DEFAULT_XI_MIN: f64 = 1e-9;
pub const DEFAULT_XI_MAX: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CrawlLogRecord {
    pub page_id: String,
    /// Days since the start of the log.
    pub crawl_time: f64,
    pub changed: u8,
    pub importance: f64,
}

#[derive(Debug, Clone)]
pub struct IngestReport {
    pub page_ids: Vec<String>,
    pub ensemble: PageEnsembleF64,
    pub logs: Vec<ObservationLogF64>,
    pub excluded_all_unchanged: Vec<String>,
    pub excluded_all_changed: Vec<String>,
    pub excluded_zero_importance: Vec<String>,
    pub warnings: Vec<String>,
}

/// Counts for the summary printed after ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub pages: usize,
    pub excluded_all_unchanged: usize,
    pub excluded_all_changed: usize,
    pub excluded_zero_importance: usize,
    pub warnings: usize,
}

impl IngestReport {
    pub fn summary(&self) -> IngestSummary {
        IngestSummary {
            pages: self.page_ids.len(),
            excluded_all_unchanged: self.excluded_all_unchanged.len(),
            excluded_all_changed: self.excluded_all_changed.len(),
            excluded_zero_importance: self.excluded_zero_importance.len(),
            warnings: self.warnings.len(),
        }
    }
}

struct PageRows {
    times: Vec<f64>,
    bits: Vec<bool>,
    importance: f64,
}

pub fn ingest_crawl_log_path(path: &Path, xi_min: f64, xi_max: f64) -> Result<IngestReport> {
    ingest_crawl_log(File::open(path)?, xi_min, xi_max)
}

/// Reads a crawl log and fits each page's change rate with the MLE.
///
/// The first crawl of every page covers `(0, crawl_time]`, so crawl times
/// must be positive. Pages that never changed or changed on every crawl carry
/// no rate information and are dropped, as are pages with zero importance.
pub fn ingest_crawl_log<R: Read>(reader: R, xi_min: f64, xi_max: f64) -> Result<IngestReport> {
    let bounds = RateBounds::new(xi_min, xi_max)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", HEADER.join(",")),
        });
    }

    let mut order: Vec<String> = Vec::new();
    let mut pages: HashMap<String, PageRows> = HashMap::new();
    let mut warnings = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row: CrawlLogRecord = record
            .deserialize(Some(&header))
            .map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        let bad = |message: String| Error::Parse { line, message };
        if row.changed > 1 {
            return Err(bad(format!("changed must be 0 or 1, got {}", row.changed)));
        }
        if !(row.crawl_time > 0.0 && row.crawl_time.is_finite()) {
            return Err(bad(format!(
                "crawl_time {} must be positive",
                row.crawl_time
            )));
        }
        if !(row.importance >= 0.0 && row.importance.is_finite()) {
            return Err(bad(format!(
                "importance {} must be non-negative",
                row.importance
            )));
        }
        let entry = match pages.get_mut(&row.page_id) {
            Some(p) => p,
            None => {
                order.push(row.page_id.clone());
                pages.entry(row.page_id.clone()).or_insert(PageRows {
                    times: Vec::new(),
                    bits: Vec::new(),
                    importance: row.importance,
                })
            }
        };
        if let Some(&last) = entry.times.last() {
            if !(row.crawl_time > last) {
                return Err(bad(format!(
                    "crawl_time {} of page {} does not increase (previous {last})",
                    row.crawl_time, row.page_id
                )));
            }
        }
        if entry.importance != row.importance {
            warnings.push(format!(
                "line {line}: importance of page {} changed from {} to {}; using the last value",
                row.page_id, entry.importance, row.importance
            ));
            entry.importance = row.importance;
        }
        entry.times.push(row.crawl_time);
        entry.bits.push(row.changed == 1);
    }

    let config = EstimatorConfig::default();
    let (mut page_ids, mut logs, mut xi, mut zeta) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let (mut unchanged, mut changed, mut unimportant) = (Vec::new(), Vec::new(), Vec::new());
    for id in order {
        let page = pages.remove(&id).expect("every ordered id has rows");
        if page.bits.iter().all(|&b| !b) {
            unchanged.push(id);
        } else if page.bits.iter().all(|&b| b) {
            changed.push(id);
        } else if page.importance == 0.0 {
            unimportant.push(id);
        } else {
            let log = ObservationLog::from_refresh_times(0.0, &page.times, page.bits)?;
            xi.push(mle_estimate(&log, bounds, &config)?.xi_hat);
            zeta.push(page.importance);
            page_ids.push(id);
            logs.push(log);
        }
    }
    if xi.is_empty() {
        return Err(Error::EmptyEnsemble(format!(
            "no page survived filtering ({} never changed, {} always changed, {} zero importance)",
            unchanged.len(),
            changed.len(),
            unimportant.len()
        )));
    }
    Ok(IngestReport {
        page_ids,
        ensemble: PageEnsembleF64::new(xi, zeta, xi_min, xi_max)?,
        logs,
        excluded_all_unchanged: unchanged,
        excluded_all_changed: changed,
        excluded_zero_importance: unimportant,
        warnings,
    })
}
