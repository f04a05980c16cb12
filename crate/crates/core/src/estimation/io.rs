use std::io::{Read, Write};

use super::{ObservationLog, Outcomes};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Writes logs as CSV with columns `page_id,y_time,bit` (partial logs) or
/// `page_id,y_time,count` (full logs). All logs must be of the same mode.
pub fn write_logs_csv<T: Scalar, W: Write>(
    logs: &[(String, ObservationLog<T>)],
    writer: W,
) -> Result<()> {
    let partial = logs.first().is_none_or(|(_, l)| l.is_partial());
    if logs.iter().any(|(_, l)| l.is_partial() != partial) {
        return Err(Error::invalid("cannot mix bit and count logs in one file"));
    }
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["page_id", "y_time", if partial { "bit" } else { "count" }])?;
    for (id, log) in logs {
        let times = log.refresh_times();
        match log.outcomes() {
            Outcomes::Bits(bits) => {
                for (y, b) in times.iter().zip(bits) {
                    out.write_record([id.as_str(), &y.to_string(), if *b { "1" } else { "0" }])?;
                }
            }
            Outcomes::Counts(counts) => {
                for (y, c) in times.iter().zip(counts) {
                    out.write_record([id.as_str(), &y.to_string(), &c.to_string()])?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads logs written by [`write_logs_csv`]. Each page's windows are measured
/// from time zero; pages come back in order of first appearance.
pub fn read_logs_csv<T: Scalar, R: Read>(reader: R) -> Result<Vec<(String, ObservationLog<T>)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    let partial = match cols.as_slice() {
        ["page_id", "y_time", "bit"] => true,
        ["page_id", "y_time", "count"] => false,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "expected header page_id,y_time,bit|count, got {}",
                    cols.join(",")
                ),
            })
        }
    };

    struct Page<T> {
        id: String,
        times: Vec<T>,
        values: Vec<u64>,
    }
    let mut pages: Vec<Page<T>> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row as u64 + 2;
        let record = record?;
        let parse_err = |message: String| Error::Parse { line, message };
        if record.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 fields, got {}",
                record.len()
            )));
        }
        let id = record[0].trim().to_string();
        let y: f64 = record[1]
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad y_time: {e}")))?;
        let v: u64 = record[2]
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad value: {e}")))?;
        if partial && v > 1 {
            return Err(parse_err(format!("bit must be 0 or 1, got {v}")));
        }
        let page = match pages.iter_mut().position(|p| p.id == id) {
            Some(i) => &mut pages[i],
            None => {
                pages.push(Page {
                    id,
                    times: Vec::new(),
                    values: Vec::new(),
                });
                pages.last_mut().expect("just pushed")
            }
        };
        let y = T::lit(y);
        let prev = page.times.last().copied().unwrap_or(T::zero());
        if !(y > prev) {
            return Err(parse_err(format!(
                "y_time {y} does not increase past {prev}"
            )));
        }
        page.times.push(y);
        page.values.push(v);
    }

    pages
        .into_iter()
        .map(|p| {
            let log = if partial {
                ObservationLog::from_refresh_times(
                    T::zero(),
                    &p.times,
                    p.values.iter().map(|&v| v == 1).collect(),
                )?
            } else {
                let mut prev = T::zero();
                let windows = p
                    .times
                    .iter()
                    .map(|&y| {
                        let w = y - prev;
                        prev = y;
                        w
                    })
                    .collect();
                ObservationLog::full(windows, p.values)?
            };
            Ok((p.id, log))
        })
        .collect()
}
