//! CSV ingestion (wide and long layouts) and the wide-format writer.
//!
//! Wide layout: one row per series, header
//! `id,label,<chan>_t0,...,<chan>_t{T-1}` repeated per channel in schema
//! order. Long layout: one row per timestep, with a series-id column, a label
//! column and one column per channel. Injection sites live in a sibling
//! `<name>.truth.json`.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Channel, Dataset, Injection, Label, TimeSeries};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    #[default]
    Wide,
    Long,
}

/// Describes how a CSV file maps onto series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaSpec {
    pub layout: Layout,
    /// Series id column. Required for the long layout; for the wide layout
    /// ids default to the zero-based row number when absent.
    pub id_column: Option<String>,
    pub label_column: String,
    /// Expected channel names. Wide: inferred from the header when `None`.
    /// Long: the value columns, all non-id/label/time columns when `None`.
    pub channels: Option<Vec<String>>,
    /// Optional long-layout timestep column; must count 0..T-1 per series.
    pub time_column: Option<String>,
}

impl Default for SchemaSpec {
    fn default() -> Self {
        SchemaSpec {
            layout: Layout::Wide,
            id_column: Some("id".into()),
            label_column: "label".into(),
            channels: None,
            time_column: None,
        }
    }
}

impl SchemaSpec {
    pub fn long(id_column: &str, label_column: &str) -> Self {
        SchemaSpec {
            layout: Layout::Long,
            id_column: Some(id_column.into()),
            label_column: label_column.into(),
            channels: None,
            time_column: None,
        }
    }
}

/// Injection sites keyed by series id.
pub type Truth = BTreeMap<u64, Vec<Injection>>;

/// Rounds `v` to the value a CSV round trip yields.
pub fn quantize(v: f64) -> f64 {
    format_real(v).parse().expect("formatted real parses")
}

/// Formats a real with 12 significant digits, shortest `%g`-style form.
pub fn format_real(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if negative { "-" } else { "" };
    if (-5..12).contains(&exp) {
        let mut out = String::from(sign);
        if exp < 0 {
            out.push_str("0.");
            out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
            out.push_str(digits);
        } else {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                out.push_str(digits);
                out.extend(std::iter::repeat_n('0', int_len - digits.len()));
            } else {
                out.push_str(&digits[..int_len]);
                out.push('.');
                out.push_str(&digits[int_len..]);
            }
        }
        out
    } else {
        let (head, tail) = digits.split_at(1);
        if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        }
    }
}

fn parse_label(raw: &str, row: usize) -> Result<Option<Label>> {
    match raw.trim() {
        "" => Ok(None),
        "0" | "normal" => Ok(Some(Label::Normal)),
        "1" | "anomalous" => Ok(Some(Label::Anomalous)),
        other => Err(Error::Label {
            row,
            value: other.to_string(),
        }),
    }
}

fn parse_value(raw: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        reason: format!("`{raw}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            reason: format!("`{raw}` is not finite"),
        });
    }
    Ok(v)
}

fn parse_id(raw: &str, row: usize, column: &str) -> Result<u64> {
    raw.trim().parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        reason: format!("`{raw}` is not a non-negative integer id"),
    })
}

fn find_column(header: &csv::StringRecord, name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Format {
            row: 1,
            reason: format!("missing column `{name}`"),
        })
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::Utf8 { err, .. } => Error::Format {
            row,
            reason: format!("invalid UTF-8: {err}"),
        },
        other => Error::Format {
            row,
            reason: format!("{other:?}"),
        },
    }
}

/// Parses a CSV document into a dataset according to the schema.
pub fn parse_csv<R: Read>(reader: R, spec: &SchemaSpec) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    match spec.layout {
        Layout::Wide => parse_wide(&mut rdr, &header, spec),
        Layout::Long => parse_long(&mut rdr, &header, spec),
    }
}

/// Splits `torque_t12` into (`torque`, 12).
fn split_step_column(name: &str) -> Option<(&str, usize)> {
    let (chan, step) = name.rsplit_once("_t")?;
    if chan.is_empty() || step.is_empty() || !step.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((chan, step.parse().ok()?))
}

fn parse_wide<R: Read>(
    rdr: &mut csv::Reader<R>,
    header: &csv::StringRecord,
    spec: &SchemaSpec,
) -> Result<Dataset> {
    let id_col = spec
        .id_column
        .as_deref()
        .map(|c| find_column(header, c))
        .transpose()?;
    let label_col = find_column(header, &spec.label_column)?;

    // (column index, channel slot, step)
    let mut value_cols = Vec::new();
    let mut channels: Vec<String> = Vec::new();
    for (i, h) in header.iter().enumerate() {
        if Some(i) == id_col || i == label_col {
            continue;
        }
        let (chan, step) = split_step_column(h).ok_or_else(|| Error::Format {
            row: 1,
            reason: format!("column `{h}` is not of the form <channel>_t<step>"),
        })?;
        let slot = match channels.iter().position(|c| c == chan) {
            Some(s) => s,
            None => {
                channels.push(chan.to_string());
                channels.len() - 1
            }
        };
        value_cols.push((i, slot, step));
    }
    if channels.is_empty() {
        return Err(Error::Format {
            row: 1,
            reason: "header declares no channel columns".into(),
        });
    }
    if let Some(expected) = &spec.channels {
        if *expected != channels {
            return Err(Error::Format {
                row: 1,
                reason: format!("header channels {channels:?} differ from schema {expected:?}"),
            });
        }
    }
    // Each channel block must be contiguous and list steps 0..T-1 in order.
    let mut next_step = vec![0usize; channels.len()];
    let mut last_slot = None;
    let mut finished = vec![false; channels.len()];
    for &(_, slot, step) in &value_cols {
        if last_slot != Some(slot) {
            if let Some(prev) = last_slot {
                finished[prev] = true;
            }
            if finished[slot] {
                return Err(Error::Format {
                    row: 1,
                    reason: format!("columns of channel `{}` are not contiguous", channels[slot]),
                });
            }
            last_slot = Some(slot);
        }
        if step != next_step[slot] {
            return Err(Error::Format {
                row: 1,
                reason: format!(
                    "channel `{}`: expected step t{} but found t{step}",
                    channels[slot], next_step[slot]
                ),
            });
        }
        next_step[slot] += 1;
    }
    if next_step.iter().any(|&n| n != next_step[0]) {
        return Err(Error::Format {
            row: 1,
            reason: format!("channels declare different lengths {next_step:?}"),
        });
    }

    let mut series = Vec::new();
    let mut ids = HashSet::new();
    for (n, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = record.position().map_or(n + 2, |p| p.line() as usize);
        let ragged = record.len() != header.len()
            || value_cols.iter().any(|&(i, _, _)| record[i].trim().is_empty());
        if ragged {
            let present = value_cols
                .iter()
                .filter(|&&(i, _, _)| record.get(i).is_some_and(|c| !c.trim().is_empty()))
                .count();
            return Err(Error::Format {
                row,
                reason: format!(
                    "ragged row: {present} values present, header declares {} ({} channels x {} steps)",
                    value_cols.len(),
                    channels.len(),
                    next_step[0]
                ),
            });
        }
        let id = match id_col {
            Some(c) => parse_id(&record[c], row, &header[c])?,
            None => n as u64,
        };
        if !ids.insert(id) {
            return Err(Error::Format {
                row,
                reason: format!("duplicate series id {id}"),
            });
        }
        let label = parse_label(&record[label_col], row)?;
        let mut values = vec![Vec::with_capacity(next_step[0]); channels.len()];
        for &(i, slot, _) in &value_cols {
            values[slot].push(parse_value(&record[i], row, &header[i])?);
        }
        let chans = channels
            .iter()
            .zip(values)
            .map(|(name, v)| Channel::new(name.clone(), v))
            .collect();
        let s = TimeSeries::new(id, chans, label).map_err(|e| Error::Format {
            row,
            reason: e.to_string(),
        })?;
        series.push(s);
    }
    Dataset::new(series, channels, None)
}

fn parse_long<R: Read>(
    rdr: &mut csv::Reader<R>,
    header: &csv::StringRecord,
    spec: &SchemaSpec,
) -> Result<Dataset> {
    let id_name = spec.id_column.as_deref().ok_or_else(|| {
        Error::config("id_column", "the long layout needs a series id column")
    })?;
    let id_col = find_column(header, id_name)?;
    let label_col = find_column(header, &spec.label_column)?;
    let time_col = spec
        .time_column
        .as_deref()
        .map(|c| find_column(header, c))
        .transpose()?;
    let channel_cols: Vec<(usize, String)> = match &spec.channels {
        Some(names) => names
            .iter()
            .map(|n| find_column(header, n).map(|i| (i, n.clone())))
            .collect::<Result<_>>()?,
        None => header
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != id_col && i != label_col && Some(i) != time_col)
            .map(|(i, h)| (i, h.to_string()))
            .collect(),
    };
    if channel_cols.is_empty() {
        return Err(Error::Format {
            row: 1,
            reason: "no channel columns".into(),
        });
    }
    let names: Vec<String> = channel_cols.iter().map(|(_, n)| n.clone()).collect();

    struct Pending {
        id: u64,
        first_row: usize,
        label: Option<Label>,
        values: Vec<Vec<f64>>,
    }

    let mut series: Vec<TimeSeries> = Vec::new();
    let mut seen = HashSet::new();
    let mut expected_len: Option<usize> = None;
    let mut current: Option<Pending> = None;

    let mut finish = |p: Pending, series: &mut Vec<TimeSeries>| -> Result<()> {
        let len = p.values[0].len();
        match expected_len {
            None => expected_len = Some(len),
            Some(t) if t != len => {
                return Err(Error::Format {
                    row: p.first_row,
                    reason: format!("ragged series {}: length {len}, expected {t}", p.id),
                })
            }
            _ => {}
        }
        let chans = names
            .iter()
            .zip(p.values)
            .map(|(n, v)| Channel::new(n.clone(), v))
            .collect();
        let s = TimeSeries::new(p.id, chans, p.label).map_err(|e| Error::Format {
            row: p.first_row,
            reason: e.to_string(),
        })?;
        series.push(s);
        Ok(())
    };

    for (n, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = record.position().map_or(n + 2, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(Error::Format {
                row,
                reason: format!("row has {} cells, header has {}", record.len(), header.len()),
            });
        }
        let id = parse_id(&record[id_col], row, id_name)?;
        let label = parse_label(&record[label_col], row)?;
        if current.as_ref().is_none_or(|p| p.id != id) {
            if let Some(done) = current.take() {
                finish(done, &mut series)?;
            }
            if !seen.insert(id) {
                return Err(Error::Format {
                    row,
                    reason: format!("rows of series {id} are not contiguous"),
                });
            }
            current = Some(Pending {
                id,
                first_row: row,
                label,
                values: vec![Vec::new(); channel_cols.len()],
            });
        }
        let p = current.as_mut().expect("pending series");
        if p.label != label {
            return Err(Error::Format {
                row,
                reason: format!("series {id} changes label mid-sequence"),
            });
        }
        if let Some(tc) = time_col {
            let step = parse_id(&record[tc], row, &header[tc])?;
            if step as usize != p.values[0].len() {
                return Err(Error::Format {
                    row,
                    reason: format!(
                        "series {id}: expected step {} but found {step}",
                        p.values[0].len()
                    ),
                });
            }
        }
        for (slot, (i, name)) in channel_cols.iter().enumerate() {
            p.values[slot].push(parse_value(&record[*i], row, name)?);
        }
    }
    if let Some(done) = current.take() {
        finish(done, &mut series)?;
    }
    Dataset::new(series, names, None)
}

/// Parses an injection-site sidecar document.
pub fn parse_truth(text: &str) -> Result<Truth> {
    Ok(serde_json::from_str(text)?)
}

/// `<dir>/<stem>.truth.json` next to a CSV path.
pub fn truth_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.truth.json"))
}

/// Reads a CSV dataset and, when present, its truth sidecar.
pub fn load_csv(path: &Path, spec: &SchemaSpec) -> Result<Dataset> {
    let mut ds = parse_csv(File::open(path)?, spec)?;
    let sidecar = truth_path(path);
    if sidecar.exists() {
        let truth = parse_truth(&fs::read_to_string(&sidecar)?)?;
        for s in &mut ds.series {
            if let Some(sites) = truth.get(&s.id) {
                s.injections = sites.clone();
            }
        }
        ds.validate()?;
    }
    Ok(ds)
}

/// Writes the wide layout.
pub fn write_csv<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    dataset.validate().map_err(|e| Error::Format {
        row: 0,
        reason: format!("refusing to write invalid dataset: {e}"),
    })?;
    let t_len = dataset.length().unwrap_or(0);
    let mut w = BufWriter::new(out);
    let mut line = String::from("id,label");
    for chan in &dataset.channel_schema {
        for t in 0..t_len {
            line.push_str(&format!(",{chan}_t{t}"));
        }
    }
    line.push('\n');
    w.write_all(line.as_bytes())?;
    for s in &dataset.series {
        line.clear();
        line.push_str(&s.id.to_string());
        line.push(',');
        if let Some(l) = s.label {
            line.push_str(&l.as_u8().to_string());
        }
        for ch in &s.channels {
            for &v in &ch.values {
                line.push(',');
                line.push_str(&format_real(v));
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_truth<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let truth: Truth = dataset
        .series
        .iter()
        .filter(|s| !s.injections.is_empty())
        .map(|s| (s.id, s.injections.clone()))
        .collect();
    serde_json::to_writer(&mut out, &truth)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes the wide CSV and, if any series carries injection sites, the
/// truth sidecar.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf)?;
    fs::write(path, buf)?;
    if dataset.series.iter().any(|s| !s.injections.is_empty()) {
        let mut buf = Vec::new();
        write_truth(dataset, &mut buf)?;
        fs::write(truth_path(path), buf)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const WIDE: &str = "id,label,a_t0,a_t1,a_t2,a_t3,b_t0,b_t1,b_t2,b_t3\n\
                        0,0,1,2,3,4,5,6,7,8\n\
                        1,1,1,2,30,4,5,6,7,8\n\
                        2,0,0,0,0,0,1,1,1,1\n";

    #[test]
    fn parses_wide() {
        let ds = parse_csv(WIDE.as_bytes(), &SchemaSpec::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_anomalous(), 1);
        assert_eq!(ds.channel_schema, vec!["a", "b"]);
        assert_eq!(ds.series[1].channels[0].values, vec![1.0, 2.0, 30.0, 4.0]);
        assert_eq!(ds.series[0].channels[1].values, vec![5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn ragged_row_is_reported() {
        let text = "id,label,a_t0,a_t1,a_t2,a_t3,a_t4\n0,0,1,2,3,4,5\n1,1,1,2,3,4\n";
        match parse_csv(text.as_bytes(), &SchemaSpec::default()) {
            Err(Error::Format { row, reason }) => {
                assert_eq!(row, 3);
                assert!(reason.contains("ragged"), "{reason}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
        let text = "id,label,a_t0,a_t1,a_t2,a_t3,a_t4\n0,0,1,2,3,4,5\n1,1,1,2,3,4,\n";
        assert!(matches!(
            parse_csv(text.as_bytes(), &SchemaSpec::default()),
            Err(Error::Format { row: 3, .. })
        ));
    }

    #[test]
    fn non_numeric_and_bad_label() {
        let text = "id,label,a_t0,a_t1\n0,0,1,x\n";
        match parse_csv(text.as_bytes(), &SchemaSpec::default()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "a_t1");
            }
            other => panic!("{other:?}"),
        }
        let text = "id,label,a_t0,a_t1\n0,2,1,2\n";
        assert!(matches!(
            parse_csv(text.as_bytes(), &SchemaSpec::default()),
            Err(Error::Label { row: 2, .. })
        ));
    }

    #[test]
    fn parses_long() {
        let text = "sid,step,label,a,b\n\
                    4,0,1,1,10\n4,1,1,2,20\n4,2,1,3,30\n\
                    9,0,0,4,40\n9,1,0,5,50\n9,2,0,6,60\n";
        let spec = SchemaSpec {
            time_column: Some("step".into()),
            ..SchemaSpec::long("sid", "label")
        };
        let ds = parse_csv(text.as_bytes(), &spec).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.series[0].id, 4);
        assert_eq!(ds.series[1].channels[1].values, vec![40.0, 50.0, 60.0]);
        assert_eq!(ds.n_anomalous(), 1);

        let ragged = "sid,label,a\n1,0,1\n1,0,2\n2,0,1\n2,0,2\n2,0,3\n";
        assert!(matches!(
            parse_csv(ragged.as_bytes(), &SchemaSpec::long("sid", "label")),
            Err(Error::Format { row: 4, .. })
        ));
    }

    #[test]
    fn real_formatting() {
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(-2.5), "-2.5");
        assert_eq!(format_real(0.1), "0.1");
        assert_eq!(format_real(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_real(123456.0), "123456");
        assert_eq!(format_real(1e-7), "1e-7");
        assert_eq!(format_real(1.5e20), "1.5e20");
        assert_eq!(format_real(0.00012), "0.00012");
        for v in [1.0 / 3.0, -7.123456789012345, 1e-7 / 3.0, 6.02e23] {
            let back: f64 = format_real(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 1e-11);
        }
    }

    #[test]
    fn write_refuses_empty_schema() {
        let ds = Dataset {
            series: vec![],
            split: None,
            channel_schema: vec![],
        };
        assert!(matches!(write_csv(&ds, Vec::new()), Err(Error::Format { .. })));
    }

    #[test]
    fn single_series_header() {
        let s = TimeSeries::new(
            5,
            vec![Channel::new("x", vec![1.0, 2.0]), Channel::new("y", vec![0.5, 0.25])],
            Some(Label::Normal),
        )
        .unwrap();
        let ds = Dataset::new(vec![s], vec!["x".into(), "y".into()], None).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "id,label,x_t0,x_t1,y_t0,y_t1\n5,0,1,2,0.5,0.25\n"
        );
    }
}
