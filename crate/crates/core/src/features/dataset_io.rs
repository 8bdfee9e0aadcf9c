//! Dataset CSV: header `device,session,label,t,f0..f{F-1}`, one row per time
//! step, sessions stored contiguously with `t = 0..T-1`.

use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureError, SessionMatrix};
use crate::nncore::Tensor2;

const META_COLUMNS: [&str; 4] = ["device", "session", "label", "t"];

fn io_err(e: impl std::fmt::Display) -> FeatureError {
    FeatureError::Io(e.to_string())
}

pub fn write_dataset<W: Write>(w: W, data: &[SessionMatrix], feature_count: usize) -> Result<(), FeatureError> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let mut header: Vec<String> = META_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..feature_count).map(|f| format!("f{f}")));
    wtr.write_record(&header).map_err(io_err)?;
    for m in data {
        if m.feature_count() != feature_count {
            return Err(FeatureError::SchemaMismatch(format!(
                "session {}/{} has {} features, expected {feature_count}",
                m.device_name,
                m.session_id,
                m.feature_count()
            )));
        }
        for t in 0..m.seq_len() {
            let mut rec = vec![
                m.device_name.clone(),
                m.session_id.clone(),
                m.label.to_string(),
                t.to_string(),
            ];
            // shortest round-trip representation, lossless for f64
            rec.extend(m.values.row(t).iter().map(|v| v.to_string()));
            wtr.write_record(&rec).map_err(io_err)?;
        }
    }
    wtr.flush().map_err(io_err)?;
    Ok(())
}

pub fn save_dataset(path: &Path, data: &[SessionMatrix], feature_count: usize) -> Result<(), FeatureError> {
    let f = std::fs::File::create(path).map_err(|e| FeatureError::Io(format!("{}: {e}", path.display())))?;
    write_dataset(std::io::BufWriter::new(f), data, feature_count)
}

/// Read a dataset. Returns the sessions and the feature count from the
/// header. With `expected_features = Some(F)`, a header of a different width
/// is a schema mismatch.
pub fn read_dataset<R: Read>(
    r: R,
    expected_features: Option<usize>,
) -> Result<(Vec<SessionMatrix>, usize), FeatureError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header = rdr.headers().map_err(io_err)?.clone();
    if header.len() < META_COLUMNS.len() || META_COLUMNS.iter().zip(header.iter()).any(|(a, b)| *a != b) {
        return Err(FeatureError::SchemaMismatch(
            "header must start with device,session,label,t".into(),
        ));
    }
    let features = header.len() - META_COLUMNS.len();
    for (f, name) in header.iter().skip(META_COLUMNS.len()).enumerate() {
        if name != format!("f{f}") {
            return Err(FeatureError::SchemaMismatch(format!("unexpected column {name:?}")));
        }
    }
    if let Some(want) = expected_features {
        if want != features {
            return Err(FeatureError::SchemaMismatch(format!(
                "file has {features} feature columns, manifest expects {want}"
            )));
        }
    }

    let mut out: Vec<SessionMatrix> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut current: Option<(String, String, usize)> = None;
    let mut seq_len: Option<usize> = None;

    let mut finish = |key: (String, String, usize), rows: &mut Vec<Vec<f64>>, out: &mut Vec<SessionMatrix>| {
        match seq_len {
            None => seq_len = Some(rows.len()),
            Some(t) if t != rows.len() => {
                return Err(FeatureError::SchemaMismatch(format!(
                    "session {}/{} has {} rows, others have {t}",
                    key.0,
                    key.1,
                    rows.len()
                )))
            }
            _ => {}
        }
        out.push(SessionMatrix {
            values: Tensor2::from_rows(rows).map_err(|e| FeatureError::SchemaMismatch(e.to_string()))?,
            label: key.2,
            device_name: key.0,
            session_id: key.1,
        });
        rows.clear();
        Ok(())
    };

    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        let line = line + 2;
        if rec.len() != header.len() {
            return Err(FeatureError::SchemaMismatch(format!(
                "line {line}: {} columns, header has {}",
                rec.len(),
                header.len()
            )));
        }
        let parse_usize = |i: usize| {
            rec[i].parse::<usize>().map_err(|_| {
                FeatureError::SchemaMismatch(format!("line {line}: bad {} {:?}", META_COLUMNS[i], &rec[i]))
            })
        };
        let key = (rec[0].to_string(), rec[1].to_string(), parse_usize(2)?);
        let t = parse_usize(3)?;
        let values = rec
            .iter()
            .skip(META_COLUMNS.len())
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| FeatureError::SchemaMismatch(format!("line {line}: bad value {v:?}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;

        if t == 0 {
            if let Some(prev) = current.take() {
                finish(prev, &mut rows, &mut out)?;
            }
            current = Some(key);
        } else {
            match &current {
                Some(c) if *c == key && t == rows.len() => {}
                _ => {
                    return Err(FeatureError::SchemaMismatch(format!(
                        "line {line}: time step {t} out of sequence"
                    )))
                }
            }
        }
        rows.push(values);
    }
    if let Some(prev) = current.take() {
        finish(prev, &mut rows, &mut out)?;
    }
    Ok((out, features))
}

pub fn load_dataset(
    path: &Path,
    expected_features: Option<usize>,
) -> Result<(Vec<SessionMatrix>, usize), FeatureError> {
    let f = std::fs::File::open(path).map_err(|e| FeatureError::Io(format!("{}: {e}", path.display())))?;
    read_dataset(std::io::BufReader::new(f), expected_features)
}
