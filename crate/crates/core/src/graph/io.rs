use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{GraphError, IdSpace, RawLink, TemporalGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub has_header: bool,
    pub id_space: IdSpace,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            id_space: IdSpace::Shared,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> GraphError {
    GraphError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn open_reader(path: &Path, has_header: bool) -> Result<csv::Reader<File>, GraphError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64, GraphError> {
    field.parse::<f64>().map_err(|_| GraphError::Parse {
        line,
        message: format!("{what} `{field}` is not a number"),
    })
}

fn parse_id(field: &str, line: u64, what: &str) -> Result<u64, GraphError> {
    if let Ok(v) = field.parse::<u64>() {
        return Ok(v);
    }
    // some exports write integral ids as floats
    match field.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 => Ok(v as u64),
        _ => Err(GraphError::Parse {
            line,
            message: format!("{what} `{field}` is not a nonnegative integer id"),
        }),
    }
}

fn parse_label(field: &str, line: u64) -> Result<Option<bool>, GraphError> {
    if field.is_empty() {
        return Ok(None);
    }
    match parse_f64(field, line, "label")? {
        v if v == 0.0 => Ok(Some(false)),
        v if v == 1.0 => Ok(Some(true)),
        v => Err(GraphError::Parse {
            line,
            message: format!("label {v} is not 0 or 1"),
        }),
    }
}

/// Reads `src,dst,timestamp,label,f1,...,fd` rows.
pub fn load_csv(path: impl AsRef<Path>, options: &LoadOptions) -> Result<TemporalGraph, GraphError> {
    let path = path.as_ref();
    let mut reader = open_reader(path, options.has_header)?;
    let mut rows = Vec::new();
    let mut width: Option<usize> = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 4 {
            return Err(GraphError::Parse {
                line,
                message: format!("expected at least 4 fields, found {}", record.len()),
            });
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(GraphError::Parse {
                    line,
                    message: format!("ragged row: {} fields, earlier rows have {w}", record.len()),
                })
            }
            _ => {}
        }
        let timestamp = parse_f64(&record[2], line, "timestamp")?;
        if !(timestamp >= 0.0) || !timestamp.is_finite() {
            return Err(GraphError::Validation(format!(
                "line {line}: timestamp {timestamp} must be a nonnegative number"
            )));
        }
        let features = record
            .iter()
            .skip(4)
            .map(|f| parse_f64(f, line, "feature"))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(RawLink {
            src: parse_id(&record[0], line, "src")?,
            dst: parse_id(&record[1], line, "dst")?,
            timestamp,
            label: parse_label(&record[3], line)?,
            features,
        });
    }
    TemporalGraph::from_raw(rows, options.id_space)
}

/// Reads `node,f1,...,fd` rows keyed by original node id.
pub fn load_node_features(path: impl AsRef<Path>, has_header: bool) -> Result<Vec<(u64, Vec<f64>)>, GraphError> {
    let path = path.as_ref();
    let mut reader = open_reader(path, has_header)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 2 {
            return Err(GraphError::Parse {
                line,
                message: "node feature row needs an id and at least one value".into(),
            });
        }
        let id = parse_id(&record[0], line, "node")?;
        let values = record
            .iter()
            .skip(1)
            .map(|f| parse_f64(f, line, "node feature"))
            .collect::<Result<Vec<_>, _>>()?;
        out.push((id, values));
    }
    Ok(out)
}

/// Writes rows in the format read by [`load_csv`], with a header.
pub fn write_csv(path: impl AsRef<Path>, rows: &[RawLink]) -> Result<(), GraphError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let dim = rows.first().map_or(0, |r| r.features.len());
    let mut header = String::from("src,dst,timestamp,label");
    for i in 1..=dim {
        header.push_str(&format!(",f{i}"));
    }
    writeln!(out, "{header}").map_err(|e| io_err(path, e))?;
    for r in rows {
        let label = match r.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        let mut line = format!("{},{},{},{}", r.src, r.dst, r.timestamp, label);
        for v in &r.features {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub fn write_node_features(path: impl AsRef<Path>, features: &[(u64, Vec<f64>)]) -> Result<(), GraphError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let dim = features.first().map_or(0, |(_, f)| f.len());
    let mut header = String::from("node");
    for i in 1..=dim {
        header.push_str(&format!(",f{i}"));
    }
    writeln!(out, "{header}").map_err(|e| io_err(path, e))?;
    for (id, values) in features {
        let mut line = id.to_string();
        for v in values {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_rows_two_features() {
        let f = write("src,dst,ts,label,a,b\n1,2,0.5,0,1.0,2.0\n2,3,1.5,1,3.0,4.0\n1,3,2.5,,5.0,6.0\n");
        let g = load_csv(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.feature_dim(), 2);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.link(1).label, Some(true));
        assert_eq!(g.link(2).label, None);
    }

    #[test]
    fn rows_out_of_time_order_are_sorted() {
        let f = write("1,2,3.0,0,0.1\n2,3,1.0,0,0.2\n3,4,2.0,0,0.3\n");
        let opts = LoadOptions {
            has_header: false,
            ..LoadOptions::default()
        };
        let g = load_csv(f.path(), &opts).unwrap();
        let ts: Vec<f64> = g.links().iter().map(|l| l.timestamp).collect();
        assert_eq!(ts, vec![1.0, 2.0, 3.0]);
        assert_eq!(g.link(0).features, vec![0.2]);
    }

    #[test]
    fn ragged_row_reports_line_number() {
        let f = write("src,dst,ts,label,a,b\n1,2,0.5,0,1.0,2.0\n2,3,1.5,1,3.0\n");
        match load_csv(f.path(), &LoadOptions::default()).unwrap_err() {
            GraphError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_timestamp_is_a_validation_error() {
        let f = write("src,dst,ts,label,a\n1,2,-0.5,0,1.0\n");
        assert!(matches!(
            load_csv(f.path(), &LoadOptions::default()),
            Err(GraphError::Validation(_))
        ));
    }

    #[test]
    fn written_csv_loads_back_identically() {
        let rows = vec![
            RawLink { src: 0, dst: 7, timestamp: 0.1 + 0.2, label: Some(true), features: vec![1.0 / 3.0, -2e-17] },
            RawLink { src: 7, dst: 3, timestamp: 4.0, label: None, features: vec![0.0, 1e300] },
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(f.path(), &rows).unwrap();
        let g = load_csv(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(g.to_raw(), rows);
    }
}
