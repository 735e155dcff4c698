//! Stream ingestion: newline-delimited records, either comma-separated
//! `t,x,y,w` or a JSON object per line with keys `t`/`x`/`y`/`w`.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use surge_core::model::SpatialObject;
use thiserror::Error;

/// One input record; `t` must be nondecreasing across a file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub w: f64,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: timestamp {t} regresses below {prev}")]
    OutOfOrder { line: usize, t: f64, prev: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses one record; empty input is the caller's concern.
pub fn parse_record(s: &str) -> Result<StreamRecord, String> {
    let s = s.trim();
    let rec: StreamRecord = if s.starts_with('{') {
        serde_json::from_str(s).map_err(|e| e.to_string())?
    } else {
        let fields: Vec<&str> = s.split(',').collect();
        if fields.len() != 4 {
            return Err(format!("expected 4 comma-separated fields, got {}", fields.len()));
        }
        let mut vals = [0.0f64; 4];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f
                .trim()
                .parse()
                .map_err(|e| format!("field {}: {e}", i + 1))?;
        }
        StreamRecord { t: vals[0], x: vals[1], y: vals[2], w: vals[3] }
    };
    if !(rec.t.is_finite() && rec.x.is_finite() && rec.y.is_finite() && rec.w.is_finite()) {
        return Err("non-finite value".into());
    }
    if rec.w < 0.0 {
        return Err(format!("negative weight {}", rec.w));
    }
    Ok(rec)
}

/// Iterator over a record stream, assigning ids sequentially and rejecting
/// timestamp regressions.
pub struct StreamReader<R: BufRead> {
    inner: R,
    line: usize,
    next_id: u64,
    prev_t: f64,
    buf: String,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(inner: R) -> Self {
        StreamReader { inner, line: 0, next_id: 0, prev_t: f64::NEG_INFINITY, buf: String::new() }
    }

    /// Number of objects yielded so far.
    pub fn count(&self) -> u64 {
        self.next_id
    }
}

impl<R: BufRead> Iterator for StreamReader<R> {
    type Item = Result<SpatialObject, ParseError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line += 1;
            if self.buf.trim().is_empty() {
                continue;
            }
            let rec = match parse_record(&self.buf) {
                Ok(r) => r,
                Err(msg) => return Some(Err(ParseError::Malformed { line: self.line, msg })),
            };
            if rec.t < self.prev_t {
                return Some(Err(ParseError::OutOfOrder {
                    line: self.line,
                    t: rec.t,
                    prev: self.prev_t,
                }));
            }
            self.prev_t = rec.t;
            let id = self.next_id;
            self.next_id += 1;
            return Some(Ok(SpatialObject { id, w: rec.w, x: rec.x, y: rec.y, t_c: rec.t }));
        }
    }
}

/// Reads a whole stream into memory.
pub fn read_all<R: BufRead>(inner: R) -> Result<Vec<SpatialObject>, ParseError> {
    StreamReader::new(inner).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn csv_record() {
        let r = parse_record("10,2,3,1").unwrap();
        assert_eq!(r, StreamRecord { t: 10.0, x: 2.0, y: 3.0, w: 1.0 });
    }

    #[test]
    fn json_record() {
        let r = parse_record(r#"{"t":10,"x":2,"y":3,"w":1}"#).unwrap();
        assert_eq!(r, StreamRecord { t: 10.0, x: 2.0, y: 3.0, w: 1.0 });
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let input = "1,0,0,1\n10,2,3\n";
        let err = read_all(Cursor::new(input)).unwrap_err();
        match err {
            ParseError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn timestamp_regression_is_rejected() {
        let input = "5,0,0,1\n4,0,0,1\n";
        let err = read_all(Cursor::new(input)).unwrap_err();
        assert!(matches!(err, ParseError::OutOfOrder { line: 2, .. }));
    }

    #[test]
    fn ids_assigned_in_order_and_blank_lines_skipped() {
        let input = "1,0,0,1\n\n2,1,1,2\n";
        let objs = read_all(Cursor::new(input)).unwrap();
        assert_eq!(objs.len(), 2);
        assert_eq!(objs[0].id, 0);
        assert_eq!(objs[1].id, 1);
        assert_eq!(objs[1].w, 2.0);
    }

    #[test]
    fn mixed_encodings_in_one_file() {
        let input = "1,0,0,1\n{\"t\":2,\"x\":1,\"y\":1,\"w\":3}\n";
        let objs = read_all(Cursor::new(input)).unwrap();
        assert_eq!(objs.len(), 2);
        assert_eq!(objs[1].w, 3.0);
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(parse_record("1,0,0,-2").is_err());
    }
}
