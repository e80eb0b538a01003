//! JSON Lines persistence: one record per line, so retaining a case is a
//! single append.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Case, CaseBank, MemoryError};

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Drop an unparseable final line that lacks its newline (an interrupted
    /// append) instead of failing. The drop is reported either way.
    pub tolerate_partial_tail: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub records: usize,
    /// 1-based line number of a dropped partial trailing line.
    pub dropped_partial_line: Option<usize>,
}

pub fn write_record<T: Serialize, W: Write>(mut sink: W, record: &T) -> Result<(), MemoryError> {
    let line = serde_json::to_string(record).map_err(|e| MemoryError::Encode(e.to_string()))?;
    sink.write_all(line.as_bytes())?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn read_records<T: DeserializeOwned, R: Read>(source: R, opts: LoadOptions) -> Result<(Vec<T>, LoadReport), MemoryError> {
    let mut reader = BufReader::new(source);
    let mut records = Vec::new();
    let mut report = LoadReport::default();
    let mut line = String::new();
    let mut lineno = 0usize;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        lineno += 1;
        let complete = line.ends_with('\n');
        let text = line.trim_end_matches(['\n', '\r']);
        if text.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(text) {
            Ok(rec) => records.push(rec),
            Err(_) if !complete && opts.tolerate_partial_tail => {
                report.dropped_partial_line = Some(lineno);
            }
            Err(e) => return Err(MemoryError::Malformed { line: lineno, message: e.to_string() }),
        }
    }
    report.records = records.len();
    Ok((records, report))
}

/// Writes every case, one per line, in bank order.
pub fn save_bank<W: Write>(bank: &CaseBank, mut sink: W) -> Result<(), MemoryError> {
    for case in bank {
        write_record(&mut sink, case)?;
    }
    sink.flush()?;
    Ok(())
}

/// Reads a bank, checking id uniqueness and sequence order.
pub fn load_bank<R: Read>(source: R, opts: LoadOptions) -> Result<(CaseBank, LoadReport), MemoryError> {
    let (cases, report) = read_records::<Case, _>(source, opts)?;
    Ok((CaseBank::from_stored(cases)?, report))
}

pub fn save_bank_file(bank: &CaseBank, path: &Path) -> Result<(), MemoryError> {
    let file = File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    save_bank(bank, &mut w)?;
    w.into_inner().map_err(|e| MemoryError::Io(e.into_error()))?.sync_all()?;
    Ok(())
}

/// Loads a bank file; a missing file is an empty bank.
pub fn load_bank_file(path: &Path, opts: LoadOptions) -> Result<(CaseBank, LoadReport), MemoryError> {
    match File::open(path) {
        Ok(f) => load_bank(f, opts),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok((CaseBank::new(), LoadReport::default())),
        Err(e) => Err(e.into()),
    }
}

/// A bank mirrored to a JSON Lines file: each retain appends one line.
#[derive(Debug)]
pub struct PersistentBank {
    bank: CaseBank,
    path: PathBuf,
}

impl PersistentBank {
    pub fn open(path: impl Into<PathBuf>, opts: LoadOptions) -> Result<(Self, LoadReport), MemoryError> {
        let path = path.into();
        let (bank, report) = load_bank_file(&path, opts)?;
        if report.dropped_partial_line.is_some() {
            // Rewrite so the next append does not land on the torn line.
            save_bank_file(&bank, &path)?;
        }
        Ok((PersistentBank { bank, path }, report))
    }

    pub fn retain(&mut self, case: Case) -> Result<&Case, MemoryError> {
        let stored = self.bank.retain(case)?.clone();
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        write_record(&mut file, &stored)?;
        file.sync_data()?;
        Ok(self.bank.cases().last().expect("just retained"))
    }

    pub fn bank(&self) -> &CaseBank {
        &self.bank
    }

    pub fn into_bank(self) -> CaseBank {
        self.bank
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank(n: usize) -> CaseBank {
        let mut b = CaseBank::new();
        for i in 0..n {
            b.retain(Case::new(format!("c{i}"), format!("state {i}"), "act", i as f64 * 0.1)).unwrap();
        }
        b
    }

    #[test]
    fn empty_round_trip() {
        let mut buf = Vec::new();
        save_bank(&CaseBank::new(), &mut buf).unwrap();
        let (b, _) = load_bank(buf.as_slice(), LoadOptions::default()).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn corrupted_middle_line_names_it() {
        let mut buf = Vec::new();
        save_bank(&bank(3), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[1] = "{not json";
        let broken = lines.join("\n") + "\n";
        match load_bank(broken.as_bytes(), LoadOptions { tolerate_partial_tail: true }) {
            Err(MemoryError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn partial_tail_is_flagged() {
        let mut buf = Vec::new();
        save_bank(&bank(2), &mut buf).unwrap();
        buf.extend_from_slice(br#"{"case_id":"c2","sta"#);
        assert!(matches!(
            load_bank(buf.as_slice(), LoadOptions::default()),
            Err(MemoryError::Malformed { line: 3, .. })
        ));
        let (b, report) = load_bank(buf.as_slice(), LoadOptions { tolerate_partial_tail: true }).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(report.dropped_partial_line, Some(3));
    }

    #[test]
    fn duplicate_ids_rejected_on_load() {
        let c = Case { created_seq: 0, ..Case::new("dup", "s", "a", 1.0) };
        let d = Case { created_seq: 1, ..c.clone() };
        let mut buf = Vec::new();
        write_record(&mut buf, &c).unwrap();
        write_record(&mut buf, &d).unwrap();
        assert!(matches!(load_bank(buf.as_slice(), LoadOptions::default()), Err(MemoryError::Conflict(_))));
    }

    #[test]
    fn persistent_bank_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.jsonl");
        {
            let (mut pb, _) = PersistentBank::open(&path, LoadOptions::default()).unwrap();
            pb.retain(Case::new("a", "s", "x", 1.0)).unwrap();
            pb.retain(Case::new("b", "s", "y", 0.0)).unwrap();
        }
        let (pb, _) = PersistentBank::open(&path, LoadOptions::default()).unwrap();
        assert_eq!(pb.bank().len(), 2);
        assert_eq!(pb.bank().cases()[1].created_seq, 1);
    }
}
