use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::{LossRecord, TrainingError, TrainingResult};

pub const LOSS_LOG_HEADER: &str = "step,d_loss_A,d_loss_B,g_adv_loss_A,g_adv_loss_B,cyclic_loss_A,cyclic_loss_B";

/// Append-only CSV loss log, flushed after every row.
#[derive(Debug)]
pub struct LossLogWriter {
    path: PathBuf,
    file: File,
}

impl LossLogWriter {
    /// Opens `path` for appending and writes the header if the file is new
    /// or empty.
    pub fn append(path: &Path) -> TrainingResult<Self> {
        let io = |source| TrainingError::Io { path: path.to_path_buf(), source };
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if fresh {
            writeln!(file, "{LOSS_LOG_HEADER}").map_err(io)?;
        }
        Ok(Self { path: path.to_path_buf(), file })
    }

    pub fn write(&mut self, r: &LossRecord) -> TrainingResult<()> {
        let mut line = r.step.to_string();
        for (_, v) in r.values() {
            line.push(',');
            line.push_str(&format!("{v:?}"));
        }
        writeln!(self.file, "{line}")
            .and_then(|_| self.file.flush())
            .map_err(|source| TrainingError::Io { path: self.path.clone(), source })
    }
}

/// Parses a loss log written by [`LossLogWriter`].
pub fn read_loss_log(path: &Path) -> TrainingResult<Vec<LossRecord>> {
    let file = File::open(path).map_err(|source| TrainingError::Io { path: path.to_path_buf(), source })?;
    let bad = |line: usize, detail: String| TrainingError::LossLog { path: path.to_path_buf(), line, detail };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| TrainingError::Io { path: path.to_path_buf(), source })?;
        if i == 0 {
            if line != LOSS_LOG_HEADER {
                return Err(bad(1, format!("unexpected header {line:?}")));
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(bad(i + 1, format!("{} columns, expected 7", cols.len())));
        }
        let step = cols[0].parse().map_err(|e| bad(i + 1, format!("step: {e}")))?;
        let mut v = [0.0; 6];
        for (slot, c) in v.iter_mut().zip(&cols[1..]) {
            *slot = c.parse().map_err(|e| bad(i + 1, format!("{c:?}: {e}")))?;
        }
        out.push(LossRecord {
            step,
            d_loss_a: v[0],
            d_loss_b: v[1],
            g_adv_loss_a: v[2],
            g_adv_loss_b: v[3],
            cyclic_loss_a: v[4],
            cyclic_loss_b: v[5],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: u64) -> LossRecord {
        LossRecord {
            step,
            d_loss_a: 0.1 * step as f64,
            d_loss_b: 1.0 / 3.0,
            g_adv_loss_a: 2.5,
            g_adv_loss_b: 1e-9,
            cyclic_loss_a: 0.0,
            cyclic_loss_b: 7.25,
        }
    }

    #[test]
    fn appending_round_trips_with_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loss.csv");
        let mut w = LossLogWriter::append(&p).unwrap();
        w.write(&record(1)).unwrap();
        drop(w);
        let mut w = LossLogWriter::append(&p).unwrap();
        w.write(&record(2)).unwrap();
        assert_eq!(read_loss_log(&p).unwrap(), vec![record(1), record(2)]);
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.matches("step,").count(), 1);
    }
}
