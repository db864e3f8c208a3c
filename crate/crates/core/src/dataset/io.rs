use super::{DatasetError, DatasetSummary, Frame, GestureKind, GestureSample, CHANNELS};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const MANIFEST: &str = "manifest.csv";

/// One line of `manifest.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub sample_id: String,
    pub kind: GestureKind,
    pub class_id: u32,
    pub user_id: u32,
    pub session_id: u32,
    pub n_frames: usize,
    pub file: String,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(file: &Path, line: usize, e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Parse {
        file: file.display().to_string(),
        line,
        message: e.to_string(),
    }
}

fn sample_header() -> Vec<String> {
    let mut header = Vec::with_capacity(CHANNELS + 1);
    header.push("t".to_string());
    header.extend((1..=22).map(|i| format!("g{i}")));
    header.extend((1..=6).map(|i| format!("l{i}")));
    header
}

/// Reads a per-sample CSV (`t,g1..g22,l1..l6`).
pub fn read_sample_csv(path: &Path) -> Result<Vec<Frame>, DatasetError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers().map_err(|e| csv_err(path, 1, e))?.clone();
    if header.len() != CHANNELS + 1 {
        return Err(DatasetError::Schema {
            file: path.display().to_string(),
            expected: CHANNELS,
            found: header.len().saturating_sub(1),
        });
    }
    let mut frames = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            csv_err(path, line, e)
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != CHANNELS + 1 {
            return Err(DatasetError::Schema {
                file: format!("{}:{line}", path.display()),
                expected: CHANNELS,
                found: record.len().saturating_sub(1),
            });
        }
        let mut values = [0.0; CHANNELS + 1];
        for (slot, field) in values.iter_mut().zip(record.iter()) {
            *slot = field
                .parse::<f64>()
                .map_err(|e| csv_err(path, line, format!("{field:?}: {e}")))?;
        }
        let mut channels = [0.0; CHANNELS];
        channels.copy_from_slice(&values[1..]);
        frames.push(Frame::new(values[0], channels));
    }
    Ok(frames)
}

pub fn write_sample_csv(path: &Path, frames: &[Frame]) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut writer = csv::Writer::from_writer(file);
    let to_err = |e: csv::Error| csv_err(path, 0, e);
    writer.write_record(sample_header()).map_err(to_err)?;
    for f in frames {
        let mut row = Vec::with_capacity(CHANNELS + 1);
        row.push(f.t.to_string());
        row.extend(f.channels.iter().map(|v| v.to_string()));
        writer.write_record(&row).map_err(to_err)?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

/// Loads every sample listed in `<dir>/manifest.csv`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<GestureSample>, DatasetError> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.is_file() {
        return Err(DatasetError::NoManifest(dir.display().to_string()));
    }
    let file = std::fs::File::open(&manifest_path).map_err(io_err(&manifest_path))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut samples = Vec::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            csv_err(&manifest_path, line, e)
        })?;
        let sample_path: PathBuf = dir.join(&row.file);
        let frames = read_sample_csv(&sample_path)?;
        if frames.len() != row.n_frames {
            return Err(csv_err(
                &sample_path,
                frames.len() + 1,
                format!(
                    "manifest says {} frames for {}, file has {}",
                    row.n_frames,
                    row.sample_id,
                    frames.len()
                ),
            ));
        }
        let sample = GestureSample {
            sample_id: row.sample_id,
            kind: row.kind,
            class_id: row.class_id,
            user_id: row.user_id,
            session_id: row.session_id,
            frames,
        };
        sample.validate()?;
        samples.push(sample);
    }
    tracing::info!(dir = %dir.display(), "loaded dataset: {}", DatasetSummary::of(&samples));
    Ok(samples)
}

/// Writes samples as `manifest.csv` plus one CSV per sample under `samples/`.
pub fn write_dataset(dir: impl AsRef<Path>, samples: &[GestureSample]) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    let sample_dir = dir.join("samples");
    std::fs::create_dir_all(&sample_dir).map_err(io_err(&sample_dir))?;
    let manifest_path = dir.join(MANIFEST);
    let file = std::fs::File::create(&manifest_path).map_err(io_err(&manifest_path))?;
    let mut writer = csv::Writer::from_writer(file);
    for s in samples {
        let rel = format!("samples/{}.csv", s.sample_id);
        write_sample_csv(&dir.join(&rel), &s.frames)?;
        writer
            .serialize(ManifestRow {
                sample_id: s.sample_id.clone(),
                kind: s.kind,
                class_id: s.class_id,
                user_id: s.user_id,
                session_id: s.session_id,
                n_frames: s.frames.len(),
                file: rel,
            })
            .map_err(|e| csv_err(&manifest_path, 0, e))?;
    }
    writer.flush().map_err(io_err(&manifest_path))?;
    Ok(())
}
