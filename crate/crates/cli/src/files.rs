use anyhow::{bail, Context, Result};
use gesture_core::api::OutputFile;
use std::path::Path;

/// Motion masks are a one-column CSV: a `motion` header, then 0/1 per frame.
pub fn read_mask(path: &Path) -> Result<Vec<bool>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut mask = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let v = line.trim();
        if v.is_empty() || (i == 0 && v.eq_ignore_ascii_case("motion")) {
            continue;
        }
        mask.push(match v {
            "1" | "true" => true,
            "0" | "false" => false,
            other => bail!("{}:{}: expected 0 or 1, got {other:?}", path.display(), i + 1),
        });
    }
    Ok(mask)
}

pub fn write_mask(path: &Path, mask: &[bool]) -> Result<()> {
    let mut text = String::with_capacity(mask.len() * 2 + 8);
    text.push_str("motion\n");
    for &m in mask {
        text.push_str(if m { "1\n" } else { "0\n" });
    }
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for f in files {
        // Names come from the server; never let one escape the directory.
        if f.name.contains(['/', '\\']) || f.name.starts_with('.') {
            bail!("refusing output file name {:?}", f.name);
        }
        write_text(&dir.join(&f.name), &f.contents)?;
    }
    Ok(())
}

/// CSV text produced by one of the core writers.
pub fn csv_string<E>(write: impl FnOnce(&mut Vec<u8>) -> std::result::Result<(), E>) -> Result<String>
where
    E: std::error::Error + Send + Sync + 'static,
{
    let mut buf = Vec::new();
    write(&mut buf).context("formatting CSV")?;
    Ok(String::from_utf8(buf)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mask = vec![false, true, true, false, true];
        write_mask(&path, &mask).unwrap();
        assert_eq!(read_mask(&path).unwrap(), mask);
    }

    #[test]
    fn mask_reader_takes_bare_bits_and_rejects_junk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "1\n0\n\ntrue\n").unwrap();
        assert_eq!(read_mask(&path).unwrap(), vec![true, false, true]);
        std::fs::write(&path, "motion\n1\n2\n").unwrap();
        assert!(read_mask(&path).is_err());
    }

    #[test]
    fn output_names_stay_inside_the_directory() {
        let dir = tempfile::tempdir().unwrap();
        for bad in ["../x.csv", "a/b.csv", ".hidden"] {
            assert!(write_outputs(dir.path(), &[OutputFile::new(bad, "")]).is_err(), "{bad}");
        }
        write_outputs(dir.path(), &[OutputFile::new("ok.csv", "a\n")]).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("ok.csv")).unwrap(), "a\n");
    }
}
