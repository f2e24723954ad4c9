//! On-disk dataset directory layout (all little-endian):
//!
//! - `features.bin`: magic `ZSLF`, u32 n, u32 d, then n*d f32 row-major
//! - `labels.u32`: n little-endian u32 class indices
//! - `prototypes.bin`: magic `ZSLP`, u32 s+u, u32 k, then f32 row-major
//! - `seen_classes.txt`, `unseen_classes.txt`: one decimal index per line
//! - `splits.json`: arrays `seen_train`, `seen_heldout`, `unseen_test`

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::dataset::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::num::Matrix;

const FEATURES_MAGIC: &[u8; 4] = b"ZSLF";
const PROTOS_MAGIC: &[u8; 4] = b"ZSLP";

pub const FEATURES_FILE: &str = "features.bin";
pub const LABELS_FILE: &str = "labels.u32";
pub const PROTOTYPES_FILE: &str = "prototypes.bin";
pub const SEEN_CLASSES_FILE: &str = "seen_classes.txt";
pub const UNSEEN_CLASSES_FILE: &str = "unseen_classes.txt";
pub const SPLITS_FILE: &str = "splits.json";

fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.is_file() {
        return Err(Error::MissingFile { path: path.to_path_buf() });
    }
    Ok(fs::read(path)?)
}

fn read_matrix_bin(path: &Path, magic: &'static [u8; 4]) -> Result<Matrix> {
    let bytes = read_file(path)?;
    if bytes.len() < 12 || &bytes[..4] != magic {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            expected: std::str::from_utf8(magic).unwrap(),
        });
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + rows * cols * 4;
    if bytes.len() != expected {
        return Err(Error::DimensionMismatch {
            path: path.to_path_buf(),
            reason: format!(
                "header says {rows}x{cols} ({expected} bytes) but file has {} bytes",
                bytes.len()
            ),
        });
    }
    let data: Vec<f64> = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Matrix::from_vec(rows, cols, data)
}

fn write_matrix_bin(path: &Path, magic: &[u8; 4], m: &Matrix) -> Result<()> {
    let mut out = Vec::with_capacity(12 + m.len() * 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

fn read_class_list(path: &Path) -> Result<Vec<usize>> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::InvalidInput {
        context: "class list",
        reason: format!("{}: {e}", path.display()),
    })?;
    let mut classes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let c: usize = line.parse().map_err(|e| Error::InvalidInput {
            context: "class list",
            reason: format!("{} line {}: {e}", path.display(), lineno + 1),
        })?;
        classes.push(c);
    }
    Ok(classes)
}

/// Load a dataset directory, validating all invariants. Row order is as on
/// disk.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let visual = read_matrix_bin(&dir.join(FEATURES_FILE), FEATURES_MAGIC)?;

    let labels_path = dir.join(LABELS_FILE);
    let label_bytes = read_file(&labels_path)?;
    if label_bytes.len() != visual.rows() * 4 {
        return Err(Error::DimensionMismatch {
            path: labels_path,
            reason: format!(
                "expected {} u32 labels ({} bytes), file has {} bytes",
                visual.rows(),
                visual.rows() * 4,
                label_bytes.len()
            ),
        });
    }
    let labels: Vec<usize> = label_bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();

    let prototypes = read_matrix_bin(&dir.join(PROTOTYPES_FILE), PROTOS_MAGIC)?;
    let seen_classes = read_class_list(&dir.join(SEEN_CLASSES_FILE))?;
    let unseen_classes = read_class_list(&dir.join(UNSEEN_CLASSES_FILE))?;

    let splits_path = dir.join(SPLITS_FILE);
    let splits_bytes = read_file(&splits_path)?;
    let splits: Splits = serde_json::from_slice(&splits_bytes)?;

    Dataset::new(visual, labels, prototypes, seen_classes, unseen_classes, splits)
}

/// Write a dataset directory in the documented layout. Features and
/// prototypes are stored as f32; values already representable in f32 (as
/// produced by synthesis or a previous load) round-trip bit-exactly.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_bin(&dir.join(FEATURES_FILE), FEATURES_MAGIC, ds.visual())?;

    let mut label_bytes = Vec::with_capacity(ds.labels().len() * 4);
    for &y in ds.labels() {
        label_bytes.extend_from_slice(&(y as u32).to_le_bytes());
    }
    fs::write(dir.join(LABELS_FILE), label_bytes)?;

    write_matrix_bin(&dir.join(PROTOTYPES_FILE), PROTOS_MAGIC, ds.prototypes())?;

    let write_classes = |path: PathBuf, classes: &[usize]| -> Result<()> {
        let mut f = fs::File::create(path)?;
        for &c in classes {
            writeln!(f, "{c}")?;
        }
        Ok(())
    };
    write_classes(dir.join(SEEN_CLASSES_FILE), ds.seen_classes())?;
    write_classes(dir.join(UNSEEN_CLASSES_FILE), ds.unseen_classes())?;

    let splits_json = serde_json::to_vec_pretty(ds.splits())?;
    fs::write(dir.join(SPLITS_FILE), splits_json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::Splits;

    fn toy_dataset() -> Dataset {
        let visual = Matrix::from_rows(&[&[0.5, 1.0], &[1.5, 2.0], &[5.0, 5.5], &[6.0, 6.5]]);
        Dataset::new(
            visual,
            vec![0, 0, 1, 1],
            Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]),
            vec![0],
            vec![1],
            Splits {
                seen_train: vec![0],
                seen_heldout: vec![1],
                unseen_test: vec![2, 3],
            },
        )
        .unwrap()
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset();
        save_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded, ds);
        assert_eq!(loaded.n_rows(), 4);
        assert_eq!(loaded.n_seen(), 1);
        assert_eq!(loaded.n_unseen(), 1);
    }

    #[test]
    fn saved_files_are_byte_stable() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let ds = toy_dataset();
        save_dataset(&ds, dir_a.path()).unwrap();
        save_dataset(&ds, dir_b.path()).unwrap();
        for name in [FEATURES_FILE, LABELS_FILE, PROTOTYPES_FILE, SPLITS_FILE] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between saves");
        }
    }

    #[test]
    fn truncated_features_payload_is_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset();
        save_dataset(&ds, dir.path()).unwrap();
        // Append one extra f32 so the payload holds n*d + 1 values.
        let path = dir.path().join(FEATURES_FILE);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn class_in_both_lists_is_split_overlap() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset();
        save_dataset(&ds, dir.path()).unwrap();
        std::fs::write(dir.path().join(UNSEEN_CLASSES_FILE), "0\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::SplitOverlap { .. })
        ));
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset();
        save_dataset(&ds, dir.path()).unwrap();
        std::fs::remove_file(dir.path().join(LABELS_FILE)).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::MissingFile { .. })
        ));
    }

    #[test]
    fn bad_magic_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset();
        save_dataset(&ds, dir.path()).unwrap();
        let path = dir.path().join(FEATURES_FILE);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn unknown_label_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset();
        save_dataset(&ds, dir.path()).unwrap();
        let path = dir.path().join(LABELS_FILE);
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0..4].copy_from_slice(&9u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::UnknownClass { .. })
        ));
    }
}
