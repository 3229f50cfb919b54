//! Datasets: the 1-d toy regression task and an IDX (MNIST) reader.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::Dataset;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Points `(x, y)` of a 1-d regression problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub points: Vec<(f64, f64)>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            points: vec![(-1.0, 0.2), (-0.5, -0.4), (0.5, 0.6), (1.0, -0.3)],
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidData("synthetic spec has no points".into()));
        }
        for (i, (x, y)) in self.points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::InvalidData(format!("point {i} is not finite")));
            }
            if self.points[..i].iter().any(|(x2, _)| x2 == x) {
                return Err(Error::InvalidData(format!("duplicate x = {x}")));
            }
        }
        Ok(())
    }
}

pub fn synthetic_1d(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.points.len();
    let x = Matrix::from_vec(n, 1, spec.points.iter().map(|p| p.0).collect());
    let y = Matrix::from_vec(n, 1, spec.points.iter().map(|p| p.1).collect());
    Dataset::new(x, y)
}

/// Writes `x_1, ..., x_d, y_1, ..., y_k` per sample with a header row.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let header: Vec<String> = (1..=data.input_dim())
        .map(|j| format!("x{j}"))
        .chain((1..=data.output_dim()).map(|j| format!("y{j}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..data.len() {
        let row: Vec<String> = data
            .x()
            .row(i)
            .iter()
            .chain(data.y().row(i))
            .map(|v| crate::experiment::fmt_f64(*v))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a file, transparently inflating it when it starts with the gzip magic.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::Format {
                kind: "gzip",
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Idx {
    dims: Vec<usize>,
    payload: Vec<u8>,
}

fn parse_idx(path: &Path, expected_magic: u32) -> Result<Idx> {
    let bytes = read_maybe_gz(path)?;
    let bad = |reason: String| Error::Format {
        kind: "IDX",
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 4 {
        return Err(bad("truncated header".into()));
    }
    let magic = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    if magic != expected_magic {
        return Err(bad(format!(
            "magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )));
    }
    let ndim = (magic & 0xff) as usize;
    let header = 4 + 4 * ndim;
    if bytes.len() < header {
        return Err(bad("truncated dimension list".into()));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let len: usize = dims.iter().product();
    if bytes.len() - header < len {
        return Err(bad(format!(
            "payload has {} bytes, dimensions need {len}",
            bytes.len() - header
        )));
    }
    Ok(Idx {
        dims,
        payload: bytes[header..header + len].to_vec(),
    })
}

/// Loads the first `limit` samples of an IDX image/label pair (plain or gzip).
///
/// Pixels are divided by 255 and labels become one-hot rows of width 10.
/// A `limit` beyond the file size takes every sample.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>, limit: usize) -> Result<Dataset> {
    let (images, labels) = (images.as_ref(), labels.as_ref());
    if limit == 0 {
        return Err(Error::InvalidData("limit 0 gives an empty dataset".into()));
    }
    let img = parse_idx(images, IDX_IMAGES_MAGIC)?;
    let lab = parse_idx(labels, IDX_LABELS_MAGIC)?;
    if img.dims[0] != lab.dims[0] {
        return Err(Error::Format {
            kind: "IDX",
            path: labels.to_path_buf(),
            reason: format!("{} labels for {} images", lab.dims[0], img.dims[0]),
        });
    }
    let n = img.dims[0].min(limit);
    if n == 0 {
        return Err(Error::InvalidData("IDX files contain no samples".into()));
    }
    let d: usize = img.dims[1..].iter().product();
    let x = Matrix::from_vec(
        n,
        d,
        img.payload[..n * d].iter().map(|&p| f64::from(p) / 255.0).collect(),
    );
    let mut y = Matrix::zeros(n, 10);
    for (i, &label) in lab.payload[..n].iter().enumerate() {
        if label > 9 {
            return Err(Error::Format {
                kind: "IDX",
                path: labels.to_path_buf(),
                reason: format!("label {label} at index {i} is not a digit"),
            });
        }
        y.set(i, label as usize, 1.0);
    }
    Dataset::new(x, y)
}

/// Writes an uncompressed IDX image file (`rows x cols` images).
pub fn write_idx_images(path: impl AsRef<Path>, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    assert_eq!(pixels.len() % (rows * cols), 0, "pixel buffer is not a whole number of images");
    let count = pixels.len() / (rows * cols);
    let mut buf = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        buf.extend_from_slice(&v.to_be_bytes());
    }
    buf.extend_from_slice(pixels);
    write_bytes(path, &buf)
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + labels.len());
    buf.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    buf.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    buf.extend_from_slice(labels);
    write_bytes(path.as_ref(), &buf)
}

fn write_bytes(path: &Path, buf: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(buf).map_err(|e| Error::io(path, e))
}

/// Paths of the 1000-sample MNIST subset shipped with the crate.
pub fn bundled_mnist() -> (std::path::PathBuf, std::path::PathBuf) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    (
        dir.join("mnist-1k-images-idx3-ubyte.gz"),
        dir.join("mnist-1k-labels-idx1-ubyte.gz"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{loss, Network};
    use flate2::write::GzEncoder;
    use flate2::Compression;

    #[test]
    fn default_spec_shape_and_zero_net_loss() {
        let data = synthetic_1d(&SyntheticSpec::default()).unwrap();
        assert_eq!((data.len(), data.input_dim(), data.output_dim()), (4, 1, 1));
        let net = Network::zeros(1, 5, 1, 1.0);
        let expected = (0.04 + 0.16 + 0.36 + 0.09) / 8.0;
        assert!((loss(&net, &data).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn duplicate_and_empty_specs_fail() {
        let dup = SyntheticSpec {
            points: vec![(0.5, 1.0), (0.5, 2.0)],
        };
        assert!(synthetic_1d(&dup).is_err());
        assert!(synthetic_1d(&SyntheticSpec { points: vec![] }).is_err());
    }

    #[test]
    fn idx_round_trip_plain_and_gz() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..3 * 2 * 2).map(|i| (i * 21) as u8).collect();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        write_idx_images(&img, 2, 2, &pixels).unwrap();
        write_idx_labels(&lab, &[3, 0, 9]).unwrap();
        let data = load_idx(&img, &lab, 10).unwrap();
        assert_eq!((data.len(), data.input_dim()), (3, 4));
        for (v, p) in data.x().as_slice().iter().zip(&pixels) {
            assert_eq!(*v, f64::from(*p) / 255.0);
        }
        assert_eq!(data.y().get(0, 3), 1.0);
        assert_eq!(data.y().get(2, 9), 1.0);

        let gz = dir.path().join("img.gz");
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&fs::read(&img).unwrap()).unwrap();
        fs::write(&gz, enc.finish().unwrap()).unwrap();
        let again = load_idx(&gz, &lab, 2).unwrap();
        assert_eq!(again.len(), 2);
        assert_eq!(again.x().row(1), data.x().row(1));
    }

    #[test]
    fn idx_errors() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        write_idx_images(&img, 1, 1, &[1, 2]).unwrap();
        write_idx_labels(&lab, &[0, 1]).unwrap();
        assert!(matches!(load_idx(&img, &lab, 0), Err(Error::InvalidData(_))));
        // images where labels belong
        assert!(matches!(load_idx(&img, &img, 1), Err(Error::Format { .. })));
        write_idx_labels(&lab, &[0, 1, 2]).unwrap();
        assert!(matches!(load_idx(&img, &lab, 1), Err(Error::Format { .. })));
        let bytes = fs::read(&img).unwrap();
        fs::write(&img, &bytes[..bytes.len() - 1]).unwrap();
        write_idx_labels(&lab, &[0, 1]).unwrap();
        assert!(matches!(load_idx(&img, &lab, 1), Err(Error::Format { .. })));
    }

    #[test]
    fn bundled_subset_loads() {
        let (img, lab) = bundled_mnist();
        let data = load_idx(img, lab, 100).unwrap();
        assert_eq!((data.len(), data.input_dim(), data.output_dim()), (100, 784, 10));
        for i in 0..100 {
            assert_eq!(data.y().row(i).iter().sum::<f64>(), 1.0);
            assert_eq!(data.y().get(i, i % 10), 1.0);
        }
    }
}
