use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;

/// Raw contents of an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` unsigned bytes, row-major.
    pub pixels: Vec<u8>,
}

/// Raw contents of an IDX label file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxLabels(pub Vec<u8>);

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn be_u32(&mut self) -> Result<u32> {
        let b = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| self.err("truncated header"))?;
        self.pos += 4;
        Ok(u32::from_be_bytes(b.try_into().unwrap()))
    }

    fn payload(&mut self, n: usize) -> Result<&[u8]> {
        let avail = self.bytes.len() - self.pos;
        if avail < n {
            return Err(self.err(format!("truncated data: need {n} bytes, have {avail}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let m = self.be_u32()?;
        if m != expected {
            self.pos -= 4;
            return Err(self.err(format!("bad magic {m}, expected {expected}")));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

impl IdxImages {
    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut c = Cursor { bytes, pos: 0, path };
        c.magic(IMAGE_MAGIC)?;
        let n = c.be_u32()? as usize;
        let rows = c.be_u32()? as usize;
        let cols = c.be_u32()? as usize;
        let pixels = c.payload(n * rows * cols)?.to_vec();
        Ok(Self { rows, cols, pixels })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?, path)
    }

    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [IMAGE_MAGIC, self.count() as u32, self.rows as u32, self.cols as u32] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Images at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let size = self.rows * self.cols;
        let mut pixels = Vec::with_capacity(indices.len() * size);
        for &i in indices {
            pixels.extend_from_slice(&self.pixels[i * size..(i + 1) * size]);
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels,
        }
    }
}

impl IdxLabels {
    pub fn parse(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut c = Cursor { bytes, pos: 0, path };
        c.magic(LABEL_MAGIC)?;
        let n = c.be_u32()? as usize;
        Ok(Self(c.payload(n)?.to_vec()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?, path)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.0.len());
        out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.0.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.0);
        out
    }
}

/// Rows of `images` whose label is `a` or `b`, relabeled 0 and 1, with
/// pixels scaled to `[0, 1]`. Ids are `<prefix><index in file>`.
pub fn filter_pair(images: &IdxImages, labels: &IdxLabels, pair: (u8, u8), prefix: &str) -> Result<Dataset> {
    if images.count() != labels.0.len() {
        return Err(Error::shape("idx files", images.count(), labels.0.len()));
    }
    let keep: Vec<usize> = (0..labels.0.len())
        .filter(|&i| labels.0[i] == pair.0 || labels.0[i] == pair.1)
        .collect();
    if keep.is_empty() {
        log::warn!(
            "no images with labels {} or {}; returning an empty dataset",
            pair.0,
            pair.1
        );
    }
    let sub = images.subset(&keep);
    let d = images.rows * images.cols;
    let x = Array2::from_shape_vec(
        (keep.len(), d),
        sub.pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    )
    .expect("subset has keep.len() images");
    let y = keep.iter().map(|&i| usize::from(labels.0[i] == pair.1)).collect();
    let ids = keep.iter().map(|i| format!("{prefix}{i}")).collect();
    Dataset::new(ids, x, y, 2)
}

pub fn load_idx_images(images_path: &Path, labels_path: &Path, pair: (u8, u8)) -> Result<Dataset> {
    let images = IdxImages::load(images_path)?;
    let labels = IdxLabels::load(labels_path)?;
    let prefix = images_path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    filter_pair(&images, &labels, pair, &format!("{prefix}#"))
}

/// MNIST-layout directory: the training files become the training set and
/// the test files are halved into validation and test sets.
pub fn mnist_pair(dir: &Path, pair: (u8, u8)) -> Result<super::Splits> {
    let p = |name: &str| -> PathBuf { dir.join(name) };
    let train = load_idx_images(&p("train-images-idx3-ubyte"), &p("train-labels-idx1-ubyte"), pair)?;
    let test = load_idx_images(&p("t10k-images-idx3-ubyte"), &p("t10k-labels-idx1-ubyte"), pair)?;
    let (val, test) = test.halve();
    Ok(super::Splits { train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_files() -> (IdxImages, IdxLabels) {
        let images = IdxImages {
            rows: 2,
            cols: 2,
            pixels: vec![0, 255, 10, 20, 1, 2, 3, 4, 255, 255, 0, 0],
        };
        (images, IdxLabels(vec![3, 5, 8]))
    }

    #[test]
    fn round_trip_and_filter() {
        let (images, labels) = sample_files();
        let p = Path::new("mem");
        assert_eq!(IdxImages::parse(&images.to_bytes(), p).unwrap(), images);
        assert_eq!(IdxLabels::parse(&labels.to_bytes(), p).unwrap(), labels);

        let ds = filter_pair(&images, &labels, (3, 8), "t").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels, vec![0, 1]);
        assert_eq!(ds.x[[0, 1]], 1.0);
        assert_eq!(ds.ids, vec!["t0", "t2"]);
        let back: Vec<u8> = ds.x.iter().map(|&v| (v * 255.0).round() as u8).collect();
        assert_eq!(back, images.subset(&[0, 2]).pixels);
    }

    #[test]
    fn bad_magic_and_truncation_report_offsets() {
        let (images, _) = sample_files();
        let mut bytes = images.to_bytes();
        bytes[3] = 1;
        match IdxImages::parse(&bytes, Path::new("m")).unwrap_err() {
            Error::Parse { offset, reason, .. } => {
                assert_eq!(offset, 0);
                assert!(reason.contains("magic"));
            }
            e => panic!("{e}"),
        }
        let full = images.to_bytes();
        match IdxImages::parse(&full[..full.len() - 1], Path::new("m")).unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, 16),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn empty_pair_gives_empty_dataset() {
        let (images, labels) = sample_files();
        assert!(filter_pair(&images, &labels, (0, 1), "t").unwrap().is_empty());
    }
}
