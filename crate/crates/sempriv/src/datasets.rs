//! Dataset files on disk: MNIST in IDX format and CIFAR-10 in its binary
//! distribution, plus the procedural set rendered in memory.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use sempriv_core::config::{ExperimentConfig, SyntheticConfig};
use sempriv_core::data::{make_synthetic, DatasetName, ImageShape, LabeledImageSet, Split};
use sempriv_core::rand::RngCore;
use sempriv_core::rng::{RandomStreams, Stream};

use crate::error::{Error, Result};

/// Environment variable holding the dataset root directory.
pub const DATA_DIR_ENV: &str = "SEMPRIV_DATA_DIR";

const MNIST_INSTRUCTIONS: &str = "Place the four MNIST IDX files (train-images-idx3-ubyte, train-labels-idx1-ubyte, \
t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte; gzipped or not) in <root>/mnist/. \
They are published at https://yann.lecun.com/exdb/mnist/ and mirrors such as \
https://ossci-datasets.s3.amazonaws.com/mnist/. Offline, scripts/mnist_from_npm.py builds \
the same files from the `mnist` npm package.";

const CIFAR_INSTRUCTIONS: &str = "Download https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz and extract it \
into <root>/cifar10/ so that <root>/cifar10/cifar-10-batches-bin/data_batch_1.bin exists.";

/// Dataset root: `$SEMPRIV_DATA_DIR` when set, otherwise `./data`.
pub fn default_data_root() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("data"), PathBuf::from)
}

/// Where [`load_dataset`] finds its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSource {
    pub root: PathBuf,
    /// Sizes and geometry of the procedural set.
    pub synthetic: SyntheticConfig,
}

impl DataSource {
    pub fn new(root: impl Into<PathBuf>, synthetic: SyntheticConfig) -> Self {
        Self { root: root.into(), synthetic }
    }
}

/// Loads one split with pixels in `[0, 1]`. With `subset_size`, returns a
/// class-balanced random subset drawn with `rng`; the procedural set is also
/// rendered from `rng`.
pub fn load_dataset(
    name: DatasetName,
    split: Split,
    subset_size: Option<usize>,
    source: &DataSource,
    rng: &mut dyn RngCore,
) -> Result<LabeledImageSet> {
    let full = match name {
        DatasetName::Mnist => load_mnist(&source.root.join("mnist"), split)?,
        DatasetName::Cifar10 => load_cifar10(&source.root.join("cifar10").join("cifar-10-batches-bin"), split)?,
        DatasetName::Synthetic => {
            let s = &source.synthetic;
            let n = match split {
                Split::Train => s.train,
                Split::Test => s.test,
            };
            make_synthetic(n, s.shape, s.classes, s.noise, rng)?
        }
    };
    match subset_size {
        Some(size) => Ok(full.balanced_subset(size, rng)?),
        None => Ok(full),
    }
}

/// The split a config asks for, with its subset size. Each split draws from
/// its own stream family so the two never overlap in randomness.
pub fn load_split(cfg: &ExperimentConfig, split: Split, root: &Path, streams: &RandomStreams) -> Result<LabeledImageSet> {
    let (salt, subset) = match split {
        Split::Train => (1, cfg.subset_size),
        Split::Test => (2, cfg.test_subset_size),
    };
    let mut rng = streams.derive(salt).stream(Stream::Data);
    load_dataset(cfg.dataset, split, subset, &DataSource::new(root, cfg.synthetic), &mut rng)
}

fn missing(dataset: &'static str, root: &Path, instructions: &str) -> Error {
    Error::MissingDataset { dataset, root: root.to_path_buf(), instructions: instructions.to_string() }
}

/// Reads `name` or `name.gz` from `dir`, whichever exists.
fn read_maybe_gz(dir: &Path, name: &str) -> Result<Option<(PathBuf, Vec<u8>)>> {
    let plain = dir.join(name);
    let gz = dir.join(format!("{name}.gz"));
    let mut bytes = Vec::new();
    if gz.is_file() {
        let f = File::open(&gz).map_err(|e| Error::io(&gz, e))?;
        GzDecoder::new(f).read_to_end(&mut bytes).map_err(|e| Error::io(&gz, e))?;
        Ok(Some((gz, bytes)))
    } else if plain.is_file() {
        bytes = std::fs::read(&plain).map_err(|e| Error::io(&plain, e))?;
        Ok(Some((plain, bytes)))
    } else {
        Ok(None)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Decodes an IDX file, checking its magic number and returning the
/// dimensions and payload.
pub fn parse_idx<'a>(path: &Path, bytes: &'a [u8], expected_rank: usize) -> Result<(Vec<usize>, &'a [u8])> {
    let bad = |message: String| Error::Format { path: path.to_path_buf(), message };
    if bytes.len() < 4 {
        return Err(bad("file shorter than its header".into()));
    }
    let magic = be_u32(bytes, 0);
    if magic != 0x0800 + expected_rank as u32 {
        return Err(bad(format!("magic {magic:#x} is not an unsigned-byte IDX file of rank {expected_rank}")));
    }
    let header = 4 + 4 * expected_rank;
    if bytes.len() < header {
        return Err(bad("file shorter than its header".into()));
    }
    let dims: Vec<usize> = (0..expected_rank).map(|i| be_u32(bytes, 4 + 4 * i) as usize).collect();
    let count: usize = dims.iter().product();
    if bytes.len() != header + count {
        return Err(bad(format!("expected {} payload bytes, found {}", count, bytes.len() - header)));
    }
    Ok((dims, &bytes[header..]))
}

/// MNIST from `dir`, in the standard IDX layout.
pub fn load_mnist(dir: &Path, split: Split) -> Result<LabeledImageSet> {
    let prefix = match split {
        Split::Train => "train",
        Split::Test => "t10k",
    };
    let images = read_maybe_gz(dir, &format!("{prefix}-images-idx3-ubyte"))?;
    let labels = read_maybe_gz(dir, &format!("{prefix}-labels-idx1-ubyte"))?;
    let (Some((img_path, img_bytes)), Some((lbl_path, lbl_bytes))) = (images, labels) else {
        return Err(missing("mnist", dir, MNIST_INSTRUCTIONS));
    };
    let (dims, pixels) = parse_idx(&img_path, &img_bytes, 3)?;
    let (ldims, raw_labels) = parse_idx(&lbl_path, &lbl_bytes, 1)?;
    let shape = ImageShape::MNIST;
    if dims[1..] != [shape.height, shape.width] {
        return Err(Error::Format { path: img_path, message: format!("images are {}x{}, expected 28x28", dims[1], dims[2]) });
    }
    if ldims[0] != dims[0] {
        return Err(Error::Format { path: lbl_path, message: format!("{} labels for {} images", ldims[0], dims[0]) });
    }
    let images = pixels.iter().map(|&p| f32::from(p) / 255.0).collect();
    let labels = raw_labels.iter().map(|&l| usize::from(l)).collect();
    Ok(LabeledImageSet::new(images, labels, 10, shape)?)
}

const CIFAR_RECORD: usize = 1 + 32 * 32 * 3;

/// CIFAR-10 from the binary batches in `dir`. Records are stored planar
/// (all red, then green, then blue) and converted to interleaved channels.
pub fn load_cifar10(dir: &Path, split: Split) -> Result<LabeledImageSet> {
    let files: Vec<String> = match split {
        Split::Train => (1..=5).map(|i| format!("data_batch_{i}.bin")).collect(),
        Split::Test => vec!["test_batch.bin".to_string()],
    };
    let plane = 32 * 32;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for name in files {
        let path = dir.join(&name);
        if !path.is_file() {
            return Err(missing("cifar10", dir, CIFAR_INSTRUCTIONS));
        }
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(Error::Format { path, message: format!("length is not a multiple of {CIFAR_RECORD}") });
        }
        for record in bytes.chunks_exact(CIFAR_RECORD) {
            labels.push(usize::from(record[0]));
            let px = &record[1..];
            for i in 0..plane {
                for c in 0..3 {
                    images.push(f32::from(px[c * plane + i]) / 255.0);
                }
            }
        }
    }
    Ok(LabeledImageSet::new(images, labels, 10, ImageShape::CIFAR10)?)
}
