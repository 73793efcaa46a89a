//! MNIST-family datasets in IDX format: loading, normalization, splits,
//! augmentation, batching and checksum-verified download.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::GzDecoder;
use md5::{Digest, Md5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Mnist,
    #[serde(rename = "fashion")]
    FashionMnist,
    Kmnist,
}

struct RemoteFile {
    name: &'static str,
    md5: &'static str,
}

impl DatasetName {
    pub const ALL: [DatasetName; 3] = [DatasetName::Mnist, DatasetName::FashionMnist, DatasetName::Kmnist];

    pub fn name(&self) -> &'static str {
        match self {
            DatasetName::Mnist => "mnist",
            DatasetName::FashionMnist => "fashion",
            DatasetName::Kmnist => "kmnist",
        }
    }

    fn mirrors(&self) -> &'static [&'static str] {
        match self {
            DatasetName::Mnist => &[
                "https://ossci-datasets.s3.amazonaws.com/mnist/",
                "http://yann.lecun.com/exdb/mnist/",
            ],
            DatasetName::FashionMnist => &["http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/"],
            DatasetName::Kmnist => &["http://codh.rois.ac.jp/kmnist/dataset/kmnist/"],
        }
    }

    fn files(&self) -> [RemoteFile; 4] {
        let md5 = match self {
            DatasetName::Mnist => [
                "f68b3c2dcbeaaa9fbdd348bbdeb94873",
                "d53e105ee54ea40749a09fcbcd1e9432",
                "9fb629c4189551a2d022fa330f9573f3",
                "ec29112dd5afa0611ce80d1b7f02629c",
            ],
            DatasetName::FashionMnist => [
                "8d4fb7e6c68d591d4c3dfef9ec88bf0d",
                "25c81989df183df01b3e8a0aad5dffbe",
                "bef4ecab320f06d8554ea6380940ec79",
                "bb300cfdad3c16e7a12a480ee83cd310",
            ],
            DatasetName::Kmnist => [
                "bdb82020997e1d708af4cf47b453dcf7",
                "e144d726b3acfaa3e44228e80efcd344",
                "5c965bf0a639b31b8f53240b1b52f4d7",
                "7320c461ea6c1c855c0b718fb2a4b134",
            ],
        };
        [
            RemoteFile {
                name: "train-images-idx3-ubyte.gz",
                md5: md5[0],
            },
            RemoteFile {
                name: "train-labels-idx1-ubyte.gz",
                md5: md5[1],
            },
            RemoteFile {
                name: "t10k-images-idx3-ubyte.gz",
                md5: md5[2],
            },
            RemoteFile {
                name: "t10k-labels-idx1-ubyte.gz",
                md5: md5[3],
            },
        ]
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "mnist" => Ok(DatasetName::Mnist),
            "fashion" | "fashionmnist" => Ok(DatasetName::FashionMnist),
            "kmnist" => Ok(DatasetName::Kmnist),
            _ => Err(Error::Config(format!("unknown dataset `{s}`"))),
        }
    }
}

/// A parsed IDX file: dimension sizes and the raw `u8` payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Parses IDX bytes (optionally gzip-compressed).
pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray> {
    let owned;
    let bytes = if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("gzip: {e}")))?;
        owned = out;
        &owned[..]
    } else {
        bytes
    };
    if bytes.len() < 4 {
        return Err(Error::Format("IDX header shorter than 4 bytes".into()));
    }
    let word = |i: usize| u32::from_be_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let magic = word(0);
    let n_dims = match magic {
        IMAGE_MAGIC => 3,
        LABEL_MAGIC => 1,
        _ => return Err(Error::Format(format!("bad IDX magic {magic:#010x}"))),
    };
    let header = 4 + 4 * n_dims;
    if bytes.len() < header {
        return Err(Error::Length {
            expected: header,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = (0..n_dims).map(|d| word(4 + 4 * d) as usize).collect();
    let len: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != len {
        return Err(Error::Length {
            expected: len,
            found: payload.len(),
        });
    }
    Ok(IdxArray {
        magic,
        dims,
        data: payload.to_vec(),
    })
}

pub fn load_idx(path: &Path) -> Result<IdxArray> {
    parse_idx(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn normalize(raw: &[u8]) -> Vec<f64> {
    raw.iter().map(|&b| b as f64 / 255.0).collect()
}

/// Images kept as raw bytes; [`Dataset::image`] yields values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(images: IdxArray, labels: IdxArray) -> Result<Self> {
        if images.magic != IMAGE_MAGIC || labels.magic != LABEL_MAGIC {
            return Err(Error::Format("expected an image file and a label file".into()));
        }
        if images.dims[0] != labels.dims[0] {
            return Err(Error::Length {
                expected: images.dims[0],
                found: labels.dims[0],
            });
        }
        Ok(Self {
            height: images.dims[1],
            width: images.dims[2],
            pixels: images.data,
            labels: labels.data.into_iter().map(usize::from).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width
    }

    pub fn raw_image(&self, i: usize) -> &[u8] {
        &self.pixels[i * self.image_len()..(i + 1) * self.image_len()]
    }

    pub fn image(&self, i: usize) -> Vec<f64> {
        normalize(self.raw_image(i))
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: indices.iter().flat_map(|&i| self.raw_image(i).iter().copied()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

fn find(dir: &Path, stem: &str) -> Option<PathBuf> {
    [format!("{stem}.gz"), stem.to_string()]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.exists())
}

/// Training file pair plus the predefined test pair when present.
pub fn load_dir(dir: &Path) -> Result<(Dataset, Option<Dataset>)> {
    let pair = |prefix: &str| -> Result<Option<Dataset>> {
        let imgs = find(dir, &format!("{prefix}-images-idx3-ubyte"));
        let lbls = find(dir, &format!("{prefix}-labels-idx1-ubyte"));
        match (imgs, lbls) {
            (Some(i), Some(l)) => Ok(Some(Dataset::new(load_idx(&i)?, load_idx(&l)?)?)),
            _ => Ok(None),
        }
    };
    let train = pair("train")?.ok_or_else(|| {
        Error::io(
            dir.join("train-images-idx3-ubyte.gz"),
            std::io::Error::new(std::io::ErrorKind::NotFound, "training files not found"),
        )
    })?;
    Ok((train, pair("t10k")?))
}

/// Disjoint train/validation index sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    /// Seeded shuffle of `0..n`; the first `⌊train_frac·n⌉` indices train.
    pub fn random(n: usize, train_frac: f64, seed: u64) -> Self {
        let perm = Rng::substream(seed, 0x5EED_0001).permutation(n);
        let cut = (n as f64 * train_frac).round() as usize;
        Self {
            train: perm[..cut].to_vec(),
            val: perm[cut..].to_vec(),
            seed,
        }
    }
}

/// Training and validation sets: the predefined split when a test set
/// exists, otherwise an 80/20 split of the training files. Optional subset
/// sizes keep a seeded random subset of each side.
pub fn prepare_splits(
    train: Dataset,
    test: Option<Dataset>,
    subset_train: Option<usize>,
    subset_val: Option<usize>,
    seed: u64,
) -> (Dataset, Dataset) {
    let (tr, va) = match test {
        Some(t) => (train, t),
        None => {
            let plan = SplitPlan::random(train.len(), 0.8, seed);
            (train.subset(&plan.train), train.subset(&plan.val))
        }
    };
    let cut = |d: Dataset, k: Option<usize>, stream: u64| match k {
        Some(k) if k < d.len() => {
            let mut idx = Rng::substream(seed, stream).permutation(d.len());
            idx.truncate(k);
            idx.sort_unstable();
            d.subset(&idx)
        }
        _ => d,
    };
    (cut(tr, subset_train, 0x5EED_0002), cut(va, subset_val, 0x5EED_0003))
}

pub fn hflip(image: &mut [f64], width: usize) {
    image.chunks_mut(width).for_each(|row| row.reverse());
}

/// Reverses columns with probability `p`; returns whether it flipped.
pub fn random_hflip(image: &mut [f64], width: usize, rng: &mut Rng, p: f64) -> bool {
    let flip = rng.bernoulli(p);
    if flip {
        hflip(image, width);
    }
    flip
}

/// A fresh shuffled partition of `0..n` into batches; the last may be short.
pub fn batches(n: usize, batch_size: usize, rng: &mut Rng) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    Ok(rng.permutation(n).chunks(batch_size).map(<[usize]>::to_vec).collect())
}

pub fn md5_hex(bytes: &[u8]) -> String {
    Md5::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Downloads the four IDX files of `name` into `dir`, verifying MD5 sums.
/// Files already present with the right checksum are kept.
pub fn fetch(name: DatasetName, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for file in name.files() {
        let dest = dir.join(file.name);
        if let Ok(bytes) = fs::read(&dest) {
            if md5_hex(&bytes) == file.md5 {
                written.push(dest);
                continue;
            }
        }
        let mut last_err = None;
        for mirror in name.mirrors() {
            let url = format!("{mirror}{}", file.name);
            match download(&url) {
                Ok(bytes) => {
                    let actual = md5_hex(&bytes);
                    if actual != file.md5 {
                        last_err = Some(Error::Checksum {
                            path: dest.clone(),
                            expected: file.md5.to_string(),
                            actual,
                        });
                        continue;
                    }
                    crate::io::write_atomic(&dest, &bytes)?;
                    last_err = None;
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        if let Some(e) = last_err {
            return Err(e);
        }
        written.push(dest);
    }
    Ok(written)
}

fn download(url: &str) -> Result<Vec<u8>> {
    log::info!("downloading {url}");
    let resp = ureq::get(url).call().map_err(|e| Error::Download(format!("{url}: {e}")))?;
    let mut bytes = Vec::new();
    resp.into_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Download(format!("{url}: {e}")))?;
    Ok(bytes)
}
