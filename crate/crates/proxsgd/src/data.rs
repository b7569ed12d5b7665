//! Dataset ingestion (LIBSVM text format), normalization and reproducible
//! mini-batch sampling with replacement.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::core::{Error, Result, SparseVec};
use crate::rng::{stream, CounterRng, SeqRng};

/// One training example: sparse features plus an optional label. NN-PCA
/// ignores labels; the logistic objective requires them in {-1, +1}.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: SparseVec,
    pub label: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
    normalized: bool,
}

impl Dataset {
    pub fn from_samples(samples: Vec<Sample>, dim: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for s in &samples {
            if s.features.dim() > dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: s.features.dim(),
                });
            }
        }
        let samples = samples
            .into_iter()
            .map(|s| {
                Ok(Sample {
                    features: s.features.with_dim(dim)?,
                    label: s.label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            samples,
            dim,
            normalized: false,
        })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn sample(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Parse LIBSVM text: `label idx:val idx:val ...` with 1-based strictly
    /// increasing indices. Blank lines are skipped. `d` becomes the largest
    /// observed index unless `dim_override` pins it (sparse files may omit
    /// trailing features).
    pub fn parse_libsvm<R: BufRead>(reader: R, dim_override: Option<usize>) -> Result<Self> {
        let mut samples = Vec::new();
        let mut max_dim = 0usize;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let mut tokens = line.split_whitespace();
            let label_tok = match tokens.next() {
                None => continue, // blank line
                Some(t) => t,
            };
            let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad label token '{label_tok}'"),
            })?;
            let mut indices = Vec::new();
            let mut values = Vec::new();
            let mut prev_idx = 0usize; // 1-based sentinel
            for tok in tokens {
                let (is, vs) = tok.split_once(':').ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: format!("expected idx:val pair, got '{tok}'"),
                })?;
                let idx: usize = is.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad feature index '{is}'"),
                })?;
                let val: f64 = vs.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("bad feature value '{vs}'"),
                })?;
                if idx == 0 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "feature indices are 1-based; got 0".into(),
                    });
                }
                if idx <= prev_idx {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("indices must be strictly increasing ({prev_idx} then {idx})"),
                    });
                }
                if !val.is_finite() {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("non-finite feature value {val}"),
                    });
                }
                prev_idx = idx;
                if val != 0.0 {
                    indices.push(idx - 1);
                    values.push(val);
                }
            }
            max_dim = max_dim.max(prev_idx);
            // dim is widened after the full pass
            let features =
                SparseVec::new(indices, values, prev_idx.max(1)).map_err(|e| Error::Parse {
                    line: lineno,
                    msg: e.to_string(),
                })?;
            samples.push(Sample {
                features,
                label: Some(label),
            });
        }
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = match dim_override {
            Some(d) => {
                if max_dim > d {
                    return Err(Error::DimMismatch {
                        expected: d,
                        got: max_dim,
                    });
                }
                d
            }
            None => max_dim.max(1),
        };
        Dataset::from_samples(samples, dim)
    }

    /// Load from a file path. When no override is given, well-known dataset
    /// file names pin `d` to the published value.
    pub fn load(path: &Path, dim_override: Option<usize>) -> Result<Self> {
        let over = dim_override.or_else(|| known_dim(path));
        let file = File::open(path)?;
        Dataset::parse_libsvm(BufReader::new(file), over)
    }

    /// Serialize back to LIBSVM text. Values are printed with 17 significant
    /// digits so a parse round-trip reproduces them exactly; absent labels
    /// are written as 0.
    pub fn write_libsvm<W: Write>(&self, w: &mut W) -> Result<()> {
        for s in &self.samples {
            match s.label {
                Some(l) => write!(w, "{}", fmt_f64(l))?,
                None => write!(w, "0")?,
            }
            for (i, v) in s.features.iter() {
                write!(w, " {}:{}", i + 1, fmt_f64(v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Scale every feature vector to unit Euclidean norm. Labels untouched.
    pub fn normalize(mut self) -> Result<Self> {
        for (i, s) in self.samples.iter_mut().enumerate() {
            let norm = s.features.norm();
            if norm == 0.0 {
                return Err(Error::ZeroNormSample(i));
            }
            s.features.scale_in_place(1.0 / norm);
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn max_feature_norm_sq(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.features.norm_sq())
            .fold(0.0, f64::max)
    }

    /// FNV-1a over the in-memory content (indices, value bits, labels);
    /// stable across platforms, used to key reference files for datasets
    /// that never existed on disk.
    pub fn content_fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write_u64(self.dim as u64);
        h.write_u64(self.samples.len() as u64);
        for s in &self.samples {
            h.write_u64(s.label.map(|l| l.to_bits()).unwrap_or(0));
            for (i, v) in s.features.iter() {
                h.write_u64(i as u64);
                h.write_u64(v.to_bits());
            }
        }
        h.finish()
    }
}

fn fmt_f64(v: f64) -> String {
    let s = format!("{v:.16e}");
    // trim the verbose exponent form for integral values commonly found in
    // label columns
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v}")
    } else {
        s
    }
}

/// Published (n, d) pins for the benchmark files, applied by file name.
pub fn known_dim(path: &Path) -> Option<usize> {
    let name = path.file_name()?.to_str()?;
    if name.starts_with("a9a") {
        Some(123)
    } else if name.starts_with("mnist") {
        Some(780)
    } else {
        None
    }
}

/// FNV-1a 64-bit over file bytes; keys reference solutions to the dataset.
pub fn file_fingerprint(path: &Path) -> Result<u64> {
    let mut f = File::open(path)?;
    let mut h = Fnv1a::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.write(&buf[..n]);
    }
    Ok(h.finish())
}

pub(crate) struct Fnv1a(u64);

impl Fnv1a {
    pub(crate) fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }
    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    pub(crate) fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }
    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

/// Stateless uniform-with-replacement sampler: the index at `(draw_index,
/// position)` is a pure function of the seed, so draws replay identically no
/// matter which thread asks first.
#[derive(Clone, Copy, Debug)]
pub struct BatchSampler {
    rng: CounterRng,
    n: usize,
}

impl BatchSampler {
    pub fn new(seed: u64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(BatchSampler {
            rng: CounterRng::new(seed, stream::BATCH),
            n,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn index_at(&self, draw_index: u64, pos: u64) -> usize {
        (self.rng.u64_at2(draw_index, pos) % self.n as u64) as usize
    }

    /// `size` i.i.d. uniform indices in [0, n), determined by `(seed,
    /// draw_index)` alone.
    pub fn draw(&self, draw_index: u64, size: usize) -> Result<Vec<usize>> {
        if size == 0 {
            return Err(Error::InvalidInput("draw size must be >= 1".into()));
        }
        Ok((0..size as u64)
            .map(|pos| self.index_at(draw_index, pos))
            .collect())
    }
}

/// Profiles for deterministic synthetic datasets. `A9aLike` and `MnistLike`
/// reproduce the published shapes of the benchmark files for harness runs in
/// environments without the real downloads; `Planted` builds a small dense
/// instance with a planted dominant direction for convergence-rate studies.
#[derive(Clone, Copy, Debug)]
pub enum SyntheticProfile {
    A9aLike,
    MnistLike,
    Planted { n: usize, d: usize },
    SparseBinary { n: usize, d: usize, per_row: usize },
}

pub fn synthetic(profile: SyntheticProfile, seed: u64) -> Dataset {
    match profile {
        SyntheticProfile::A9aLike => synthetic_one_hot(32_561, 123, seed),
        SyntheticProfile::MnistLike => synthetic_dense_bands(60_000, 780, seed),
        SyntheticProfile::Planted { n, d } => synthetic_planted(n, d, seed),
        SyntheticProfile::SparseBinary { n, d, per_row } => {
            synthetic_sparse_binary(n, d, per_row, seed)
        }
    }
}

/// One active column per categorical group, 14 groups over 123 columns,
/// popularity skewed toward low in-group indices so the sample covariance has
/// a dominant nonnegative direction, as census-style one-hot data does.
fn synthetic_one_hot(n: usize, d: usize, seed: u64) -> Dataset {
    let group_sizes = [8usize, 16, 7, 14, 6, 5, 2, 41, 2, 4, 6, 5, 4, 3];
    debug_assert_eq!(group_sizes.iter().sum::<usize>(), d);
    let rng = CounterRng::new(seed, stream::SYNTH);
    let mut samples = Vec::with_capacity(n);
    for row in 0..n {
        let mut indices = Vec::with_capacity(group_sizes.len());
        let mut base = 0usize;
        for (g, &size) in group_sizes.iter().enumerate() {
            let u = rng.f64_at2(row as u64, g as u64);
            let j = ((u * u) * size as f64) as usize;
            indices.push(base + j.min(size - 1));
            base += size;
        }
        let values = vec![1.0; indices.len()];
        let label = if rng.f64_at2(row as u64, 1_000_003) < 0.5 {
            -1.0
        } else {
            1.0
        };
        samples.push(Sample {
            features: SparseVec::new(indices, values, d).unwrap(),
            label: Some(label),
        });
    }
    Dataset::from_samples(samples, d).unwrap()
}

/// Rows with 120..180 nonzeros clustered in a band, values in (0, 1]; the
/// shape (and roughly the density) of the scaled digit data.
fn synthetic_dense_bands(n: usize, d: usize, seed: u64) -> Dataset {
    let rng = CounterRng::new(seed, stream::SYNTH);
    let mut samples = Vec::with_capacity(n);
    for row in 0..n {
        let r = row as u64;
        let nnz = 120 + (rng.u64_at2(r, 0) % 61) as usize;
        let span = (2 * nnz).min(d);
        let start = (rng.u64_at2(r, 1) % (d - span + 1) as u64) as usize;
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        let mut pos = start;
        let mut c = 2u64;
        while indices.len() < nnz && pos < start + span {
            if rng.f64_at2(r, c) < nnz as f64 / span as f64 {
                indices.push(pos);
                values.push(rng.f64_at2(r, c + 1_000_000).max(1e-3));
            }
            pos += 1;
            c += 1;
        }
        if indices.is_empty() {
            indices.push(start);
            values.push(1.0);
        }
        let label = (rng.u64_at2(r, 999) % 10) as f64;
        samples.push(Sample {
            features: SparseVec::new(indices, values, d).unwrap(),
            label: Some(label),
        });
    }
    Dataset::from_samples(samples, d).unwrap()
}

/// Dense nonnegative rows `0.6 u + 0.8 |g|` around a fixed direction `u`,
/// giving a planted leading eigenvector; rows are stored sparse but full.
fn synthetic_planted(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = SeqRng::new(seed, stream::SYNTH);
    let mut u: Vec<f64> = (0..d).map(|_| rng.next_f64() + 0.05).collect();
    let un = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    for a in &mut u {
        *a /= un;
    }
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let mut vals: Vec<f64> = (0..d)
            .map(|j| 0.6 * u[j] + 0.8 * rng.normal().abs() / (d as f64).sqrt())
            .collect();
        for v in &mut vals {
            if *v == 0.0 {
                *v = 1e-9;
            }
        }
        let indices: Vec<usize> = (0..d).collect();
        samples.push(Sample {
            features: SparseVec::new(indices, vals, d).unwrap(),
            label: Some(1.0),
        });
    }
    Dataset::from_samples(samples, d).unwrap()
}

fn synthetic_sparse_binary(n: usize, d: usize, per_row: usize, seed: u64) -> Dataset {
    let rng = CounterRng::new(seed, stream::SYNTH);
    let mut samples = Vec::with_capacity(n);
    for row in 0..n {
        let mut picked: Vec<usize> = Vec::with_capacity(per_row);
        let mut c = 0u64;
        while picked.len() < per_row.min(d) {
            let j = (rng.u64_at2(row as u64, c) % d as u64) as usize;
            if !picked.contains(&j) {
                picked.push(j);
            }
            c += 1;
        }
        picked.sort_unstable();
        let values = vec![1.0; picked.len()];
        let label = if rng.f64_at2(row as u64, u64::MAX) < 0.5 {
            -1.0
        } else {
            1.0
        };
        samples.push(Sample {
            features: SparseVec::new(picked, values, d).unwrap(),
            label: Some(label),
        });
    }
    Dataset::from_samples(samples, d).unwrap()
}

/// Histogram of drawn indices, for uniformity diagnostics.
pub fn draw_histogram(sampler: &BatchSampler, draws: u64, size: usize) -> BTreeMap<usize, u64> {
    let mut hist = BTreeMap::new();
    for di in 0..draws {
        for pos in 0..size as u64 {
            *hist.entry(sampler.index_at(di, pos)).or_insert(0) += 1;
        }
    }
    hist
}

pub fn write_libsvm_file(data: &Dataset, path: &Path) -> Result<()> {
    let f = File::create(path)?;
    let mut w = BufWriter::new(f);
    data.write_libsvm(&mut w)?;
    w.flush()?;
    Ok(())
}
