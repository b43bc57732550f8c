//! On-disk formats.
//!
//! * Dataset CSV: one record per line, `label1;label2;...,v1,v2,...,vN`.
//! * Model file: pretty-printed JSON gated by `format_version`, holding the
//!   preprocessing model, the arrangement and the training configuration.
//! * Code table: little-endian binary. Header is the 8-byte magic
//!   `MLSHCODE`, `u32` version, `u32` reserved (zero), `u64` bit count,
//!   `u64` record count; then `ceil(bits / 64)` `u64` words per record.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{LabelSet, LabeledDataset};
use crate::error::{Error, Result};
use crate::hashing::{words_for, BitCode, HyperplaneArrangement};
use crate::mcmc::TrainConfig;
use crate::preprocess::PreprocessModel;
use crate::search::CodeTable;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const CODE_TABLE_MAGIC: &[u8; 8] = b"MLSHCODE";
pub const CODE_TABLE_VERSION: u32 = 1;

pub fn read_dataset<R: BufRead>(reader: R) -> Result<LabeledDataset> {
    let mut records = Vec::new();
    let mut dim = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Format(format!("line {}: {msg}", lineno + 1));
        let mut fields = line.split(',');
        let labels = LabelSet::new(
            fields
                .next()
                .unwrap_or("")
                .split(';')
                .map(str::trim)
                .filter(|l| !l.is_empty()),
        );
        let values = fields
            .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(bad("no feature values".into()));
        }
        let d = *dim.get_or_insert(values.len());
        if values.len() != d {
            return Err(bad(format!("expected {d} values, found {}", values.len())));
        }
        records.push((values, labels));
    }
    let dim = dim.ok_or_else(|| Error::Format("dataset has no records".into()))?;
    LabeledDataset::new(dim, records)
}

pub fn write_dataset<W: Write>(mut w: W, data: &LabeledDataset) -> Result<()> {
    for (v, labels) in data.records() {
        write!(w, "{labels}")?;
        for x in v {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn save_dataset(path: impl AsRef<Path>, data: &LabeledDataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, data)?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    /// Absent when the model works on raw features.
    pub preprocess: Option<PreprocessModel>,
    pub arrangement: HyperplaneArrangement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_arrangement: Option<HyperplaneArrangement>,
    pub config: Option<TrainConfig>,
}

impl ModelFile {
    pub fn new(
        preprocess: Option<PreprocessModel>,
        arrangement: HyperplaneArrangement,
        config: Option<TrainConfig>,
    ) -> Result<Self> {
        let m = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            preprocess,
            arrangement,
            best_arrangement: None,
            config,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format_version {}, expected {MODEL_FORMAT_VERSION}",
                self.format_version
            )));
        }
        let feature_dim = self.preprocess.as_ref().map_or(self.arrangement.dim(), |p| p.output_dim);
        if feature_dim != self.arrangement.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.arrangement.dim(),
                found: feature_dim,
            });
        }
        Ok(())
    }

    /// Raw input dimension the model accepts.
    pub fn input_dim(&self) -> usize {
        self.preprocess.as_ref().map_or(self.arrangement.dim(), |p| p.input_dim)
    }

    /// Applies preprocessing (if any) to a raw dataset.
    pub fn transform(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        match &self.preprocess {
            Some(p) => p.apply_dataset(data),
            None if data.dim() == self.arrangement.dim() => Ok(data.clone()),
            None => Err(Error::DimensionMismatch {
                expected: self.arrangement.dim(),
                found: data.dim(),
            }),
        }
    }

    /// Preprocesses then encodes every record of a raw dataset.
    pub fn encode_dataset(&self, data: &LabeledDataset) -> Result<CodeTable> {
        CodeTable::encode_dataset(&self.arrangement, &self.transform(data)?)
    }

    pub fn to_writer<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let m: ModelFile = serde_json::from_reader(r)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.to_writer(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }
}

pub fn write_code_table<W: Write>(mut w: W, table: &CodeTable) -> Result<()> {
    w.write_all(CODE_TABLE_MAGIC)?;
    w.write_all(&CODE_TABLE_VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&(table.bits() as u64).to_le_bytes())?;
    w.write_all(&(table.len() as u64).to_le_bytes())?;
    for i in 0..table.len() {
        for word in table.words(i) {
            w.write_all(&word.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_code_table<R: Read>(mut r: R) -> Result<CodeTable> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CODE_TABLE_MAGIC {
        return Err(Error::Format("not a code table (bad magic)".into()));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != CODE_TABLE_VERSION {
        return Err(Error::Format(format!("unsupported code table version {version}")));
    }
    r.read_exact(&mut u32buf)?;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let bits = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf)?;
    let count = u64::from_le_bytes(u64buf) as usize;
    if bits == 0 {
        return Err(Error::Format("code table with zero bits".into()));
    }
    let stride = words_for(bits);
    let mut table = CodeTable::new(bits);
    let mut words = vec![0u64; stride];
    for _ in 0..count {
        for w in words.iter_mut() {
            r.read_exact(&mut u64buf)?;
            *w = u64::from_le_bytes(u64buf);
        }
        table.push(&BitCode::from_words(bits, words.clone())?)?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after code table".into()));
    }
    Ok(table)
}
