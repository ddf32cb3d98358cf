//! Tabulated expected goodput r(age), ages starting at 1.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::LinkParams;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardCurve {
    values: Vec<f64>,
    /// Link the curve was computed for; `None` for synthetic curves.
    params: Option<LinkParams>,
}

impl RewardCurve {
    /// `values[k]` is r(k + 1). Values must be finite and nonnegative.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("values", "reward curve is empty"));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(invalid(
                "values",
                format!("r({}) = {v} is not a finite nonnegative number", i + 1),
            ));
        }
        Ok(Self {
            values,
            params: None,
        })
    }

    pub fn with_params(mut self, params: LinkParams) -> Self {
        self.params = Some(params);
        self
    }

    pub fn params(&self) -> Option<&LinkParams> {
        self.params.as_ref()
    }

    /// r(age) for 1 <= age <= len(). Panics outside that range.
    pub fn get(&self, age: usize) -> f64 {
        self.values[age - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest tabulated age.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Extends the curve with zeros up to `len` ages (finite-support semantics).
    pub fn zero_padded(&self, len: usize) -> Self {
        let mut values = self.values.clone();
        if values.len() < len {
            values.resize(len, 0.0);
        }
        Self {
            values,
            params: self.params,
        }
    }

    /// The first `len` ages.
    pub fn truncated(&self, len: usize) -> Self {
        Self {
            values: self.values[..len.min(self.values.len())].to_vec(),
            params: self.params,
        }
    }

    /// c * r.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * factor).collect()).map(|mut c| {
            c.params = self.params;
            c
        })
    }

    /// Prefix sums: `out[k]` = r(1) + ... + r(k), `out[0]` = 0.
    pub(crate) fn prefix_sums(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for v in &self.values {
            acc += v;
            out.push(acc);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        let wrap = |e: csv::Error| invalid("reward csv", e.to_string());
        csv.write_record(["age", "reward"]).map_err(wrap)?;
        for (i, v) in self.values.iter().enumerate() {
            csv.write_record([(i + 1).to_string(), format!("{v:e}")])
                .map_err(wrap)?;
        }
        csv.flush().map_err(|e| invalid("reward csv", e.to_string()))
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let fail = |message: String| Error::TableFormat {
            path: origin.to_path_buf(),
            message,
        };
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = csv.headers().map_err(|e| fail(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != ["age", "reward"] {
            return Err(fail("expected header `age,reward`".into()));
        }
        let mut values = Vec::new();
        for (i, record) in csv.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| fail(format!("row {row}: {e}")))?;
            let age: usize = record
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| fail(format!("row {row}: bad age")))?;
            if age != values.len() + 1 {
                return Err(fail(format!(
                    "row {row}: expected age {}, found {age}",
                    values.len() + 1
                )));
            }
            let reward: f64 = record
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| fail(format!("row {row}: bad reward")))?;
            values.push(reward);
        }
        Self::new(values).map_err(|e| fail(e.to_string()))
    }

    pub fn from_csv_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, path)
    }
}
