//! Time-series ingestion and windowed sample covariance lags.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::linalg::{min_eig, symmetrize, NeumaierSum};
use crate::polyalg::{toeplitz, MatrixPoly};
use crate::{Error, Result};

/// `N × m` samples; row `t` is `y(t)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    /// `None` detects a header from the first row.
    pub has_header: Option<bool>,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { has_header: None, delimiter: b',' }
    }
}

impl TimeSeries {
    pub fn new(samples: DMatrix<f64>) -> Result<Self> {
        if samples.ncols() == 0 {
            return Err(Error::Dimension("time series needs at least one variable".into()));
        }
        if let Some((idx, _)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            // column-major storage
            let row = idx % samples.nrows();
            return Err(Error::Ingest { row: row + 1, msg: "non-finite sample".into() });
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    /// Copy with the per-variable sample mean removed.
    pub fn demeaned(&self) -> TimeSeries {
        let mut s = self.samples.clone();
        for mut col in s.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        TimeSeries { samples: s }
    }

    pub fn read_csv<R: Read>(reader: R, opts: CsvOptions) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .delimiter(opts.delimiter)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = None;
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 1;
            let rec = rec.map_err(|e| Error::Ingest { row: line, msg: e.to_string() })?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(e) => {
                    let header_allowed = i == 0 && opts.has_header != Some(false);
                    if header_allowed {
                        width = Some(rec.len());
                        continue;
                    }
                    return Err(Error::Ingest { row: line, msg: format!("unparsable field: {e}") });
                }
            };
            if i == 0 && opts.has_header == Some(true) {
                width = Some(rec.len());
                continue;
            }
            if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Ingest { row: line, msg: format!("non-finite value in column {}", pos + 1) });
            }
            match width {
                Some(w) if w != values.len() => {
                    return Err(Error::Ingest {
                        row: line,
                        msg: format!("expected {w} columns, found {}", values.len()),
                    })
                }
                None => width = Some(values.len()),
                _ => {}
            }
            rows.push(values);
        }
        let m = width.unwrap_or(0);
        if rows.is_empty() || m == 0 {
            return Err(Error::Ingest { row: 0, msg: "no data rows".into() });
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Self::new(DMatrix::from_row_slice(flat.len() / m, m, &flat))
    }

    /// Writes one row per sample with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for row in self.samples.row_iter() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

pub fn load_timeseries(path: impl AsRef<Path>, opts: CsvOptions) -> Result<TimeSeries> {
    let file = std::fs::File::open(path)?;
    TimeSeries::read_csv(std::io::BufReader::new(file), opts)
}

const CHUNK: usize = 256;

/// Windowed lags `R̂_k = (1/(N−n)) Σ_{t=1}^{N−k} y(t+k) y(t)ᵀ`, `k = 0…n`.
///
/// The normalization is `1/(N−n)` for every lag. Chunk partial sums are
/// formed by matrix products and combined with compensated summation.
pub fn covariance_lags(y: &TimeSeries, n: usize) -> Result<MatrixPoly> {
    let big_n = y.len();
    if big_n <= n {
        return Err(Error::InvalidArgument(format!("need more samples than the order (N = {big_n}, n = {n})")));
    }
    let m = y.dim();
    let data = y.samples();
    let norm = 1.0 / (big_n - n) as f64;
    let mut blocks = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let count = big_n - k;
        let mut acc = vec![NeumaierSum::default(); m * m];
        let mut start = 0;
        while start < count {
            let len = CHUNK.min(count - start);
            let lead = data.rows(start + k, len);
            let lag = data.rows(start, len);
            let part = lead.transpose() * lag;
            for (a, v) in acc.iter_mut().zip(part.iter()) {
                a.add(*v);
            }
            start += len;
        }
        let blk = DMatrix::from_iterator(m, m, acc.iter().map(|s| s.value() * norm));
        blocks.push(blk);
    }
    blocks[0] = symmetrize(&blocks[0]);
    MatrixPoly::new(blocks)
}

/// `λ_min(T(R̂))`; a nonpositive value violates the standing assumption `T(R̂) ≻ 0`.
pub fn check_toeplitz_pd(rhat: &MatrixPoly) -> f64 {
    min_eig(toeplitz(rhat).matrix())
}
