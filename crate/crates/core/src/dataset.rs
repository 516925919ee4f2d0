//! Training sets: an `n x d` matrix of atoms with optional class labels.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::error::{invalid, Error, Result};

/// Label byte meaning "no class assigned".
pub const UNLABELED: u8 = 255;

const MAGIC: &[u8; 5] = b"DMRL1";

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Array2<f64>,
    labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn new(rows: Array2<f64>, labels: Option<Vec<u8>>) -> Result<Self> {
        let (n, d) = rows.dim();
        if n == 0 || d == 0 {
            return invalid(format!("dataset must be non-empty, got {n} x {d}"));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return invalid("dataset contains non-finite entries");
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return invalid(format!("{} labels for {n} rows", l.len()));
            }
        }
        Ok(Self {
            rows: rows.as_standard_layout().into_owned(),
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return invalid("ragged rows");
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let arr = Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(arr, None)
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn d(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn row(&self, mu: usize) -> &[f64] {
        let d = self.d();
        &self.rows.as_slice().expect("standard layout")[mu * d..(mu + 1) * d]
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Option<Vec<u8>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.n() {
                return invalid(format!("{} labels for {} rows", l.len(), self.n()));
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// `ln(n) / d`.
    pub fn alpha(&self) -> f64 {
        crate::time::alpha_param(self.n(), self.d())
    }

    /// Column-centred copy plus the subtracted mean vector.
    pub fn center(&self) -> (Dataset, Array1<f64>) {
        let mean = self.rows.mean_axis(Axis(0)).expect("n >= 1");
        let rows = &self.rows - &mean;
        (
            Dataset {
                rows,
                labels: self.labels.clone(),
            },
            mean,
        )
    }

    /// Copy with every column scaled to unit (population) variance. Constant
    /// columns are left unchanged. Returns the per-column scale used.
    pub fn rescale(&self) -> (Dataset, Array1<f64>) {
        let n = self.n() as f64;
        let mean = self.rows.mean_axis(Axis(0)).expect("n >= 1");
        let mut scale = Array1::ones(self.d());
        for (j, col) in self.rows.axis_iter(Axis(1)).enumerate() {
            let var = col.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                scale[j] = var.sqrt();
            }
        }
        let rows = &self.rows / &scale;
        (
            Dataset {
                rows,
                labels: self.labels.clone(),
            },
            scale,
        )
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let n = u32::try_from(self.n()).map_err(|_| Error::Format("n exceeds u32".into()))?;
        let d = u32::try_from(self.d()).map_err(|_| Error::Format("d exceeds u32".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&d.to_le_bytes())?;
        for v in self.rows.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        if let Some(l) = &self.labels {
            w.write_all(l)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, expected DMRL1".into()));
        }
        let mut u = [0u8; 4];
        r.read_exact(&mut u)
            .map_err(|_| Error::Format("truncated header".into()))?;
        let n = u32::from_le_bytes(u) as usize;
        r.read_exact(&mut u)
            .map_err(|_| Error::Format("truncated header".into()))?;
        let d = u32::from_le_bytes(u) as usize;
        let mut data = vec![0.0; n * d];
        let mut b = [0u8; 8];
        for v in data.iter_mut() {
            r.read_exact(&mut b)
                .map_err(|_| Error::Format("truncated matrix".into()))?;
            *v = f64::from_le_bytes(b);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        let labels = match rest.len() {
            0 => None,
            len if len == n => Some(rest),
            len => return Err(Error::Format(format!("{len} trailing bytes, expected 0 or {n}"))),
        };
        let rows = Array2::from_shape_vec((n, d), data).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(rows, labels)
    }

    /// CSV with a `# n=<n> d=<d>` header and an optional final label column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "# n={} d={}", self.n(), self.d())?;
        for (mu, row) in self.rows.outer_iter().enumerate() {
            let mut line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            if let Some(l) = &self.labels {
                line.push(l[mu].to_string());
            }
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty file".into()))??;
        let (n, d) = parse_header(&header)?;
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::new();
        let mut count = 0;
        for (k, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {}: bad number '{s}'", k + 2)))
            };
            match fields.len() {
                len if len == d => {
                    for f in &fields {
                        data.push(parse(f)?);
                    }
                }
                len if len == d + 1 => {
                    for f in &fields[..d] {
                        data.push(parse(f)?);
                    }
                    let l = fields[d]
                        .parse::<u8>()
                        .map_err(|_| Error::Format(format!("line {}: bad label", k + 2)))?;
                    labels.push(l);
                }
                len => return Err(Error::Format(format!("line {}: {len} fields, expected {d}", k + 2))),
            }
            count += 1;
        }
        if count != n {
            return Err(Error::Format(format!("header says n={n}, found {count} rows")));
        }
        let labels = match labels.len() {
            0 => None,
            len if len == n => Some(labels),
            _ => return Err(Error::Format("labels present on some rows only".into())),
        };
        let rows = Array2::from_shape_vec((n, d), data).map_err(|e| Error::Format(e.to_string()))?;
        Self::new(rows, labels)
    }

    /// Reads either format: binary when the file starts with the magic bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(MAGIC) {
            Self::read_binary(bytes.as_slice())
        } else {
            Self::read_csv(bytes.as_slice())
        }
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("missing '# n=<n> d=<d>' header".into()))?;
    let mut n = None;
    let mut d = None;
    for tok in body.split_whitespace() {
        if let Some(v) = tok.strip_prefix("n=") {
            n = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("d=") {
            d = v.parse().ok();
        }
    }
    match (n, d) {
        (Some(n), Some(d)) => Ok((n, d)),
        _ => Err(Error::Format(format!("cannot parse header '{line}'"))),
    }
}
