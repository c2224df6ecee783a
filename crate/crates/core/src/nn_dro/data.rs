//! Synthetic two-ring classification data with a removed margin band.

use std::io::{Read, Write};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::seeded_rng;

const RADIUS: f64 = std::f64::consts::SQRT_2;
const MARGIN: f64 = 1.3;

/// Points in ℝ² with ±1 labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The more frequent label (+1 on ties).
    pub fn majority_label(&self) -> f64 {
        let pos = self.labels.iter().filter(|&&l| l > 0.0).count();
        if 2 * pos >= self.labels.len() {
            1.0
        } else {
            -1.0
        }
    }

    /// Writes `v1,v2,label` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["v1", "v2", "label"]).map_err(csv_err)?;
        for (p, l) in self.points.iter().zip(&self.labels) {
            w.write_record([p[0].to_string(), p[1].to_string(), l.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(csv_err)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["v1", "v2", "label"] {
            return Err(Error::InvalidConfig(format!("dataset header must be v1,v2,label, got {headers:?}")));
        }
        let mut ds = Dataset { points: Vec::new(), labels: Vec::new() };
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidConfig(format!("bad dataset field {i} in {rec:?}")))
            };
            ds.points.push([field(0)?, field(1)?]);
            ds.labels.push(field(2)?);
        }
        Ok(ds)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidConfig(format!("csv: {e}"))
}

/// Label of a raw draw, or `None` when its norm falls in the removed band
/// `(√2/1.3, 1.3·√2)`.
pub fn label_of(v: [f64; 2]) -> Option<f64> {
    let n = v[0].hypot(v[1]);
    if n > RADIUS / MARGIN && n < MARGIN * RADIUS {
        None
    } else if n > RADIUS {
        Some(1.0)
    } else {
        Some(-1.0)
    }
}

/// Draws `n_raw` standard Gaussian points and keeps the ones outside the band.
pub fn make_synthetic_dataset(n_raw: usize, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    let mut ds = Dataset { points: Vec::new(), labels: Vec::new() };
    for _ in 0..n_raw {
        let v = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
        if let Some(l) = label_of(v) {
            ds.points.push(v);
            ds.labels.push(l);
        }
    }
    ds
}

/// Keeps drawing until exactly `n_keep` points survive the band filter.
pub fn make_synthetic_dataset_sized(n_keep: usize, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed);
    let mut ds = Dataset { points: Vec::with_capacity(n_keep), labels: Vec::with_capacity(n_keep) };
    while ds.len() < n_keep {
        let v = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
        if let Some(l) = label_of(v) {
            ds.points.push(v);
            ds.labels.push(l);
        }
    }
    ds
}
