use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::mask::ChannelMask;
use crate::error::{Error, Result};
use crate::Vec2;

/// Minimum number of samples, both before and after trimming.
pub const MIN_SAMPLES: usize = 10;
/// Fraction discarded at each end of the speed distribution.
pub const TRIM_FRACTION: f64 = 0.2;
pub const DEFAULT_POLY_DEGREE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ObservationSource {
    RobotObserver,
    File,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub pos: Vec2,
    pub vel: Vec2,
}

/// Sparse point velocity measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    pub entries: Vec<Observation>,
    pub source: ObservationSource,
}

/// One reading of a velocity time series recorded along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawSample {
    pub t: f64,
    pub pos: Vec2,
    pub vel: Vec2,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    x_m: f64,
    y_m: f64,
    vx_mps: f64,
    vy_mps: f64,
}

impl ObservationSet {
    pub fn empty(source: ObservationSource) -> Self {
        ObservationSet {
            entries: Vec::new(),
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every entry must be finite and sit inside a FLUID pixel.
    pub fn validate(&self, mask: &ChannelMask) -> Result<()> {
        for o in &self.entries {
            let finite = o.pos.iter().chain(o.vel.iter()).all(|v| v.is_finite());
            if !finite {
                return Err(Error::NonFinite("observation has non-finite values".into()));
            }
            if !mask.is_fluid_pos(o.pos) {
                return Err(Error::ObsOutsideFluid {
                    x: o.pos.x,
                    y: o.pos.y,
                });
            }
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["x_m", "y_m", "vx_mps", "vy_mps"];
        if headers.iter().map(str::trim).ne(expected) {
            return Err(Error::BadFormat(format!(
                "observation CSV header must be {}, got {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut entries = Vec::new();
        for row in rdr.deserialize() {
            let row: CsvRow = row?;
            entries.push(Observation {
                pos: Vec2::new(row.x_m, row.y_m),
                vel: Vec2::new(row.vx_mps, row.vy_mps),
            });
        }
        Ok(ObservationSet {
            entries,
            source: ObservationSource::File,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        if self.entries.is_empty() {
            wtr.write_record(["x_m", "y_m", "vx_mps", "vy_mps"])?;
        }
        for o in &self.entries {
            wtr.serialize(CsvRow {
                x_m: o.pos.x,
                y_m: o.pos.y,
                vx_mps: o.vel.x,
                vy_mps: o.vel.y,
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Trims the slowest and fastest 20 % of a velocity series by speed, then replaces each
/// component with a least-squares polynomial in arc length evaluated at the survivors.
pub fn preprocess_observations(raw: &[RawSample], degree: usize) -> Result<ObservationSet> {
    if raw.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: raw.len(),
            need: MIN_SAMPLES,
        });
    }
    if raw
        .iter()
        .any(|s| !(s.pos.iter().chain(s.vel.iter()).all(|v| v.is_finite())))
    {
        return Err(Error::NonFinite("raw sample has non-finite values".into()));
    }

    let mut arc = Vec::with_capacity(raw.len());
    let mut s = 0.0;
    for (i, sample) in raw.iter().enumerate() {
        if i > 0 {
            s += (sample.pos - raw[i - 1].pos).norm();
        }
        arc.push(s);
    }

    let n = raw.len();
    let cut = (TRIM_FRACTION * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw[a]
            .vel
            .norm()
            .total_cmp(&raw[b].vel.norm())
            .then(a.cmp(&b))
    });
    let mut keep: Vec<usize> = order[cut..n - cut].to_vec();
    keep.sort_unstable();
    if keep.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: keep.len(),
            need: MIN_SAMPLES,
        });
    }

    let xs: Vec<f64> = keep.iter().map(|&i| arc[i]).collect();
    let fit_x = polyfit(
        &xs,
        &keep.iter().map(|&i| raw[i].vel.x).collect::<Vec<_>>(),
        degree,
    )?;
    let fit_y = polyfit(
        &xs,
        &keep.iter().map(|&i| raw[i].vel.y).collect::<Vec<_>>(),
        degree,
    )?;

    let entries = keep
        .iter()
        .zip(&xs)
        .map(|(&i, &s)| Observation {
            pos: raw[i].pos,
            vel: Vec2::new(fit_x.eval(s), fit_y.eval(s)),
        })
        .collect();
    Ok(ObservationSet {
        entries,
        source: ObservationSource::RobotObserver,
    })
}

/// Least-squares polynomial, stored in a coordinate rescaled to [-1, 1].
#[derive(Clone, Debug)]
pub struct Polynomial {
    coeffs: Vec<f64>,
    center: f64,
    half_span: f64,
}

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.half_span;
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Polynomial> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (lo + hi);
    let half_span = 0.5 * (hi - lo);
    if half_span <= 0.0 {
        // all samples at one arc-length position: only the mean is identifiable
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        return Ok(Polynomial {
            coeffs: vec![mean],
            center,
            half_span: 1.0,
        });
    }
    if xs.len() <= degree {
        return Err(Error::TooFewSamples {
            got: xs.len(),
            need: degree + 1,
        });
    }
    let a = DMatrix::from_fn(xs.len(), degree + 1, |i, j| {
        ((xs[i] - center) / half_span).powi(j as i32)
    });
    let b = DVector::from_column_slice(ys);
    let coeffs = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::NonFinite(format!("polynomial fit failed: {e}")))?;
    Ok(Polynomial {
        coeffs: coeffs.iter().copied().collect(),
        center,
        half_span,
    })
}
