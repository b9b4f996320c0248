//! Fisher curves β ↦ (I⁽¹⁾(β), I⁽²⁾(β), H(β)) for one tensor component, the
//! hysteresis gap between the forward and backward legs, and curve export.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infogeo::Component;
use crate::sampler::Leg;
use crate::scalar::Scalar;
use crate::trajectory::{format_real, TrajectoryRecord};

/// Absolute tolerance, relative to max(1, |β|), for matching β values.
pub const BETA_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<F> {
    pub beta: F,
    pub i1: F,
    pub i2: F,
    pub h: F,
}

impl<F: Scalar> CurvePoint<F> {
    fn distance(&self, other: &Self) -> F {
        let d1 = self.i1 - other.i1;
        let d2 = self.i2 - other.i2;
        let dh = self.h - other.h;
        (d1 * d1 + d2 * d2 + dh * dh).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherCurve<F> {
    pub component: Component,
    pub leg: Leg,
    pub points: Vec<CurvePoint<F>>,
}

impl<F: Scalar> FisherCurve<F> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn betas(&self) -> Vec<F> {
        self.points.iter().map(|p| p.beta).collect()
    }

    /// The same points in reverse order, tagged with the opposite leg.
    pub fn reversed(&self) -> Self {
        Self {
            component: self.component,
            leg: match self.leg {
                Leg::Forward => Leg::Backward,
                Leg::Backward => Leg::Forward,
            },
            points: self.points.iter().rev().copied().collect(),
        }
    }
}

/// One point per non-degenerate record of `leg`, in record order.
pub fn build_fisher_curve<F: Scalar>(
    records: &[TrajectoryRecord<F>],
    component: Component,
    leg: Leg,
) -> Result<FisherCurve<F>> {
    let points: Vec<_> = records
        .iter()
        .filter(|r| r.leg == leg && !r.degenerate)
        .map(|r| CurvePoint {
            beta: r.beta_set,
            i1: r.g1.component(component),
            i2: r.g2.component(component),
            h: r.entropy,
        })
        .collect();
    if points.is_empty() {
        return Err(Error::InvalidInput(format!("no usable {leg} records")));
    }
    Ok(FisherCurve { component, leg, points })
}

/// Mean Euclidean distance in (i1, i2, h) between β-aligned points.
///
/// `b` is traversed in reverse so that a backward leg lines up with a
/// forward one. Points are paired in order by equal β; each curve may have
/// at most one point without a partner (the turning point of an
/// up-then-down run and the final return to β_min).
pub fn hysteresis_gap<F: Scalar>(a: &FisherCurve<F>, b: &FisherCurve<F>) -> Result<F> {
    let left = &a.points;
    let right: Vec<_> = b.points.iter().rev().collect();
    if left.is_empty() || right.is_empty() {
        return Err(Error::InvalidInput("cannot compare empty curves".into()));
    }
    let descending = left.last().map(|p| p.beta) < left.first().map(|p| p.beta);
    let tol = F::of(BETA_MATCH_TOLERANCE);
    let (mut i, mut j) = (0, 0);
    let (mut unmatched_left, mut unmatched_right) = (0usize, 0usize);
    let mut total = F::zero();
    let mut pairs = 0usize;
    while i < left.len() && j < right.len() {
        let (x, y) = (left[i].beta, right[j].beta);
        if (x - y).abs() <= tol * F::one().max(x.abs()) {
            total = total + left[i].distance(right[j]);
            pairs += 1;
            i += 1;
            j += 1;
        } else if (x < y) != descending {
            unmatched_left += 1;
            i += 1;
        } else {
            unmatched_right += 1;
            j += 1;
        }
    }
    unmatched_left += left.len() - i;
    unmatched_right += right.len() - j;
    if pairs == 0 || unmatched_left > 1 || unmatched_right > 1 {
        return Err(Error::InvalidInput(format!(
            "curves are not on a common beta grid ({pairs} matched, {unmatched_left} and {unmatched_right} unmatched)"
        )));
    }
    Ok(total / F::from_count(pairs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveFormat {
    Csv,
    Json,
}

impl CurveFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CurveFormat::Csv => "csv",
            CurveFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for CurveFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(CurveFormat::Csv),
            "json" => Ok(CurveFormat::Json),
            other => Err(Error::InvalidInput(format!("unknown curve format {other:?}"))),
        }
    }
}

const CURVE_HEADER: [&str; 4] = ["beta", "i1", "i2", "h"];

#[derive(Serialize, Deserialize)]
struct JsonPoint {
    beta: f64,
    i1: f64,
    i2: f64,
    h: f64,
}

pub fn export_curve<F: Scalar>(curve: &FisherCurve<F>, format: CurveFormat) -> Result<Vec<u8>> {
    match format {
        CurveFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(CURVE_HEADER).map_err(csv_error)?;
            for p in &curve.points {
                writer
                    .write_record([p.beta, p.i1, p.i2, p.h].map(format_real))
                    .map_err(csv_error)?;
            }
            writer.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
        CurveFormat::Json => {
            let points: Vec<JsonPoint> = curve
                .points
                .iter()
                .map(|p| JsonPoint {
                    beta: p.beta.as_f64(),
                    i1: p.i1.as_f64(),
                    i2: p.i2.as_f64(),
                    h: p.h.as_f64(),
                })
                .collect();
            Ok(serde_json::to_vec_pretty(&points)?)
        }
    }
}

/// Inverse of [`export_curve`]. The file does not carry the component or
/// leg, so they are supplied by the caller.
pub fn parse_curve<F: Scalar>(
    bytes: &[u8],
    format: CurveFormat,
    component: Component,
    leg: Leg,
) -> Result<FisherCurve<F>> {
    let points = match format {
        CurveFormat::Csv => {
            let mut reader = csv::Reader::from_reader(bytes);
            let headers = reader.headers().map_err(csv_error)?.clone();
            if headers.iter().ne(CURVE_HEADER) {
                return Err(Error::Parse {
                    what: "curve",
                    line: 1,
                    reason: "expected header beta,i1,i2,h".into(),
                });
            }
            let mut points = Vec::new();
            for (k, row) in reader.records().enumerate() {
                let row = row.map_err(csv_error)?;
                let field = |i: usize| {
                    row.get(i).and_then(F::parse_decimal).ok_or_else(|| Error::Parse {
                        what: "curve",
                        line: k + 2,
                        reason: format!("bad {} value", CURVE_HEADER[i]),
                    })
                };
                points.push(CurvePoint {
                    beta: field(0)?,
                    i1: field(1)?,
                    i2: field(2)?,
                    h: field(3)?,
                });
            }
            points
        }
        CurveFormat::Json => {
            let raw: Vec<JsonPoint> = serde_json::from_slice(bytes)?;
            raw.into_iter()
                .map(|p| CurvePoint {
                    beta: F::of(p.beta),
                    i1: F::of(p.i1),
                    i2: F::of(p.i2),
                    h: F::of(p.h),
                })
                .collect()
        }
    };
    Ok(FisherCurve { component, leg, points })
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        what: "curve",
        line: e.position().map(|p| p.line() as usize).unwrap_or(0),
        reason: e.to_string(),
    }
}
