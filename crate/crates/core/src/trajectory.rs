//! Per-step records of a schedule run and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::infogeo::{FisherTensor, SnapshotAnalysis, TensorKind};
use crate::sampler::Leg;
use crate::scalar::Scalar;

/// Column order of the trajectory file.
pub const TRAJECTORY_COLUMNS: [&str; 18] = [
    "iteration",
    "beta_set",
    "mu_hat",
    "sigma2_hat",
    "beta_mpl",
    "H",
    "g1_mumu",
    "g1_s2s2",
    "g1_s2b",
    "g1_bb",
    "g2_mumu",
    "g2_s2s2",
    "g2_s2b",
    "g2_bb",
    "upsilon_beta",
    "acceptance_rate",
    "leg",
    "degenerate",
];

/// Estimates from the snapshot produced at one schedule step.
///
/// Quantities that do not exist for a degenerate snapshot are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<F> {
    /// 1-based step index.
    pub iteration: usize,
    pub leg: Leg,
    pub beta_set: F,
    pub mu_hat: F,
    pub sigma2_hat: F,
    pub beta_mpl: F,
    pub entropy: F,
    pub g1: FisherTensor<F>,
    pub g2: FisherTensor<F>,
    pub upsilon_beta: F,
    pub acceptance_rate: F,
    pub degenerate: bool,
}

fn nan_tensor<F: Scalar>(kind: TensorKind) -> FisherTensor<F> {
    let nan = F::nan();
    FisherTensor {
        x: nan,
        y: nan,
        z: nan,
        w: nan,
        kind,
    }
}

impl<F: Scalar> TrajectoryRecord<F> {
    pub fn from_analysis(
        iteration: usize,
        leg: Leg,
        beta_set: F,
        acceptance_rate: F,
        analysis: &SnapshotAnalysis<F>,
    ) -> Self {
        let nan = F::nan();
        let mut record = Self {
            iteration,
            leg,
            beta_set,
            mu_hat: analysis.mean_var.mean,
            sigma2_hat: analysis.mean_var.variance,
            beta_mpl: nan,
            entropy: nan,
            g1: nan_tensor(TensorKind::TypeI),
            g2: nan_tensor(TensorKind::TypeII),
            upsilon_beta: nan,
            acceptance_rate,
            degenerate: true,
        };
        if let Some(est) = &analysis.estimate {
            record.beta_mpl = est.params.beta;
            record.entropy = est.entropy;
            record.g1 = est.g1;
            record.g2 = est.g2;
            record.upsilon_beta = est.upsilon_beta.unwrap_or(nan);
            record.degenerate = false;
        }
        record
    }

    fn numeric_fields(&self) -> [F; 15] {
        [
            self.beta_set,
            self.mu_hat,
            self.sigma2_hat,
            self.beta_mpl,
            self.entropy,
            self.g1.x,
            self.g1.y,
            self.g1.w,
            self.g1.z,
            self.g2.x,
            self.g2.y,
            self.g2.w,
            self.g2.z,
            self.upsilon_beta,
            self.acceptance_rate,
        ]
    }
}

/// Fixed 17-significant-digit scientific notation.
pub fn format_real<F: Scalar>(value: F) -> String {
    format!("{value:.16e}")
}

pub fn write_trajectory_csv<F: Scalar, W: Write>(records: &[TrajectoryRecord<F>], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(TRAJECTORY_COLUMNS).map_err(csv_error)?;
    for r in records {
        let mut row = Vec::with_capacity(TRAJECTORY_COLUMNS.len());
        row.push(r.iteration.to_string());
        row.extend(r.numeric_fields().iter().map(|&v| format_real(v)));
        row.push(r.leg.as_str().to_string());
        row.push(u8::from(r.degenerate).to_string());
        writer.write_record(&row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn trajectory_to_csv_string<F: Scalar>(records: &[TrajectoryRecord<F>]) -> Result<String> {
    let mut buf = Vec::new();
    write_trajectory_csv(records, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::InvalidInput(e.to_string()))
}

pub fn read_trajectory_csv<F: Scalar, R: Read>(input: R) -> Result<Vec<TrajectoryRecord<F>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.iter().ne(TRAJECTORY_COLUMNS.iter().copied()) {
        return Err(Error::Parse {
            what: "trajectory",
            line: 1,
            reason: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    let mut records = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let line = k + 2;
        let row = row.map_err(csv_error)?;
        let bad = |reason: String| Error::Parse {
            what: "trajectory",
            line,
            reason,
        };
        if row.len() != TRAJECTORY_COLUMNS.len() {
            return Err(bad(format!("expected {} fields, got {}", TRAJECTORY_COLUMNS.len(), row.len())));
        }
        let iteration = row[0]
            .parse::<usize>()
            .map_err(|e| bad(format!("iteration {:?}: {e}", &row[0])))?;
        let mut v = [F::zero(); 15];
        for (i, slot) in v.iter_mut().enumerate() {
            let text = &row[i + 1];
            *slot = F::parse_decimal(text)
                .ok_or_else(|| bad(format!("{} {text:?} is not a number", TRAJECTORY_COLUMNS[i + 1])))?;
        }
        let leg = row[16].parse::<Leg>().map_err(|e| bad(e.to_string()))?;
        let degenerate = match &row[17] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("degenerate flag {other:?}"))),
        };
        records.push(TrajectoryRecord {
            iteration,
            leg,
            beta_set: v[0],
            mu_hat: v[1],
            sigma2_hat: v[2],
            beta_mpl: v[3],
            entropy: v[4],
            g1: FisherTensor {
                x: v[5],
                y: v[6],
                w: v[7],
                z: v[8],
                kind: TensorKind::TypeI,
            },
            g2: FisherTensor {
                x: v[9],
                y: v[10],
                w: v[11],
                z: v[12],
                kind: TensorKind::TypeII,
            },
            upsilon_beta: v[13],
            acceptance_rate: v[14],
            degenerate,
        });
    }
    Ok(records)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        what: "trajectory",
        line,
        reason: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GOLDEN_HEADER: &str = "iteration,beta_set,mu_hat,sigma2_hat,beta_mpl,H,g1_mumu,g1_s2s2,g1_s2b,g1_bb,\
g2_mumu,g2_s2s2,g2_s2b,g2_bb,upsilon_beta,acceptance_rate,leg,degenerate";

    fn record(values: [f64; 15], leg: Leg, degenerate: bool) -> TrajectoryRecord<f64> {
        TrajectoryRecord {
            iteration: 3,
            leg,
            beta_set: values[0],
            mu_hat: values[1],
            sigma2_hat: values[2],
            beta_mpl: values[3],
            entropy: values[4],
            g1: FisherTensor { x: values[5], y: values[6], w: values[7], z: values[8], kind: TensorKind::TypeI },
            g2: FisherTensor { x: values[9], y: values[10], w: values[11], z: values[12], kind: TensorKind::TypeII },
            upsilon_beta: values[13],
            acceptance_rate: values[14],
            degenerate,
        }
    }

    #[test]
    fn header_is_frozen() {
        let text = trajectory_to_csv_string::<f64>(&[]).unwrap();
        assert_eq!(text.trim_end(), GOLDEN_HEADER);
    }

    #[test]
    fn golden_row() {
        let values = std::array::from_fn(|i| i as f64 * 0.5);
        let text = trajectory_to_csv_string(&[record(values, Leg::Forward, false)]).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert!(row.starts_with("3,0.0000000000000000e0,5.0000000000000000e-1,1.0000000000000000e0,"));
        assert!(row.ends_with(",forward,0"));
    }

    #[test]
    fn nan_fields_round_trip() {
        let mut values = [1.0; 15];
        values[3] = f64::NAN;
        let text = trajectory_to_csv_string(&[record(values, Leg::Backward, true)]).unwrap();
        let back: Vec<TrajectoryRecord<f64>> = read_trajectory_csv(text.as_bytes()).unwrap();
        assert!(back[0].beta_mpl.is_nan());
        assert!(back[0].degenerate);
        assert_eq!(back[0].leg, Leg::Backward);
    }

    #[test]
    fn rejects_malformed() {
        assert!(read_trajectory_csv::<f64, _>("a,b\n1,2\n".as_bytes()).is_err());
        let good = trajectory_to_csv_string(&[record([1.0; 15], Leg::Forward, false)]).unwrap();
        let broken = good.replace(",forward,", ",sideways,");
        assert!(read_trajectory_csv::<f64, _>(broken.as_bytes()).is_err());
        let broken = good.replacen("1.0000000000000000e0", "one", 1);
        assert!(matches!(
            read_trajectory_csv::<f64, _>(broken.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            values in proptest::array::uniform15(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO),
            forward in any::<bool>(),
            degenerate in any::<bool>(),
        ) {
            let leg = if forward { Leg::Forward } else { Leg::Backward };
            let original = record(values, leg, degenerate);
            let text = trajectory_to_csv_string(std::slice::from_ref(&original)).unwrap();
            let back: Vec<TrajectoryRecord<f64>> = read_trajectory_csv(text.as_bytes()).unwrap();
            prop_assert_eq!(back.len(), 1);
            let bits = |r: &TrajectoryRecord<f64>| r.numeric_fields().map(f64::to_bits);
            prop_assert_eq!(bits(&back[0]), bits(&original));
            prop_assert_eq!(back[0].leg, leg);
            prop_assert_eq!(back[0].degenerate, degenerate);
        }
    }
}
