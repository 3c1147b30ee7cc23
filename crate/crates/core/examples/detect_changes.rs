//! Detects a shift in a sequence of SPD matrices with both threshold
//! calibrations.

use hawkes_cpd::changepoint::{Calibration, CpConfig, Detector};
use hawkes_cpd::geometry::SpdPoint;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> hawkes_cpd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shift = DMatrix::from_row_slice(3, 3, &[0.6, 0.2, 0.0, 0.2, -0.4, 0.0, 0.0, 0.0, 0.3]);
    let points = (0..80)
        .map(|i| {
            let noise = DMatrix::from_fn(3, 3, |_, _| {
                0.15 * Distribution::<f64>::sample(&StandardNormal, &mut rng)
            });
            let log = (&noise + noise.transpose()) * 0.5
                + if i >= 50 {
                    shift.clone()
                } else {
                    DMatrix::zeros(3, 3)
                };
            SpdPoint::from_log(log)
        })
        .collect::<hawkes_cpd::Result<Vec<_>>>()?;
    for calibration in [Calibration::default(), Calibration::Asymptotic] {
        let config = CpConfig {
            calibration,
            ..CpConfig::default()
        };
        let report = Detector::new(config, 7)?.detect_multiple(&points)?;
        println!("{calibration:?}: changes {:?}", report.change_indices);
        for seg in report.tested_segments() {
            println!(
                "  [{}, {}) sup nT {:.2} vs threshold {:.2}",
                seg.start, seg.end, seg.sup_stat, seg.threshold
            );
        }
    }
    Ok(())
}
