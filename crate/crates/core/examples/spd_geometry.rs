//! Maps causal networks to SPD matrices and measures them with the
//! Log-Euclidean metric.

use hawkes_cpd::geometry::{
    causal_snapshot, frechet_mean_points, frechet_variance_points, SPD_FLOOR_REL,
};
use nalgebra::DMatrix;

fn main() -> hawkes_cpd::Result<()> {
    let excitatory = DMatrix::from_row_slice(3, 3, &[0.1, 0.3, 0.0, 0.3, 0.1, 0.2, 0.0, 0.2, 0.1]);
    let inhibitory =
        DMatrix::from_row_slice(3, 3, &[0.1, -0.3, 0.0, -0.3, 0.1, 0.2, 0.0, 0.2, 0.1]);
    let a = causal_snapshot(0, &excitatory, SPD_FLOOR_REL)?;
    let b = causal_snapshot(1, &inhibitory, SPD_FLOOR_REL)?;
    println!(
        "signed Laplacian of the excitatory network{:.3}",
        a.laplacian
    );
    println!("floor {:.2e} applied: {}", a.spd_floor, a.floor_applied);
    println!(
        "distance between networks {:.4}",
        a.point.distance(&b.point)
    );
    let points = [a.point, b.point];
    let mean = frechet_mean_points(&points)?;
    println!("Fréchet mean{:.3}", mean.spd());
    println!(
        "Fréchet variance {:.4}",
        frechet_variance_points(&points, &mean)?
    );
    Ok(())
}
