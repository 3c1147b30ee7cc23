//! Recovers the kernel-norm matrix of a three-dimensional Hawkes process from
//! its integrated cumulants.

use hawkes_cpd::cumulants::{
    estimate_cumulants, mean_inter_event_time, select_w, DEFAULT_W_MULTIPLE,
};
use hawkes_cpd::nphc::{fit_r, NphcConfig};
use hawkes_cpd::sim::{simulate, HawkesParams};
use nalgebra::{DMatrix, DVector};

fn main() -> hawkes_cpd::Result<()> {
    let h = DMatrix::from_row_slice(3, 3, &[0.2, 0.3, 0.0, 0.0, 0.1, 0.3, 0.3, 0.0, 0.2]);
    let params = HawkesParams::from_kernel_matrix(DVector::from_element(3, 0.2), &h, 1.0)?;
    let stream = simulate(&params, 1e6, 11)?;
    let delta = mean_inter_event_time(&stream).expect("events were simulated");
    let w = select_w(&stream, delta, DEFAULT_W_MULTIPLE)?.w;
    let fit = fit_r(
        &estimate_cumulants(&stream, w)?,
        &NphcConfig {
            max_iters: 20_000,
            ..NphcConfig::default()
        },
    )?;
    println!("true H{:.3}", h);
    println!("fitted H{:.3}", fit.h);
    println!(
        "max abs error {:.3}, loss {:.2e}, {} iterations, spectral radius {:.3}",
        (&fit.h - &h).abs().max(),
        fit.fit_loss,
        fit.iterations,
        fit.spectral_radius
    );
    Ok(())
}
