//! Estimates integrated cumulants of a bivariate Hawkes process and compares
//! them with their closed forms.

use hawkes_cpd::cumulants::{
    estimate_cumulants, mean_inter_event_time, select_w, DEFAULT_W_MULTIPLE,
};
use hawkes_cpd::nphc::{cumulants_from_r, r_from_kernel_matrix};
use hawkes_cpd::sim::{simulate, HawkesParams};
use nalgebra::{DMatrix, DVector};

fn main() -> hawkes_cpd::Result<()> {
    let h = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.25]);
    let mu = DVector::from_element(2, 0.3);
    let params = HawkesParams::from_kernel_matrix(mu.clone(), &h, 1.0)?;
    let stream = simulate(&params, 2e5, 3)?;

    let delta = mean_inter_event_time(&stream).expect("events were simulated");
    let selection = select_w(&stream, delta, DEFAULT_W_MULTIPLE)?;
    println!(
        "W = {:.3} (correlation time {:.3})",
        selection.w, selection.tau_c
    );
    let est = estimate_cumulants(&stream, selection.w)?;

    let r = r_from_kernel_matrix(&h)?;
    let lambda = &r * &mu;
    let (c, kc) = cumulants_from_r(&r, &lambda);
    println!(
        "Λ estimate {:.4}  exact {:.4}",
        est.lambda.transpose(),
        lambda.transpose()
    );
    println!("C estimate {:.4}C exact {:.4}", est.c, c);
    println!("Kc estimate {:.4}Kc exact {:.4}", est.kc, kc);
    Ok(())
}
