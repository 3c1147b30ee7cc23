//! Turns price paths into threshold-crossing events.

use hawkes_cpd::events::{prices_to_events, PriceSeries};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> hawkes_cpd::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let paths = [0.0005, 0.001, 0.002]
        .iter()
        .map(|&vol| {
            let step = Normal::new(0.0, vol).expect("positive volatility");
            let mut price = 100.0_f64;
            (0..5_000)
                .map(|k| {
                    price *= 1.0 + step.sample(&mut rng);
                    (k as f64, price)
                })
                .collect()
        })
        .collect();
    let events = prices_to_events(&PriceSeries::new(paths)?, 0.002)?;
    println!(
        "horizon {}, events per instrument {:?}",
        events.horizon(),
        events.counts()
    );
    Ok(())
}
