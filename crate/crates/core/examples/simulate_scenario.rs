//! Simulates a piecewise-stationary Hawkes process and prints per-regime
//! event rates.

use hawkes_cpd::sim::{reference_scenario, simulate_scenario};

fn main() -> hawkes_cpd::Result<()> {
    let scenario = reference_scenario(4, 3, 5_000.0, 0.3, 1)?;
    let (events, changes) = simulate_scenario(&scenario)?;
    println!("horizon {}, change times {changes:?}", events.horizon());
    let mut start = 0.0;
    for (k, seg) in scenario.segments.iter().enumerate() {
        let part = events.restrict(start, start + seg.duration)?;
        let rates: Vec<String> = part
            .counts()
            .iter()
            .map(|&c| format!("{:.3}", c as f64 / seg.duration))
            .collect();
        println!(
            "regime {k}: spectral radius {:.3}, rates [{}]",
            seg.params.spectral_radius(),
            rates.join(", ")
        );
        start += seg.duration;
    }
    Ok(())
}
