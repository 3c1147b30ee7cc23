//! Runs simulation, windowed estimation and change detection end to end and
//! writes the report files.

use hawkes_cpd::events::WindowSpec;
use hawkes_cpd::pipeline::{run_pipeline, PipelineConfig};
use hawkes_cpd::report::render_report;
use hawkes_cpd::sim::{reference_scenario, simulate_scenario};

fn main() -> hawkes_cpd::Result<()> {
    let scenario = reference_scenario(5, 3, 20_000.0, 0.3, 4)?;
    let (events, change_times) = simulate_scenario(&scenario)?;
    let config = PipelineConfig {
        window: WindowSpec::new(2_000.0, 1_000.0)?,
        ..PipelineConfig::default()
    };
    let truth: Vec<usize> = change_times
        .iter()
        .map(|&t| config.window.index_of_time(t))
        .collect();
    let out = run_pipeline(&config, &events)?;
    println!("{} windows, W = {:.3}", out.windows.len(), out.half_width.w);
    println!(
        "true change windows {truth:?}, detected {:?}",
        out.report.change_indices
    );
    let dir = std::env::temp_dir().join("hawkes-cpd-example");
    for path in render_report(&out, &dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
