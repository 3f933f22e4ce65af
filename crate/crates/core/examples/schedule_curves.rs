//! Mixing ratio p(t) of the supported schedule patterns, their regime
//! classification, and a PNG/TSV plot of one of them.
//!
//! cargo run --example schedule_curves -- [out.png]

use svs_joint::plot::plot_schedule;
use svs_joint::schedule::{classify_schedule, evaluate_schedule, ScheduleConfig};

fn main() -> svs_joint::Result<()> {
    let t_max = 20;
    let schedules = [
        ("two-stage", ScheduleConfig::two_stage(t_max)),
        ("jt-scratch", ScheduleConfig::jt_scratch(t_max)),
        ("step", ScheduleConfig::step(5, t_max)),
        ("linear", ScheduleConfig::linear(0.8, 4, 16, t_max)),
        ("logistic", ScheduleConfig::logistic(1.0, 0.6, 4, 16, t_max)),
    ];
    print!("epoch");
    for (name, _) in &schedules {
        print!("\t{name}");
    }
    println!();
    for epoch in (0..t_max).step_by(2) {
        print!("{epoch}");
        for (_, s) in &schedules {
            print!("\t{:.3}", evaluate_schedule(s, epoch)?.p);
        }
        println!();
    }
    for (name, s) in &schedules {
        println!("{name}: {}", classify_schedule(s)?.as_str());
    }

    let png = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("logistic_schedule.png"));
    let points = plot_schedule(&schedules[4].1, 100, &png)?;
    println!("{} points written to {} (+ .tsv)", points.len(), png.display());
    Ok(())
}
