//! Runs a built-in scenario through the library and writes its artifacts.
//!
//! `cargo run --example scenario_runner -- comparison-fixed-time /tmp/out`

use std::path::PathBuf;

use outstab::scenario::{builtin_scenario, default_out_dir, list_scenarios, run};

fn main() -> outstab::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "comparison-finite-time".into());
    let out = args.next().map(PathBuf::from).unwrap_or_else(default_out_dir);
    println!("built-ins: {}", list_scenarios().iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "));
    let sc = builtin_scenario(&name)?;
    let (summary, dir) = run(&sc, &out)?;
    for r in &summary.runs {
        println!("x0 = {:?}: settled {} at {:?}", r.x0, r.settled, r.t_settle);
    }
    for b in &summary.bounds {
        println!("{} = {:.6}", b.name, b.value);
    }
    println!("wrote {}", dir.display());
    Ok(())
}
