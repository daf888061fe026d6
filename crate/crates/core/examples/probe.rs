//! Temporary tuning probe: executes a slice of the bundled manifest.
//! Usage: probe <workdir> <stage-prefix>...

use munmt::experiments::{bundled_manifest, execute_manifest, Budget, Stage};

fn main() {
    let mut args = std::env::args().skip(1);
    let workdir = std::path::PathBuf::from(args.next().expect("workdir"));
    let prefixes: Vec<String> = args.collect();
    let mut manifest = bundled_manifest(7, Budget::Full);
    manifest.stages.retain(|s| {
        matches!(s, Stage::Criteria { .. })
            || prefixes.iter().any(|p| s.name().starts_with(p.as_str()))
    });
    eprintln!("{} stages retained", manifest.stages.len());
    let report = execute_manifest(&manifest, &workdir).expect("execute");
    println!("--- metrics");
    for (k, v) in &report.metrics {
        println!("{k}\t{v:.4}");
    }
    println!("--- stage seconds");
    for (k, v) in &report.stage_seconds {
        println!("{k}\t{v:.1}");
    }
}
