//! Reads a CSV file, estimates grouped importance, and prints the JSON report.

use std::io::Write;

use vimkit::cli::{render_estimate, run_data, Cli, Command, Format};
use vimkit::rng::SimRng;
use vimkit::simulation::{generate, SimScenario};

fn main() -> vimkit::Result<()> {
    let dir = std::env::temp_dir().join(format!("vimkit-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let data = dir.join("data.csv");
    let groups = dir.join("groups.json");

    let d = generate(&SimScenario::scenario1(), 1_000, 17);
    let mut noise = SimRng::new(18);
    let mut f = std::fs::File::create(&data)?;
    writeln!(f, "x1,x2,noise,y")?;
    for i in 0..d.n() {
        let x = d.features();
        writeln!(f, "{},{},{},{}", x[(i, 0)], x[(i, 1)], noise.normal_pair().0, d.outcome()[i])?;
    }
    std::fs::write(
        &groups,
        r#"{"first": ["x1"], "second": ["x2"], "signal": ["x1", "x2"], "noise": ["noise"]}"#,
    )?;

    use clap::Parser;
    let cli = Cli::parse_from([
        "vimkit",
        "test",
        "--input",
        data.to_str().unwrap(),
        "--outcome",
        "y",
        "--groups",
        groups.to_str().unwrap(),
        "--measure",
        "auc",
        "--seed",
        "42",
    ]);
    let Command::Test(args) = &cli.command else {
        unreachable!()
    };
    let report = run_data(args, true)?;
    std::io::stdout().write_all(&render_estimate(&report, Format::Json)?)?;
    std::io::stdout().write_all(&render_estimate(&report, Format::Csv)?)?;
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
