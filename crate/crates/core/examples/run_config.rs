// Driving the command-line workflow from code: write a config, run a sweep
// and a validation pass.

use std::io::Write;

pub fn run_example() -> riskalloc::Result<()> {
    let dir = std::env::temp_dir().join(format!("riskalloc-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| riskalloc::Error::Domain(e.to_string()))?;
    let config = dir.join("fgm.json");
    let csv = dir.join("fgm.csv");
    let text = r#"{
  "model": {"kind": "fgm_exponential", "beta1": 0.05, "beta2": 0.25, "theta": 0.0},
  "capital": 50,
  "samples": 100000,
  "seed": 1,
  "sweep": {"parameter": "theta", "grid": {"start": -1, "stop": 1, "step": 0.5}}
}"#;
    std::fs::write(&config, text).map_err(|e| riskalloc::Error::Domain(e.to_string()))?;

    let mut out = Vec::new();
    let mut err = Vec::new();
    for cmd in ["sweep", "validate"] {
        let args = ["riskalloc", cmd, "--config", config.to_str().unwrap(), "--out", csv.to_str().unwrap()];
        let args: Vec<&str> = if cmd == "sweep" { args.to_vec() } else { args[..4].to_vec() };
        let code = riskalloc::cli::run(args, &mut out, &mut err);
        println!("{cmd} exited with {code}");
    }
    std::io::stdout().write_all(&out).ok();
    print!("{}", std::fs::read_to_string(&csv).unwrap_or_default());
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

fn main() {
    run_example().expect("config example");
}
