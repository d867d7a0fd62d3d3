use std::process::ExitCode;

use mmrabi::{parse_args, run, Command};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let spec = match parse_args(&args) {
        Ok(Command::Run(spec)) => spec,
        Ok(Command::Help(scenario)) => {
            print!("{}", mmrabi::config::usage(scenario));
            return ExitCode::SUCCESS;
        }
        Ok(Command::List) => {
            for s in mmrabi::Scenario::ALL {
                println!("{}", s.id());
            }
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&spec) {
        Ok(manifest) => {
            for c in &manifest.checks {
                println!("{:<4} {:<36} {:.6e}  {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.value, c.detail);
            }
            println!("wrote {} files to {} in {:.2} s", manifest.outputs.len(), spec.out_dir.display(), manifest.wall_time_s);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("partial manifest: {}", spec.out_dir.join(mmrabi::manifest::MANIFEST_NAME).display());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
