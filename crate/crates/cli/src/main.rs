use clap::Parser;
use dynregimes_cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(manifest) => {
            for (k, v) in manifest.results() {
                println!("{k} = {v}");
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}
