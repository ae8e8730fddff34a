use clap::Parser;

use twinbft_cli::options::Cli;
use twinbft_cli::{execute, load_scenarios};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                eprint!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };

    let result = (|| {
        let overrides = cli.overrides()?;
        let preset = cli.parsed_preset()?;
        let scenarios = load_scenarios(cli.config.as_deref(), preset, &overrides)?;
        execute(&scenarios, preset, &cli.out, cli.trace)?;
        Ok::<_, twinbft_cli::CliError>(())
    })();

    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
