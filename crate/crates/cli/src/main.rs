use clap::Parser;
use fairlab_cli::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = fairlab_cli::configure_threads() {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
    match fairlab_cli::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}
