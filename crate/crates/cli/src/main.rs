use clap::Parser;

fn main() {
    let cli = ttlc_cli::Cli::parse();
    if let Err(e) = ttlc_cli::run(cli) {
        eprintln!("error[{}]: {e}", e.category());
        std::process::exit(e.exit_code());
    }
}
