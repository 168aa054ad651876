use clap::Parser;

fn main() {
    let cli = tailcop_cli::Cli::parse();
    if let Err(e) = tailcop_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
