use clap::Parser;

fn main() {
    let cli = gaslab_cli::cli::Cli::parse();
    if let Err(e) = gaslab_cli::cli::run(cli) {
        eprintln!("gaslab: {e}");
        std::process::exit(e.exit_code());
    }
}
