use clap::Parser;

fn main() {
    let cli = advframe::cli::Cli::parse();
    if let Err(e) = advframe::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
