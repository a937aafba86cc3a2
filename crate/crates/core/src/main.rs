use clap::Parser;

fn main() {
    let cli = dnest::cli::Cli::parse();
    if let Err(err) = dnest::cli::execute(cli) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
