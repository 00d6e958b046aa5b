use clap::Parser;

fn main() {
    let cli = debias::cli::Cli::parse();
    std::process::exit(debias::cli::run(cli));
}
