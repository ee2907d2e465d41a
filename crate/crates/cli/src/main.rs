use clap::Parser;

fn main() {
    let cli = dgc_cli::Cli::parse();
    std::process::exit(dgc_cli::run(cli));
}
