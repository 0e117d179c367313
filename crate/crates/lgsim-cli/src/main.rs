use clap::Parser;

fn main() {
    let cli = lgsim_cli::Cli::parse();
    std::process::exit(lgsim_cli::execute(&cli));
}
