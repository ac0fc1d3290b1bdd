use clap::Parser;

fn main() {
    let cli = parity_lab::Cli::parse();
    std::process::exit(parity_lab::main_with(cli));
}
