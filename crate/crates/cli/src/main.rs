use clap::Parser;

fn main() {
    std::process::exit(polyheat_cli::main_with(polyheat_cli::Cli::parse()));
}
