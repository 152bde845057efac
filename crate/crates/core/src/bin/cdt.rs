use clap::Parser;

fn main() {
    let cli = cdt_core::cli::Cli::parse();
    std::process::exit(cdt_core::cli::main_with(cli));
}
