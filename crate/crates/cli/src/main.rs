use clap::Parser;

fn main() {
    let cli = daxiot_cli::Cli::parse();
    let stdout = std::io::stdout();
    if let Err(e) = daxiot_cli::run(cli, &mut stdout.lock()) {
        eprintln!("daxiot: {e}");
        std::process::exit(e.exit_code());
    }
}
