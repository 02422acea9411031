use clap::Parser;

fn main() {
    let cli = ubsr_cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match ubsr_cli::run(cli, &mut stdout) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
