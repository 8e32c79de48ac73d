use clap::Parser;

fn main() {
    let cli = driftlab::Cli::parse();
    match driftlab::run(cli) {
        Ok(Some(manifest)) => eprintln!("wrote {}", manifest.display()),
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
