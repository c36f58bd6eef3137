use clap::Parser;
use salmix::commands::{run, Cli};

fn main() -> anyhow::Result<()> {
    run(Cli::parse())?;
    Ok(())
}
