//! Prints the default run config as TOML.

fn main() {
    let mut cfg = smartema_cli::RunConfig::default();
    cfg.seed = Some(0);
    print!("{}", cfg.to_toml());
}
