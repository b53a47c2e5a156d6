//! Load a TOML configuration and run one mode, as the command-line tool
//! does. Usage: `config_run <config.toml> [out_dir]`.

use std::path::PathBuf;

use eidsim::config::LoadedConfig;

fn main() -> eidsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(
        args.next()
            .unwrap_or_else(|| "configs/stirap_hold.toml".into()),
    );
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/config_run".into()));
    let cfg = LoadedConfig::from_path(&path)?;
    cfg.validate()?;
    println!("{} sha256 {}", path.display(), cfg.hash());
    let summary = eidsim::run::run(cfg.config.run.mode, &cfg, &out)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("serializable")
    );
    Ok(())
}
