//! Flow-driven versus LK tracking across a sudden brightness change, through
//! the command-line harness functions.

use flowtrack::cli::{cmd_compare, cmd_gen};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("flowtrack_illum_{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let spec = dir.join("seq.txt");
    std::fs::write(
        &spec,
        "width = 752\nheight = 480\nframes = 20\nseed = 1\nfps = 20\ntranslation = 1.5 1.0\nrotation = 0.002\nillum_step = 10 1 60\n",
    )?;
    let config = dir.join("cfg.txt");
    std::fs::write(
        &config,
        "fx = 460\nfy = 460\ncx = 376\ncy = 240\nk1 = -0.28\nk2 = 0.07\np1 = 0.0002\np2 = 0.00002\nprovider = gt\n",
    )?;
    let data = dir.join("data");
    cmd_gen(&spec, &data, Some(&config))?;
    let report = cmd_compare(&config, &data, &dir.join("compare.csv"))?;
    print!("{}", report.table());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
