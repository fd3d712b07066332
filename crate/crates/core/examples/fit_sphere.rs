//! Deforms an ico-sphere to match two-view silhouettes of a smaller sphere,
//! then four-view silhouettes of a cube. Pass `cube` to run only the cube.
//!
//! cargo run --release --example fit_sphere

use rast3d::config::{FitConfig, MeshSource, MeshTemplate};
use rast3d::error::Result;
use rast3d::fit::run_fit;

fn report(name: &str, c: &FitConfig) -> Result<()> {
    let t = std::time::Instant::now();
    let r = run_fit(c, |rec| {
        if rec.iter % 100 == 0 {
            println!(
                "  {name} iter {:>4}: L_s {:.4}  L_l {:.4}  L_e {:.4}",
                rec.iter, rec.l_s, rec.l_l, rec.l_e
            );
        }
    })?;
    println!(
        "{name}: final L_s {:.4} after {} iterations in {:.1?}",
        r.final_l_s,
        c.iters,
        t.elapsed()
    );
    Ok(())
}

fn main() -> Result<()> {
    let cube_only = std::env::args().nth(1).as_deref() == Some("cube");
    if !cube_only {
        report("sphere×0.7", &FitConfig::default())?;
    }
    let cube = FitConfig {
        target: MeshSource::Template(MeshTemplate::Cube(4)),
        target_scale: 1.0,
        views: 4,
        iters: 1000,
        ..FitConfig::default()
    };
    report("cube", &cube)
}
