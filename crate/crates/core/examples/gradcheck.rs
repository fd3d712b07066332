//! Runs the built-in finite-difference suite, then checks a hand-written
//! op whose backward is deliberately wrong.
//!
//! cargo run --example gradcheck

use rast3d::error::Result;
use rast3d::grad::{fd_check, FdOptions, FnOp};
use rast3d::ops::{gradcheck_suite, run_gradcheck, GRADCHECK_TOLERANCE};

fn main() -> Result<()> {
    let results = run_gradcheck(
        &gradcheck_suite(0)?,
        FdOptions::default(),
        GRADCHECK_TOLERANCE,
    )?;
    for r in &results {
        println!(
            "{:<36} {:.2e} {}",
            r.report.op,
            r.report.max_rel_error,
            if r.passed { "ok" } else { "FAIL" }
        );
    }

    let square = FnOp::new(
        "sum of squares",
        |x: &[f64]| Ok(vec![x.iter().map(|v| v * v).sum()]),
        |x: &[f64], g: &[f64]| Ok(x.iter().map(|v| 2.0 * v * g[0]).collect()),
    );
    let broken = FnOp::new(
        "sum of squares, broken backward",
        |x: &[f64]| Ok(vec![x.iter().map(|v| v * v).sum()]),
        |x: &[f64], g: &[f64]| Ok(x.iter().map(|v| 2.1 * v * g[0]).collect()),
    );
    let x = [0.3, -1.2, 0.8, 2.0];
    for op in [&square as &dyn rast3d::grad::DifferentiableOp, &broken] {
        let r = fd_check(op, &x, FdOptions::default())?;
        println!("{:<36} {:.2e}", r.op, r.max_rel_error);
    }
    Ok(())
}
