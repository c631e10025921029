//! A small reference sweep written as CSV, then summarized.

use multicast_precoding::bench::{run_sweep, summarize, write_rows, write_summary, Experiment, Sweep};
use multicast_precoding::model::LogBase;

fn main() -> multicast_precoding::Result<()> {
    let sweep = Sweep {
        grid: vec![5.0, 10.0],
        trials: 5,
        ..Sweep::defaults(Experiment::Tc4)
    };
    let rows = run_sweep(&sweep)?;
    let mut csv = Vec::new();
    write_rows(&mut csv, &sweep, &rows, LogBase::Bits)?;
    let summary = summarize(&csv[..])?;
    write_summary(std::io::stdout().lock(), &summary)?;
    Ok(())
}
