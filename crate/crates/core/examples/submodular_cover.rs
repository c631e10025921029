//! Minimum-power cover of a truncated average rate level: greedy with naive
//! and lazy scans against the exhaustive optimum.

use multicast_precoding::discrete::{greedy_cover, min_power_cover, Scan, TruncatedAverage};
use multicast_precoding::model::{generate_base_codebook, generate_rayleigh, CodebookKind, GroundSet, RateTable};

fn main() -> multicast_precoding::Result<()> {
    let ch = generate_rayleigh(4, 3, 2, &[1, 1, 1], 1)?;
    let base = generate_base_codebook(CodebookKind::RandomIsotropic { seed: 4 }, 2, 4)?;
    let ground = GroundSet::with_power_levels(&base, &[0.5, 1.0, 2.0])?;
    let table = RateTable::new(&ch, &ground)?;

    for level in [0.5, 1.0, 1.5] {
        let trunc = TruncatedAverage::new(&table, level)?;
        let naive = greedy_cover(&trunc, 0.1, None, Scan::Naive)?;
        let lazy = greedy_cover(&trunc, 0.1, None, Scan::Lazy)?;
        assert_eq!(naive.ids, lazy.ids);
        match min_power_cover(&trunc, level)? {
            Some((ids, p)) => println!("level {level}: greedy power {:.3} {:?}, optimum {:.3} {:?}", lazy.power, lazy.ids, p, ids),
            None => println!("level {level}: not reachable, greedy power {:.3}", lazy.power),
        }
    }
    Ok(())
}
