//! Max-min rate over a concatenated codebook: simple greedy, saturation
//! bisection, exhaustive search and the fractional upper bound.

use multicast_precoding::conic::solve_fractional_bound;
use multicast_precoding::discrete::{brute_force_maxmin, saturation_bisection, simple_greedy, BisectionConfig, Budget};
use multicast_precoding::model::{generate_base_codebook, generate_rayleigh, CodebookKind, GroundSet};

fn main() -> multicast_precoding::Result<()> {
    let p = 10.0;
    let ch = generate_rayleigh(9, 3, 4, &[2, 2, 2], 1)?;
    // small enough for exhaustive search
    let base = generate_base_codebook(CodebookKind::Dft, 4, 4)?;
    let ground = GroundSet::with_power_levels(&base, &[p / 4.0, p / 2.0, p])?;
    let budget = Budget::power(p);

    let greedy = simple_greedy(&ground, &ch, &budget)?;
    let bis = saturation_bisection(&ground, &ch, p, &BisectionConfig::default())?;
    let brute = brute_force_maxmin(&ground, &ch, &budget)?;
    let bound = solve_fractional_bound(&ground, &ch, p, 1e-8)?;

    println!("simple greedy   {:.5}  ids {:?}", greedy.min_rate, greedy.ids);
    println!("bisection       {:.5}  ids {:?}  ({} cover calls)", bis.result.min_rate, bis.result.ids, bis.cover_calls);
    println!("exhaustive      {:.5}  ids {:?}", brute.min_rate, brute.ids);
    println!("fractional bnd  {:.5}", bound.upper);

    let guaranteed = saturation_bisection(&ground, &ch, p, &BisectionConfig::guarantee(3))?;
    println!(
        "bicriteria mode {:.5} using power {:.3} (budget {p}, inflation {:.3})",
        guaranteed.result.min_rate,
        guaranteed.result.power,
        BisectionConfig::guarantee(3).inflation()
    );
    Ok(())
}
