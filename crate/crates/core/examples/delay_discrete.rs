//! Weighted sum delay over a discrete codebook: interval-by-interval cover
//! with the multiplicative-weights knapsack greedy, and the exhaustive
//! optimum on a tiny instance.

use multicast_precoding::delay_cont::DelayInstance;
use multicast_precoding::delay_disc::{brute_force_delay, delay_cover, feasible_codewords, CoverConfig};
use multicast_precoding::discrete::Budget;
use multicast_precoding::model::{generate_base_codebook, generate_rayleigh, CodebookKind, GroundSet};

fn main() -> multicast_precoding::Result<()> {
    let p = 10.0;
    let ch = generate_rayleigh(8, 3, 4, &[1; 3], 1)?;
    let base = generate_base_codebook(CodebookKind::Dft, 4, 4)?;
    let ground = GroundSet::with_power_levels(&base, &[p / 8.0, p / 4.0, p / 2.0, p])?;
    let inst = DelayInstance::uniform(ch, 5.0, p, 2)?;
    let budget = Budget::power(p).with_rank(2);
    let feasible = feasible_codewords(inst.channels(), &ground, &budget, 0.01)?;
    let s = delay_cover(&inst, &ground, &feasible, &CoverConfig::default())?;
    println!("intervals {:?}", s.intervals);
    println!("delays {:?} objective {:.4}", s.outcome.delays, s.outcome.objective);
    println!("repetitions {} (cap {}), knapsack feasible: {}", s.max_repetition, s.repetition_cap, s.knapsack_feasible);

    // a three-codeword instance has few maximal sets
    let ch = generate_rayleigh(2, 3, 2, &[1; 3], 1)?;
    let base = generate_base_codebook(CodebookKind::RandomIsotropic { seed: 2 }, 2, 3)?;
    let ground = GroundSet::with_power_levels(&base, &[1.0])?;
    let inst = DelayInstance::uniform(ch, 2.0, 2.0, 2)?;
    let budget = Budget::power(2.0).with_rank(2);
    let feasible = feasible_codewords(inst.channels(), &ground, &budget, 0.01)?;
    let s = delay_cover(&inst, &ground, &feasible, &CoverConfig::default())?;
    if let Some((opt, seq)) = brute_force_delay(&inst, &ground, 8, 6)? {
        println!("tiny instance: cover {:.4}, optimum {:.4} via {:?}", s.outcome.objective, opt, seq);
    }
    Ok(())
}
