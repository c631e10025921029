//! The multiplicative-weights greedy on its own: maximize the truncated
//! residual-progress function over two slots under rank and power packing
//! constraints.

use multicast_precoding::delay_disc::{build_knapsack, default_lambda, greedy_knapsack, FContext};
use multicast_precoding::discrete::Budget;
use multicast_precoding::model::{generate_base_codebook, generate_rayleigh, CodebookKind, GroundSet, RateTable};

fn main() -> multicast_precoding::Result<()> {
    let (p, d) = (4.0, 2);
    let ch = generate_rayleigh(6, 3, 2, &[1; 3], 2)?;
    let base = generate_base_codebook(CodebookKind::Dft, 2, 4)?;
    let ground = GroundSet::with_power_levels(&base, &[1.0, 2.0, 4.0])?;
    let table = RateTable::new(&ch, &ground)?;
    let knap = build_knapsack(&ground, 2, d, p)?;
    println!("A is {}x{}, width {}", knap.a.nrows(), knap.a.ncols(), knap.width());

    // user 2 already holds 40% of the threshold
    let ctx = FContext::new(&table, vec![0, 1, 2], &[0.0, 0.0, 0.4], &[0.3, 0.3, 0.4], 6.0)?;
    let out = greedy_knapsack(&ctx, &knap, default_lambda(&ctx.concat()), &Budget::power(p).with_rank(d))?;
    println!("selected {:?} ({:?}), expanded {:?}", out.selected, out.repair, ctx.concat().per_slot(&out.ids));
    println!("f = {:.4}, load {:?}", out.value, knap.load(&out.ids).as_slice());
    Ok(())
}
