//! One precoder step: fix the receive filters and slack matrices at a
//! starting precoder and solve the max-min SOCP for a better one.

use multicast_precoding::caa::{random_precoder, rates_of};
use multicast_precoding::conic::{solve_maxmin_socp, MaxMinSocp, UserBlock};
use multicast_precoding::model::generate_rayleigh;

fn main() -> multicast_precoding::Result<()> {
    let (k, m, d, p) = (4, 4, 2, 10.0);
    let ch = generate_rayleigh(11, k, m, &vec![1; k], 1)?;
    let hs: Vec<_> = (0..k).map(|u| ch.channel(u, 0)).collect();
    let w0 = random_precoder(m, d, p, 5);

    let blocks = hs.iter().map(|h| UserBlock::at(h, &w0)).collect::<Result<Vec<_>, _>>()?;
    let prob = MaxMinSocp::new(blocks, p, m, d)?;
    let sol = solve_maxmin_socp(&prob, 1e-7)?;

    let before = rates_of(&hs, &w0)?;
    let after = rates_of(&hs, &sol.w)?;
    println!("{:?}", sol.report);
    println!("surrogate optimum beta = {:.6}", sol.beta);
    println!("min rate {:.6} -> {:.6}", min(&before), min(&after));
    println!("power {:.6} of {p}", sol.w.power());
    Ok(())
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}
