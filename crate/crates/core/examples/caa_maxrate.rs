//! Max-min rate over the continuous codebook: cyclic alternating ascent from
//! a random and a rec-type start, against open-loop, rec-type and the
//! covariance upper bound.

use multicast_precoding::caa::{caa_instant_rate, open_loop_precoder, rates_of, rec_type_precoder, CaaConfig, CaaInit};
use multicast_precoding::conic::solve_covariance_bound;
use multicast_precoding::model::generate_rayleigh;

fn main() -> multicast_precoding::Result<()> {
    let (k, m, d, p) = (4, 2, 2, 10.0);
    let ch = generate_rayleigh(2024, k, m, &vec![1; k], 1)?;
    let hs: Vec<_> = (0..k).map(|u| ch.channel(u, 0)).collect();
    let min = |v: Vec<f64>| v.into_iter().fold(f64::INFINITY, f64::min);

    let random = caa_instant_rate(&ch, d, p, &CaaConfig::with_init(CaaInit::Random { seed: 1 }))?;
    let rec = caa_instant_rate(&ch, d, p, &CaaConfig::with_init(CaaInit::RecType))?;
    let bound = solve_covariance_bound(&ch, p, 1e-8)?;

    println!("caa (random start)   {:.5}  iters {}  kkt {:.1e}", random.min_rate, random.state.iterations, random.kkt_residual);
    println!("caa (rec-type start) {:.5}  iters {}", rec.min_rate, rec.state.iterations);
    println!("open-loop            {:.5}", min(rates_of(&hs, &open_loop_precoder(m, m, p)?)?));
    println!("rec-type             {:.5}", min(rates_of(&hs, &rec_type_precoder(&ch, d, p)?)?));
    println!("covariance bound     {:.5}  (certified <= {:.5})", bound.value, bound.upper);
    println!("objective trace: {:?}", random.state.objective.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    Ok(())
}
