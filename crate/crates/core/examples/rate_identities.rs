//! The rate, its LMMSE/MSE form and the slack-matrix surrogate on one random
//! link.

use multicast_precoding::caa::random_precoder;
use multicast_precoding::linalg::inverse_hpd;
use multicast_precoding::linalg::logdet_hpd;
use multicast_precoding::model::{generate_rayleigh, lmmse_filter, mse_matrix, rate, surrogate, SlackMatrix};

fn main() -> multicast_precoding::Result<()> {
    let ch = generate_rayleigh(1, 1, 4, &[2], 1)?;
    let h = ch.channel(0, 0);
    let w = random_precoder(4, 2, 10.0, 3);

    let r = rate(h, &w)?;
    let g = lmmse_filter(h, &w)?;
    let e = mse_matrix(h, &w, &g)?;
    let via_mse = logdet_hpd(&inverse_hpd(&e)?)?;
    println!("rate            {r:.12} nats");
    println!("log|E^-1|       {via_mse:.12}");

    let s = SlackMatrix::optimal(h, &w)?;
    println!("surrogate (S*)  {:.12}", surrogate(h, &w, &g, &s)?);
    println!("surrogate (S=I) {:.12}", surrogate(h, &w, &g, &SlackMatrix::identity(2))?);
    Ok(())
}
