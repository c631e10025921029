//! Weighted sum delay over the continuous codebook with the three schedule
//! variants, against repeating the max-min precoder.

use multicast_precoding::caa::CaaConfig;
use multicast_precoding::delay_cont::{caa_delay, feasible_interval, repeat_delay, DelayConfig, DelayInit, DelayInstance};
use multicast_precoding::model::generate_rayleigh;

fn main() -> multicast_precoding::Result<()> {
    let ch = generate_rayleigh(3, 4, 4, &[1; 4], 1)?;
    let inst = DelayInstance::uniform(ch, 10.0, 10.0, 2)?;
    let feasible = feasible_interval(&inst, &CaaConfig::default())?;
    let fixed = repeat_delay(&inst, &inst.interval_rates(&feasible)?)?;
    println!("repeat max-min precoder: delays {:?} objective {:.4}", fixed.delays, fixed.objective);

    let variants = [
        ("i1", DelayConfig::default()),
        ("i2", DelayConfig { init: DelayInit::I2, ..DelayConfig::default() }),
        ("greedy", DelayConfig { greedy: true, ..DelayConfig::default() }),
    ];
    for (name, cfg) in variants {
        let r = caa_delay(&inst, &cfg, &feasible)?;
        println!(
            "{name:>6}: delays {:?} objective {:.4} relaxed {:.4} t_final {} (horizon bound {})",
            r.outcome.delays, r.outcome.objective, r.relaxed, r.t_final, r.truncation
        );
    }
    Ok(())
}
