//! Draw Rayleigh channels, build a codebook with power levels and round-trip
//! both through their JSON formats.

use multicast_precoding::model::{generate_base_codebook, generate_rayleigh, ChannelSet, CodebookKind, GroundSet};

fn main() -> multicast_precoding::Result<()> {
    let channels = generate_rayleigh(7, 3, 4, &[1, 2, 1], 2)?;
    println!("K={} M={} L={} N={:?}", channels.users(), channels.tx_antennas(), channels.slots(), channels.rx_all());

    let json = channels.to_json()?;
    let back = ChannelSet::from_json(&json)?;
    assert_eq!(back.to_json()?, json);
    println!("channel JSON: {} bytes, round trip exact", json.len());

    let p = 10.0;
    let base = generate_base_codebook(CodebookKind::Dft, 4, 16)?;
    let ground = GroundSet::with_power_levels(&base, &[p / 8.0, p / 4.0, p / 2.0, p])?;
    let json = ground.to_json()?;
    assert_eq!(GroundSet::from_json(&json)?.to_json()?, json);
    println!("ground set: {} elements, codebook JSON round trip exact", ground.len());
    Ok(())
}
