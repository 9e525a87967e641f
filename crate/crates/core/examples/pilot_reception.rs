//! Pilot sequence, codebook sweep and the flattened network input.

use ris_capnet::channel::{sample_channel, seeded_rng, ScenarioConfig};
use ris_capnet::numerics::{adjoint, matmul};
use ris_capnet::pilots::{build_codebook, make_pilot, observe, PilotShape};

fn main() -> ris_capnet::Result<()> {
    let cfg = ScenarioConfig::small();
    let s = make_pilot(&cfg)?.s;
    println!("S S^H / (m P_T / n_t):\n{:?}", matmul(&s, &adjoint(&s))?.scale_real(cfg.n_t as f64 / (cfg.m as f64 * cfg.transmit_power())));

    let cb = build_codebook(cfg.n_h, cfg.n_v);
    println!("codebook: {} entries of length {}", cb.len(), cb.entries[0].len());

    let re = sample_channel(&cfg, &mut seeded_rng(1));
    let y = observe(&re, &cfg, &mut seeded_rng(2))?;
    println!(
        "{} blocks of {}x{}, flattened to {} reals",
        y.blocks.len(),
        y.blocks[0].rows(),
        y.blocks[0].cols(),
        y.flat.len()
    );

    println!("input sizes for n_r = 6, m = 16:");
    for l in [2, 4, 8, 16] {
        println!("  L = {l:>2}: {}", PilotShape { n_r: 6, m: 16, l }.flat_len());
    }
    Ok(())
}
