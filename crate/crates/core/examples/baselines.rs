//! The CSI-based reference optimizers on a handful of channels.

use ris_capnet::baselines::{dsm_optimize, exhaustive_codebook, random_codebook, DsmSettings};
use ris_capnet::channel::{rate, sample_channel, seeded_rng, ScenarioConfig};
use ris_capnet::pilots::build_codebook;

fn main() -> ris_capnet::Result<()> {
    let cfg = ScenarioConfig::small();
    let cb = build_codebook(cfg.n_h, cfg.n_v);
    let dsm = DsmSettings::default();
    let mut rng = seeded_rng(99);
    println!("{:>4} {:>8} {:>11} {:>8}  dsm sweeps", "ch", "dsm", "exhaustive", "random");
    for i in 0..8 {
        let re = sample_channel(&cfg, &mut seeded_rng(i));
        let d = dsm_optimize(&re, &cfg, dsm.grid_points, dsm.max_sweeps, dsm.tol)?;
        let (_, ex) = exhaustive_codebook(&re, &cb, &cfg)?;
        let rnd = rate(&re, &random_codebook(&cb, &mut rng), &cfg)?;
        println!("{i:>4} {:>8.4} {ex:>11.4} {rnd:>8.4}  {}", d.rate, d.trace.len() - 1);
    }
    Ok(())
}
