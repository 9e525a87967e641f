//! Draw one channel and look at the rate as a function of the surface phases.

use ris_capnet::channel::{
    effective_channel, rate, rate_gradient, sample_channel, seeded_rng, RisPhases, ScenarioConfig,
};
use ris_capnet::pilots::build_codebook;

fn main() -> ris_capnet::Result<()> {
    let cfg = ScenarioConfig::small();
    let re = sample_channel(&cfg, &mut seeded_rng(7));
    println!(
        "{} surface elements, {}x{} MIMO, P_T/sigma^2 = {:.0} dB",
        cfg.n_elements(),
        cfg.n_r,
        cfg.n_t,
        cfg.transmit_snr_db()
    );

    let zero = RisPhases::zeros(cfg.n_elements());
    println!("H_eff at theta = 0:\n{:?}", effective_channel(&re, &zero)?);
    println!("R(0) = {:.4} bits/s/Hz", rate(&re, &zero, &cfg)?);

    let cb = build_codebook(cfg.n_h, cfg.n_v);
    for i in 0..cb.len() {
        println!("codebook entry {i}: R = {:.4}", rate(&re, &cb.phases(i), &cfg)?);
    }

    // A few plain gradient-ascent steps on the angles.
    let mut ph = zero;
    for step in 0..5 {
        let g = rate_gradient(&re, &ph, &cfg)?;
        for (t, gi) in ph.theta.iter_mut().zip(&g) {
            *t += 0.5 * gi.signum() * gi.abs().min(1.0);
        }
        println!("ascent step {step}: R = {:.4}", rate(&re, &ph, &cfg)?);
    }
    Ok(())
}
