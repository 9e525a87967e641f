//! Rate against the number of pilot slots, written as CSV to stdout.
//! Pass method names to include trained methods, e.g.
//! `cargo run --release --example pilot_length_sweep -- capnet-unsup dsm random`.

use ris_capnet::experiments::{run_sweep, AxisValue, Pipeline, RunManifest, SweepAxis, SweepSpec};

fn main() -> ris_capnet::Result<()> {
    let mut methods: Vec<Pipeline> = std::env::args().skip(1).map(|a| a.parse()).collect::<ris_capnet::Result<_>>()?;
    if methods.is_empty() {
        methods = vec![Pipeline::Dsm, Pipeline::Random, Pipeline::Exhaustive];
    }
    let mut m = RunManifest::small(methods[0]);
    m.data.capnet_channels = 10000;
    m.capacity_net.train.epochs = 10;
    m.data.train_realizations = 5000;

    let spec = SweepSpec {
        axis: SweepAxis::PilotLength,
        values: [2, 4, 8, 16].map(AxisValue::PilotLength).to_vec(),
        methods,
    };
    let out = run_sweep(&m, &spec)?;
    print!("{}", out.to_csv());
    for (point, err) in &out.errors {
        eprintln!("L = {point}: {err}");
    }
    Ok(())
}
