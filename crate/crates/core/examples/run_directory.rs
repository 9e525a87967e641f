//! A run directory: manifest, datasets, a baseline CSV and a reload check.

use ris_capnet::experiments::{load_dataset, Pipeline, Run, RunManifest, HELDOUT_DATA_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("ris-capnet-run-example");
    let mut m = RunManifest::small(Pipeline::Exhaustive);
    m.data.heldout_realizations = 300;
    let run = Run::create(m, &dir)?;
    for p in run.gen_data()? {
        println!("wrote {}", p.display());
    }
    let s = run.baseline()?;
    println!("{} mean {:.4} over {} channels", s.method, s.mean, s.n_eval);
    println!("{}", std::fs::read_to_string(dir.join("baseline.csv"))?);

    let reloaded = load_dataset(dir.join(HELDOUT_DATA_FILE))?;
    println!("reloaded {} held-out records, manifest hash {}", reloaded.len(), run.manifest.hash()?);
    Ok(())
}
