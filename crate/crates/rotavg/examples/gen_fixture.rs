//! Writes the averaging fixture: 10 inliers (sigma 1 deg) around a random
//! rotation plus 90 outliers, and the true rotation alongside it.
//!
//! cargo run -p rotavg --example gen_fixture -- crates/rotavg/tests/data

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use rotavg::io::write_rotations;
use rotavg_core::synth::{stream_rng, synthetic_set};

const SEED: u64 = 20240611;
const SIGMA_DEG: f64 = 1.0;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let set = synthetic_set(100, 0.9, SIGMA_DEG, &mut stream_rng(SEED, 0, 0)).expect("valid scenario");

    let mut out = BufWriter::new(File::create(dir.join("fixture_100.txt"))?);
    writeln!(out, "# 10 inliers (sigma {SIGMA_DEG} deg) + 90 outliers, seed {SEED}")?;
    writeln!(out, "# inlier rows: {:?}", set.inlier_indices())?;
    write_rotations(&mut out, &set.samples)?;
    out.flush()?;

    let mut out = BufWriter::new(File::create(dir.join("fixture_100_truth.txt"))?);
    writeln!(out, "# true rotation for fixture_100.txt, seed {SEED}")?;
    write_rotations(&mut out, &[set.truth])?;
    out.flush()
}
