//! Recomputes the frozen hospital `β_gen`.

use usp_core::datasets::hospital_27;
use usp_core::experiments::{derive_beta_gen, BETA_GEN_DRAWS, HOSPITAL_BETA_GEN_SEED};
use usp_core::priors::{v0_arithmetic_mean, PriorSpec};

fn main() -> usp_core::Result<()> {
    let ds = hospital_27();
    let prior = PriorSpec::usp(v0_arithmetic_mean(&ds)?, "USP V0=V0,E&M");
    let beta = derive_beta_gen(&ds, &prior, BETA_GEN_DRAWS, HOSPITAL_BETA_GEN_SEED)?;
    println!("{beta:?}");
    Ok(())
}
