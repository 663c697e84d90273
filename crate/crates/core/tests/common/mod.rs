#![allow(dead_code)]

use std::path::PathBuf;

use oem_swap::oem::{check_stability, Channel, LinearModel, SystemParams};
use oem_swap::sweep::{load_config, RunConfig};
use rand::Rng;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn config(name: &str) -> RunConfig {
    load_config(&config_path(name)).expect("shipped config parses")
}

/// Reference transducer with powers, linewidths, detunings and temperature
/// perturbed; redrawn until the drift is stable.
pub fn random_stable_params<R: Rng>(rng: &mut R) -> SystemParams {
    loop {
        let mut p = SystemParams::reference();
        p.temperature = rng.random_range(0.0..0.3);
        for ch in Channel::ALL {
            let c = p.cavity_mut(ch);
            c.power *= rng.random_range(0.1..2.0);
            c.kappa *= rng.random_range(0.5..2.0);
            c.detuning *= rng.random_range(0.7..1.3);
        }
        let m = LinearModel::from_params(&p).unwrap();
        if check_stability(&m).unwrap().stable {
            return p;
        }
    }
}
