#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tdm_core::ratio::Ratio;
use tdm_core::{ClientRequirement, ProblemInstance};

/// Random instance with up to `max_n` clients and frame size up to `max_f`.
pub fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_f: usize) -> ProblemInstance {
    let f = rng.gen_range(4..=max_f);
    let n = rng.gen_range(1..=max_n);
    let clients = (0..n)
        .map(|i| {
            let rate = Ratio::new(rng.gen_range(0..=(90 / n as i64)), 100);
            let latency = rng
                .gen_bool(0.75)
                .then(|| Ratio::new(rng.gen_range(4..=(4 * f as i64)), 4));
            ClientRequirement::new(format!("c{i}"), rate, latency)
        })
        .collect();
    ProblemInstance::new(f, clients).expect("valid by construction")
}

pub fn instances(seed: u64, count: usize, max_n: usize, max_f: usize) -> Vec<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_instance(&mut rng, max_n, max_f))
        .collect()
}

pub fn data(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

/// Latency by direct enumeration over two frames of windows.
pub fn latency_oracle(mask: &[bool]) -> Ratio {
    let f = mask.len();
    let phi = mask.iter().filter(|&&b| b).count() as i64;
    let mut worst = Ratio::from_integer(0);
    for k in 0..f {
        for j in 1..=2 * f {
            let w = (0..j).filter(|t| mask[(k + t) % f]).count() as i64;
            let v = Ratio::from_integer(j as i64) - Ratio::new(w * f as i64, phi);
            if v > worst {
                worst = v;
            }
        }
    }
    worst
}
