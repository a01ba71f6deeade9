use rand::Rng;

use crate::ensemble::replicate_rng;
use crate::field::Field;

pub fn random_field(dim: usize, n: usize, seed: u64) -> Field {
    let mut rng = replicate_rng(seed, 99);
    let len = n.pow(dim as u32);
    Field::new(
        dim,
        n,
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}
