#![allow(dead_code)]

use fisherform::{NetworkSpec, ParameterVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random parameters scaled like a LeCun-uniform init, biases in ±0.5.
pub fn random_params(spec: &NetworkSpec, seed: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(spec.param_count());
    for layer in spec.layers() {
        let scale = (3.0 / layer.in_width as f64).sqrt();
        for _ in 0..layer.in_width * layer.out_width {
            values.push(rng.random_range(-scale..scale));
        }
        for _ in 0..layer.out_width {
            values.push(rng.random_range(-0.5..0.5));
        }
    }
    ParameterVector::new(values).unwrap()
}

/// A small net (up to two hidden layers), seeded parameters and an input.
pub fn small_case() -> impl Strategy<Value = (NetworkSpec, ParameterVector, Vec<f64>)> {
    (
        1usize..6,
        proptest::collection::vec(2usize..9, 0..3),
        2usize..5,
        any::<u64>(),
    )
        .prop_flat_map(|(input, hidden, classes, seed)| {
            let mut widths = vec![input];
            widths.extend(hidden);
            widths.push(classes);
            let spec = NetworkSpec::from_widths(&widths).unwrap();
            let params = random_params(&spec, seed);
            (
                Just(spec),
                Just(params),
                proptest::collection::vec(-2.0..2.0f64, input),
            )
        })
}
