//! Finite-difference check of backpropagation through a small padded 3-D
//! convolution stack.

use hsfusion::net::gradcheck::check_gradients;
use hsfusion::net::{init_params, NetSpec, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hsfusion::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let spec = NetSpec {
        hidden_filters: vec![4, 8],
        ..NetSpec::standard(2, 3)
    };
    let net = init_params(&mut rng, &spec)?;
    let x = Tensor4::from_fn([5, 5, 5, 1], |_, _, _, _| rng.random_range(-1.0..1.0));
    let target = Tensor4::from_fn([5, 5, 1, 2], |_, _, _, _| rng.random_range(-1.0..1.0));

    let report = check_gradients(&net, &x, &target, 1e-5, 1e-4, 1e-7)?;
    println!(
        "{} parameters: {} checked, {} skipped at ReLU kinks, max relative error {:.2e}",
        net.param_count(),
        report.checked,
        report.kinks,
        report.max_rel_err
    );
    for m in report.failures.iter().take(5) {
        println!("mismatch {m:?}");
    }
    println!("{}", if report.passed() { "ok" } else { "FAILED" });
    Ok(())
}
