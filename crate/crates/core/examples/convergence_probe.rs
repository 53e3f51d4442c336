use fockhaf::amplitude::{amplitude, AmplitudeOptions, AmplitudeSpec};
use fockhaf::fock_oracle::oracle_amplitude;
use fockhaf::linalg::{random_unitary, CVec, RVec};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let opts = AmplitudeOptions::default();
    let mut worst = 0.0f64;
    let start = Instant::now();
    // Hot corner: all modes at 4 photons both sides, max squeezing/displacement.
    for trial in 0..8 {
        let l = 3;
        let m = vec![4usize; l];
        let n = vec![4usize; l];
        let alpha = CVec::from_fn(l, |_, _| {
            C64::from_polar(1.5, rng.gen_range(0.0..std::f64::consts::TAU))
        });
        let lam_sign: f64 = if trial % 2 == 0 { 1.2 } else { -1.2 };
        let spec = AmplitudeSpec::new(
            m, n, alpha,
            random_unitary(l, &mut rng),
            random_unitary(l, &mut rng),
            RVec::from_fn(l, |i, _| if i == 1 { -lam_sign } else { lam_sign }),
        ).unwrap();
        let fast = amplitude(&spec, &opts).unwrap();
        let t0 = Instant::now();
        let o = oracle_amplitude(&spec, 18).unwrap();
        let d = (fast - o.value).norm();
        worst = worst.max(d);
        println!("hot trial {trial}: |v|={:.2e} d={:.2e} leak={:.2e} time={:.2?}",
                 fast.norm(), d, o.leakage, t0.elapsed());
    }
    // Random family draws, timing for the acceptance budget.
    let t0 = Instant::now();
    let mut worst_fam = 0.0f64;
    for _ in 0..20 {
        let l = rng.gen_range(1..=3usize);
        let m: Vec<usize> = (0..l).map(|_| rng.gen_range(0..=4)).collect();
        let n: Vec<usize> = (0..l).map(|_| rng.gen_range(0..=4)).collect();
        let alpha = CVec::from_fn(l, |_, _| {
            C64::from_polar(rng.gen_range(0.0..1.5), rng.gen_range(0.0..std::f64::consts::TAU))
        });
        let spec = AmplitudeSpec::new(
            m, n, alpha,
            random_unitary(l, &mut rng),
            random_unitary(l, &mut rng),
            RVec::from_fn(l, |_, _| rng.gen_range(-1.2..1.2)),
        ).unwrap();
        let fast = amplitude(&spec, &opts).unwrap();
        let o = oracle_amplitude(&spec, 18).unwrap();
        worst_fam = worst_fam.max((fast - o.value).norm());
    }
    println!("worst hot: {worst:.3e}; worst of 20 family draws: {worst_fam:.3e}; 20 draws took {:.1?}; total {:.1?}",
             t0.elapsed(), start.elapsed());
}
