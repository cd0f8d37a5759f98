use eigenshell::phase_space::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn main() {
    let mu = 0.5;
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let mut sea = 0; let mut island = 0; let mut aborted = 0;
    let t0 = Instant::now();
    for i in 0..16 {
        let x = random_energy_seed(-0.9, mu, &mut rng).unwrap();
        let tl = Instant::now();
        let lab = lyapunov_label(&x, mu, 10000.0, DEFAULT_LAMBDA_STAR, 1e-3);
        match lab.class {
            Some(OrbitClass::Sea) => sea += 1,
            Some(OrbitClass::Island) => island += 1,
            None => aborted += 1,
        }
        if i < 6 { println!("seed {i}: lambda={:.5} class={:?} [{:?}]", lab.lambda, lab.class, tl.elapsed()); }
    }
    println!("16 seeds at T=1e4: sea={sea} island={island} aborted={aborted}  total [{:?}]", t0.elapsed());
}
