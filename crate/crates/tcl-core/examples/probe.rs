use tcl_core::envs::{build_env, EnvFamily, EnvParams};

fn main() {
    for seed in 0..50u64 {
        match std::panic::catch_unwind(|| build_env(EnvFamily::Wall, seed, Some((15, 15)), &EnvParams::default())) {
            Ok(Ok(_)) => {}
            Ok(Err(e)) => println!("seed {seed}: Err({e})"),
            Err(_) => println!("seed {seed}: panic"),
        }
    }
    println!("done");
}
