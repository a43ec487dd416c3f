//! Full-budget runs in the default 15x15 coin room.

use familyrl::harness::{run_single, HarnessConfig};

fn config(text: &str, seed: u64) -> HarnessConfig {
    let mut cfg = HarnessConfig::parse(text).unwrap();
    cfg.seed = seed;
    cfg
}

#[test]
fn single_actor_plain_retrace_collects_the_coin() {
    let cfg = config(
        "family = 0:0.99\nnum_actors = 1\nintrinsic_rewards = false\nvalue_transform = identity\nframe_budget = 1500000",
        1,
    );
    let run = run_single(&cfg).unwrap();
    let exploit = run.final_return(0).unwrap();
    assert!(exploit >= 0.95, "exploit return {exploit}");
    assert_eq!(run.actor_frames, 1_500_000);
}

#[test]
fn identity_and_transformed_mix_agree_on_exploit_return() {
    let base = "family = 0:0.99, 0.3:0.99\nlifelong_backend = count\nframe_budget = 1500000";
    let runs: Vec<f64> = std::thread::scope(|s| {
        ["identity", "transformed"]
            .map(|mix| {
                let cfg = config(&format!("{base}\nvalue_mix = {mix}"), 1);
                s.spawn(move || run_single(&cfg).unwrap().final_return(0).unwrap())
            })
            .into_iter()
            .map(|h| h.join().unwrap())
            .collect()
    });
    assert!((runs[0] - runs[1]).abs() <= 0.05, "identity {} transformed {}", runs[0], runs[1]);
}
