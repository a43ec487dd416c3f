use familyrl::env::{coin_to_mdp, Environment, RandomCoinConfig, RandomCoinEnv};
use familyrl::mdp::{value_iteration, QTable, RewardSelect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn coin_values_decay_with_manhattan_distance() {
    let room = RandomCoinConfig { width: 5, height: 4, max_steps: 100 };
    let gamma = 0.9;
    let mdp = coin_to_mdp(&room).unwrap();
    let q = value_iteration(&mdp, gamma, 1e-13, 10_000, RewardSelect::Extrinsic).unwrap();
    let cells = room.cells();
    for agent in 0..cells {
        for coin in (0..cells).filter(|&c| c != agent) {
            let (a, c) = (room.position(agent), room.position(coin));
            let d = a.0.abs_diff(c.0) + a.1.abs_diff(c.1);
            let v = q.row(agent * cells + coin).iter().cloned().fold(f64::MIN, f64::max);
            assert!((v - gamma.powi(d as i32 - 1)).abs() < 1e-10, "agent {a:?} coin {c:?}: {v}");
        }
    }
}

#[test]
fn simulator_agrees_with_the_tabular_model() {
    let room = RandomCoinConfig { width: 6, height: 6, max_steps: 40 };
    let mdp = coin_to_mdp(&room).unwrap();
    let mut env = RandomCoinEnv::new(room, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut x = env.reset().state;
        assert!(!mdp.is_terminal(x));
        loop {
            let a = rng.gen_range(0..4);
            let out = env.step(a).unwrap();
            assert_eq!(mdp.transition_prob(x, a, out.observation.state), 1.0);
            assert_eq!(mdp.reward(x, a, RewardSelect::Extrinsic), out.reward);
            assert_eq!(out.terminal, mdp.is_terminal(out.observation.state));
            x = out.observation.state;
            if out.done {
                assert!(out.terminal || env.steps() == room.max_steps);
                break;
            }
        }
    }
}

#[test]
fn coin_placements_cover_the_room() {
    let room = RandomCoinConfig { width: 3, height: 3, max_steps: 10 };
    let mut env = RandomCoinEnv::new(room, 1).unwrap();
    let mut seen = vec![0u32; room.cells() * room.cells()];
    for _ in 0..20_000 {
        let obs = env.reset();
        seen[obs.state] += 1;
        assert_ne!(env.agent(), env.coin());
    }
    let cells = room.cells();
    for (state, &count) in seen.iter().enumerate() {
        if state / cells == state % cells {
            assert_eq!(count, 0);
        } else {
            // 72 placements, about 278 draws each
            assert!((200..360).contains(&count), "state {state}: {count}");
        }
    }
}
