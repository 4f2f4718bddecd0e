//! Random scenario generation for experiments.

use aircover_core::init_traj::launch_velocity;
use aircover_core::model::{Scenario, SystemParams, UserSpec, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Demand range for generated users (bits).
pub const DEMAND_MIN_BITS: f64 = 1.0e6;
pub const DEMAND_MAX_BITS: f64 = 20.0e6;

/// Draw a scenario: `num_users` positions uniform on the square area and
/// demands uniform on the standard range. The charging base sits on the
/// default loop ring, a quarter side east of the area center, with the
/// matching tangential launch velocity. Deterministic under `seed`.
pub fn generate_scenario(
    seed: u64,
    num_users: usize,
    area_size_m: f64,
    params: &SystemParams,
) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = (0..num_users)
        .map(|_| UserSpec {
            pos: Vec2::new(rng.gen_range(0.0..area_size_m), rng.gen_range(0.0..area_size_m)),
            demand_bits: rng.gen_range(DEMAND_MIN_BITS..=DEMAND_MAX_BITS),
        })
        .collect();
    let center = Vec2::new(area_size_m / 2.0, area_size_m / 2.0);
    let base_pos = center + Vec2::new(area_size_m / 4.0, 0.0);
    Scenario {
        area_size_m,
        base_pos,
        base_vel: launch_velocity(center, base_pos, params.num_slots, params.slot_s),
        users,
    }
}
