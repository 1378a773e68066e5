//! Intra-tick collision sampling shared by trials and the survivability
//! metrics, so both agree on what counts as a collision.

use crate::geometry::Vec2;

/// Number of interpolated samples checked inside each tick.
pub const SUBSTEPS: u32 = 4;

/// First substep `s` in `1..=SUBSTEPS` at which two linearly moving discs
/// overlap, given their relative offset at the start (`rel0`) and end (`rel1`)
/// of the tick. Contact means a centre distance strictly below `radius_sum`.
#[inline]
pub fn first_contact_substep(rel0: Vec2, rel1: Vec2, radius_sum: f64) -> Option<u32> {
    let r2 = radius_sum * radius_sum;
    // cheap reject: both endpoints far and the segment cannot come close
    let reach = (rel1 - rel0).norm() + radius_sum;
    if rel0.norm_sq() > reach * reach && rel1.norm_sq() > reach * reach {
        return None;
    }
    (1..=SUBSTEPS).find(|&s| {
        let f = s as f64 / SUBSTEPS as f64;
        rel0.lerp(rel1, f).norm_sq() < r2
    })
}

/// Minimum sampled centre distance minus `radius_sum` over the substeps of a
/// tick (the start of the tick is not included).
#[inline]
pub fn min_clearance_substeps(rel0: Vec2, rel1: Vec2, radius_sum: f64) -> f64 {
    (1..=SUBSTEPS)
        .map(|s| rel0.lerp(rel1, s as f64 / SUBSTEPS as f64).norm())
        .fold(f64::INFINITY, f64::min)
        - radius_sum
}

/// Time of the substep with index `sub` inside tick `tick`.
#[inline]
pub fn substep_time(tick: u64, sub: u32, dt: f64) -> f64 {
    (tick * SUBSTEPS as u64 + sub as u64) as f64 * (dt / SUBSTEPS as f64)
}
