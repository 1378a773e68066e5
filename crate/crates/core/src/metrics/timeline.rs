use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Vec2};
use crate::world::DynamicMap;

/// One obstacle in one frame of a timeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disc {
    pub id: u32,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// Obstacle discs at uniformly spaced instants `k * dt`, each frame sorted by
/// id. Built by replaying a map or from a recorded trajectory log.
#[derive(Clone, Debug, PartialEq)]
pub struct Timeline {
    pub dt: f64,
    pub bounds: Bounds,
    pub frames: Vec<Vec<Disc>>,
}

impl Timeline {
    /// Replays `map` for `duration` seconds (inclusive of the final tick).
    pub fn from_map(map: &Arc<DynamicMap>, dt: f64, duration: f64) -> Self {
        let ticks = (duration / dt - 1e-9).ceil().max(0.0) as usize;
        let mut world = map.initial_world();
        let mut frames = Vec::with_capacity(ticks + 1);
        let snapshot = |w: &crate::world::World| {
            let mut f: Vec<Disc> = w
                .obstacles
                .iter()
                .map(|o| Disc { id: o.id, position: o.position, velocity: o.velocity, radius: o.radius })
                .collect();
            f.sort_by_key(|d| d.id);
            f
        };
        frames.push(snapshot(&world));
        for _ in 0..ticks {
            world.advance(dt);
            frames.push(snapshot(&world));
        }
        Timeline { dt, bounds: map.bounds, frames }
    }

    /// Builds a timeline from `(t, id, x, y, r)` rows. Times must be evenly
    /// spaced and start at zero; velocities are finite differences.
    pub fn from_rows(rows: &[(f64, u32, f64, f64, f64)], bounds: Bounds) -> Result<Self> {
        let mut by_time: BTreeMap<i64, Vec<Disc>> = BTreeMap::new();
        let mut times: BTreeMap<i64, f64> = BTreeMap::new();
        for &(t, id, x, y, r) in rows {
            if !(t.is_finite() && x.is_finite() && y.is_finite() && r > 0.0) {
                return Err(Error::Parse(format!("bad log row at t={t}, id={id}")));
            }
            // key on microseconds so that printed times group reliably
            let key = (t * 1e6).round() as i64;
            times.insert(key, t);
            by_time.entry(key).or_default().push(Disc {
                id,
                position: Vec2::new(x, y),
                velocity: Vec2::ZERO,
                radius: r,
            });
        }
        let ts: Vec<f64> = times.values().copied().collect();
        if ts.len() < 2 {
            return Err(Error::Parse("log needs at least two time steps".into()));
        }
        if ts[0].abs() > 1e-6 {
            return Err(Error::Parse(format!("log must start at t = 0, starts at {}", ts[0])));
        }
        let dt = ts[1] - ts[0];
        for (k, &t) in ts.iter().enumerate() {
            if (t - k as f64 * dt).abs() > 1e-6 {
                return Err(Error::Parse(format!("log times are not evenly spaced near t = {t}")));
            }
        }
        let mut frames: Vec<Vec<Disc>> = by_time.into_values().collect();
        for f in &mut frames {
            f.sort_by_key(|d| d.id);
            if f.windows(2).any(|w| w[0].id == w[1].id) {
                return Err(Error::Parse("duplicate obstacle id within one time step".into()));
            }
        }
        for k in 0..frames.len() {
            let (a, b) = if k + 1 < frames.len() { (k, k + 1) } else { (k - 1, k) };
            let next = frames[b].clone();
            let prev = frames[a].clone();
            for d in &mut frames[k] {
                let p0 = prev.binary_search_by_key(&d.id, |x| x.id).ok().map(|i| prev[i].position);
                let p1 = next.binary_search_by_key(&d.id, |x| x.id).ok().map(|i| next[i].position);
                if let (Some(p0), Some(p1)) = (p0, p1) {
                    d.velocity = (p1 - p0) / dt;
                }
            }
        }
        Ok(Timeline { dt, bounds, frames })
    }

    /// Reads a CSV log with header `t,id,x,y,r`.
    pub fn read_log(path: &Path, bounds: Bounds) -> Result<Self> {
        let mut rd = csv::Reader::from_path(path)?;
        let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if header != ["t", "id", "x", "y", "r"] {
            return Err(Error::Parse(format!("log header must be t,id,x,y,r, got {}", header.join(","))));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number in log row {:?}", rec)))
            };
            let id: u32 = rec
                .get(1)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad id in log row {:?}", rec)))?;
            rows.push((num(0)?, id, num(2)?, num(3)?, num(4)?));
        }
        Self::from_rows(&rows, bounds)
    }

    /// Writes the timeline as a `t,id,x,y,r` log.
    pub fn write_log(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "id", "x", "y", "r"])?;
        for (k, f) in self.frames.iter().enumerate() {
            let t = k as f64 * self.dt;
            for d in f {
                w.write_record([
                    t.to_string(),
                    d.id.to_string(),
                    d.position.x.to_string(),
                    d.position.y.to_string(),
                    d.radius.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Last covered time.
    pub fn duration(&self) -> f64 {
        (self.frames.len().saturating_sub(1)) as f64 * self.dt
    }

    /// Frame at the tick containing `t` (rounded down), clamped to the end.
    pub fn frame_at(&self, t: f64) -> &[Disc] {
        let k = crate::world::ticks_for(t, self.dt) as usize;
        &self.frames[k.min(self.frames.len() - 1)]
    }

    /// Start position, end position and radius of every obstacle over tick `k`.
    pub(crate) fn tick_motion(&self, k: usize) -> impl Iterator<Item = (Vec2, Vec2, f64)> + '_ {
        let a = &self.frames[k];
        let b = &self.frames[k + 1];
        let aligned = a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.id == y.id);
        b.iter().enumerate().map(move |(i, d)| {
            let p0 = if aligned {
                Some(a[i].position)
            } else {
                a.binary_search_by_key(&d.id, |x| x.id).ok().map(|j| a[j].position)
            };
            // an obstacle that just appeared is only checked at the tick end
            (p0.unwrap_or(d.position), d.position, d.radius)
        })
    }
}
