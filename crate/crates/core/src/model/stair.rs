use super::Vec2;
use crate::error::{invalid, Result};
// Float methods come from libm when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

/// Staircase seen from the current stance foot.
///
/// The stance foot is the origin, `footprint_offset` in front of the riser
/// below it. The current tread spans `[-footprint_offset, run - footprint_offset)`
/// at height zero and tread `k` sits at height `k * rise`. A negative `rise`
/// describes a descending stair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StairGeometry {
    pub rise: f64,
    pub run: f64,
    pub footprint_offset: f64,
}

impl StairGeometry {
    /// Stair with the stance foot in the middle of the tread.
    pub fn centered(rise: f64, run: f64) -> Self {
        Self {
            rise,
            run,
            footprint_offset: run / 2.0,
        }
    }

    pub fn validate(&self, leg_length: f64) -> Result<()> {
        if !(self.run.is_finite() && self.run > 0.0) {
            return Err(invalid("run", "must be finite and > 0"));
        }
        if !(self.rise.is_finite() && self.rise.abs() < leg_length) {
            return Err(invalid("rise", "magnitude must be below the leg length"));
        }
        if !self.footprint_offset.is_finite() {
            return Err(invalid("footprint_offset", "must be finite"));
        }
        Ok(())
    }

    /// Index of the tread below horizontal position `x` (0 = current tread).
    pub fn tread_index(&self, x: f64) -> i64 {
        ((x + self.footprint_offset) / self.run).floor() as i64
    }

    pub fn surface_height(&self, x: f64) -> f64 {
        self.tread_index(x) as f64 * self.rise
    }

    /// Horizontal position of the riser leading to the next tread.
    pub fn next_riser_x(&self) -> f64 {
        self.run - self.footprint_offset
    }

    /// Touch-down target of the swing foot on the next tread.
    pub fn next_footprint(&self) -> Vec2 {
        Vec2::new(self.run, self.rise)
    }

    pub fn previous_footprint(&self) -> Vec2 {
        Vec2::new(-self.run, -self.rise)
    }

    pub fn descending(mut self) -> Self {
        self.rise = -self.rise.abs();
        self
    }
}

impl Default for StairGeometry {
    fn default() -> Self {
        Self::centered(0.2, 0.4)
    }
}

/// Signed vertical distance from `point` to the stair surface below it
/// (positive above the surface).
pub fn stair_clearance(stair: &StairGeometry, point: &Vec2) -> f64 {
    point.y - stair.surface_height(point.x)
}

/// Signed Euclidean distance from `point` to the stair profile, riser faces
/// included (positive above). Unlike [`stair_clearance`] it is continuous
/// across risers, and it has the same sign.
pub fn stair_distance(stair: &StairGeometry, point: &Vec2) -> f64 {
    let c = stair_clearance(stair, point);
    if c == 0.0 {
        return 0.0;
    }
    let k = stair.tread_index(point.x);
    // The surface point straight below bounds the distance by |c|.
    let reach = (c.abs() / stair.run).ceil() as i64 + 1;
    let mut best = c.abs();
    for j in (k - reach)..=(k + reach) {
        let x0 = j as f64 * stair.run - stair.footprint_offset;
        let x1 = x0 + stair.run;
        let h = j as f64 * stair.rise;
        // Tread j and the riser rising onto it from tread j − 1.
        best = best.min(segment_distance(point, (x0, h), (x1, h)));
        best = best.min(segment_distance(point, (x0, h - stair.rise), (x0, h)));
    }
    best.copysign(c)
}

fn segment_distance(p: &Vec2, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let s = if len2 > 0.0 {
        (((p.x - a.0) * dx + (p.y - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (p.x - a.0 - s * dx, p.y - a.1 - s * dy);
    (ex * ex + ey * ey).sqrt()
}
