//! Convex spatial domains, velocity spaces, ray-boundary exit times and
//! region lookup for piecewise-constant materials.
//!
//! Positions and velocities are carried as [`Vec2`] everywhere; the 1D slab
//! uses the x component only (y = 0). Domains are open: a point exactly on
//! the boundary is outside, matching the killing convention of the transport
//! problem.

use crate::error::{Error, Result};

/// Two-component vector used for both positions and velocities.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// 1D convenience: (x, 0).
    pub const fn x1(x: f64) -> Self {
        Vec2 { x, y: 0.0 }
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, a: f64) -> Vec2 {
        Vec2::new(a * self.x, a * self.y)
    }

    /// self + v * s
    pub fn advance(self, v: Vec2, s: f64) -> Vec2 {
        Vec2::new(self.x + v.x * s, self.y + v.y * s)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn unit(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    pub fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }

    pub fn from_angle(theta: f64, speed: f64) -> Vec2 {
        Vec2::new(speed * theta.cos(), speed * theta.sin())
    }
}

/// Identifier of a material region. Regions partition the domain: for the
/// slab these are the segments between split points, for the rectangle
/// region 0 is the background and 1.. are the inclusion rods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RegionId(pub usize);

/// A circular material inclusion inside a rectangular domain. Inclusions
/// re-label material regions only; they do not affect exits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    fn contains(&self, r: Vec2) -> bool {
        let dx = r.x - self.center.x;
        let dy = r.y - self.center.y;
        dx * dx + dy * dy < self.radius * self.radius
    }
}

/// Upper bound on inclusion circles (and on interval splits), sized so that
/// ray decompositions fit in a stack buffer.
pub const MAX_INCLUSIONS: usize = 16;

/// Open, bounded, convex spatial domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// The open interval (-L, L), optionally split into material segments.
    Interval1D {
        half_width: f64,
        /// Sorted interior split points; segments count = splits + 1.
        splits: Vec<f64>,
    },
    /// The open axis-aligned rectangle (-Lx, Lx) x (-Ly, Ly) with circular
    /// material inclusions strictly inside.
    Rect2D {
        half_x: f64,
        half_y: f64,
        inclusions: Vec<Circle>,
    },
}

impl Domain {
    pub fn interval(half_width: f64) -> Result<Self> {
        Self::interval_with_splits(half_width, Vec::new())
    }

    pub fn interval_with_splits(half_width: f64, mut splits: Vec<f64>) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::config("interval half-width must be positive and finite"));
        }
        if splits.len() > 2 * MAX_INCLUSIONS {
            return Err(Error::config(format!("at most {} interval splits are supported", 2 * MAX_INCLUSIONS)));
        }
        splits.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if splits.iter().any(|s| s.abs() >= half_width) {
            return Err(Error::config("interval splits must lie strictly inside (-L, L)"));
        }
        if splits.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("interval splits must be distinct"));
        }
        Ok(Domain::Interval1D { half_width, splits })
    }

    pub fn rect(half_x: f64, half_y: f64, inclusions: Vec<Circle>) -> Result<Self> {
        if !(half_x > 0.0 && half_y > 0.0) || !(half_x.is_finite() && half_y.is_finite()) {
            return Err(Error::config("rectangle half-extents must be positive and finite"));
        }
        if inclusions.len() > MAX_INCLUSIONS {
            return Err(Error::config(format!("at most {MAX_INCLUSIONS} inclusion circles are supported")));
        }
        for c in &inclusions {
            if !(c.radius > 0.0) {
                return Err(Error::config("inclusion radius must be positive"));
            }
            if c.center.x.abs() + c.radius >= half_x || c.center.y.abs() + c.radius >= half_y {
                return Err(Error::config("inclusion circles must lie strictly inside the rectangle"));
            }
        }
        Ok(Domain::Rect2D { half_x, half_y, inclusions })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval1D { .. } => 1,
            Domain::Rect2D { .. } => 2,
        }
    }

    /// True iff r is strictly interior (the domain is open).
    pub fn contains(&self, r: Vec2) -> bool {
        match self {
            Domain::Interval1D { half_width, .. } => r.x.abs() < *half_width,
            Domain::Rect2D { half_x, half_y, .. } => r.x.abs() < *half_x && r.y.abs() < *half_y,
        }
    }

    /// Number of material regions.
    pub fn region_count(&self) -> usize {
        match self {
            Domain::Interval1D { splits, .. } => splits.len() + 1,
            Domain::Rect2D { inclusions, .. } => inclusions.len() + 1,
        }
    }

    /// Material region of an interior point. Points inside an inclusion map
    /// to that rod's id (1-based); otherwise the background (rectangle) or
    /// the slab segment index.
    pub fn region_of(&self, r: Vec2) -> Result<RegionId> {
        if !self.contains(r) {
            return Err(Error::OutsideDomain { x: r.x, y: r.y });
        }
        match self {
            Domain::Interval1D { splits, .. } => {
                let idx = splits.partition_point(|&s| s <= r.x);
                Ok(RegionId(idx))
            }
            Domain::Rect2D { inclusions, .. } => {
                for (i, c) in inclusions.iter().enumerate() {
                    if c.contains(r) {
                        return Ok(RegionId(i + 1));
                    }
                }
                Ok(RegionId(0))
            }
        }
    }

    /// Exit time kappa = inf{ t > 0 : r + v t not in D } in closed form.
    pub fn exit_time(&self, r: Vec2, v: Vec2) -> Result<f64> {
        if !self.contains(r) {
            return Err(Error::OutsideDomain { x: r.x, y: r.y });
        }
        if v.norm() == 0.0 {
            return Err(Error::config("exit_time requires a nonzero velocity"));
        }
        Ok(match self {
            Domain::Interval1D { half_width, .. } => face_time_1d(r.x, v.x, *half_width),
            Domain::Rect2D { half_x, half_y, .. } => {
                let tx = face_time_1d(r.x, v.x, *half_x);
                let ty = face_time_1d(r.y, v.y, *half_y);
                tx.min(ty)
            }
        })
    }

    /// Largest distance from r to the boundary along any ray; used as a
    /// closed-form envelope for directional-distance functions.
    pub fn max_ray_distance(&self, r: Vec2) -> f64 {
        match self {
            Domain::Interval1D { half_width, .. } => half_width + r.x.abs(),
            Domain::Rect2D { half_x, half_y, .. } => {
                let dx = half_x + r.x.abs();
                let dy = half_y + r.y.abs();
                (dx * dx + dy * dy).sqrt()
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval1D { half_width, .. } => 2.0 * half_width,
            Domain::Rect2D { half_x, half_y, .. } => 2.0 * (half_x * half_x + half_y * half_y).sqrt(),
        }
    }

    /// First boundary crossing along the ray p + u s, s > 0, for a point that
    /// may lie outside the closure (used by shifted Urts distances).
    /// Returns infinity if the ray never touches the boundary.
    pub fn ray_boundary_distance(&self, p: Vec2, u: Vec2) -> f64 {
        match self {
            Domain::Interval1D { half_width, .. } => {
                let mut best = f64::INFINITY;
                for b in [-half_width, *half_width] {
                    if u.x != 0.0 {
                        let t = (b - p.x) / u.x;
                        if t > 0.0 {
                            best = best.min(t);
                        }
                    }
                }
                best
            }
            Domain::Rect2D { half_x, half_y, .. } => {
                let mut best = f64::INFINITY;
                // x = +-half_x faces, then y = +-half_y faces
                for b in [*half_x, -*half_x] {
                    if u.x != 0.0 {
                        let t = (b - p.x) / u.x;
                        if t > 0.0 && (p.y + t * u.y).abs() <= *half_y {
                            best = best.min(t);
                        }
                    }
                }
                for b in [*half_y, -*half_y] {
                    if u.y != 0.0 {
                        let t = (b - p.y) / u.y;
                        if t > 0.0 && (p.x + t * u.x).abs() <= *half_x {
                            best = best.min(t);
                        }
                    }
                }
                best
            }
        }
    }

    /// True when the whole domain is one material region; the hot simulation
    /// loops skip the ray decomposition in that case.
    pub fn is_single_region(&self) -> bool {
        self.region_count() == 1
    }

    /// Visit the ray segment r + v s, 0 <= s <= s_max, as ordered pieces of
    /// constant material region (s_start, s_end, region). `s_max` must not
    /// exceed the exit time. The visitor may stop the sweep early by
    /// returning `ControlFlow::Break`.
    pub fn for_each_region_piece(
        &self,
        r: Vec2,
        v: Vec2,
        s_max: f64,
        mut visit: impl FnMut(f64, f64, RegionId) -> std::ops::ControlFlow<()>,
    ) {
        if s_max <= 0.0 {
            return;
        }
        if self.is_single_region() {
            let _ = visit(0.0, s_max, RegionId(0));
            return;
        }
        // collect region crossings along the ray into a small stack buffer
        let mut cuts = [0.0f64; 2 * MAX_INCLUSIONS];
        let mut n = 0usize;
        match self {
            Domain::Interval1D { splits, .. } => {
                for &sp in splits {
                    if v.x != 0.0 {
                        let s = (sp - r.x) / v.x;
                        if s > 0.0 && s < s_max {
                            cuts[n] = s;
                            n += 1;
                        }
                    }
                }
            }
            Domain::Rect2D { inclusions, .. } => {
                for c in inclusions {
                    // |r + vs - center|^2 = radius^2
                    let d = Vec2::new(r.x - c.center.x, r.y - c.center.y);
                    let a = v.dot(v);
                    let b = 2.0 * d.dot(v);
                    let q = d.dot(d) - c.radius * c.radius;
                    let disc = b * b - 4.0 * a * q;
                    if disc > 0.0 {
                        let sd = disc.sqrt();
                        for s in [(-b - sd) / (2.0 * a), (-b + sd) / (2.0 * a)] {
                            if s > 0.0 && s < s_max {
                                cuts[n] = s;
                                n += 1;
                            }
                        }
                    }
                }
            }
        }
        let cuts = &mut cuts[..n];
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut start = 0.0;
        for &c in cuts.iter() {
            if c > start {
                let mid = r.advance(v, 0.5 * (start + c));
                if let Ok(reg) = self.region_of(mid) {
                    if visit(start, c, reg).is_break() {
                        return;
                    }
                }
                start = c;
            }
        }
        if s_max > start {
            let mid = r.advance(v, 0.5 * (start + s_max));
            if let Ok(reg) = self.region_of(mid) {
                let _ = visit(start, s_max, reg);
            }
        }
    }

    /// Allocating convenience wrapper around [`Self::for_each_region_piece`].
    pub fn region_pieces(&self, r: Vec2, v: Vec2, s_max: f64) -> Vec<(f64, f64, RegionId)> {
        let mut pieces = Vec::new();
        self.for_each_region_piece(r, v, s_max, |a, b, reg| {
            pieces.push((a, b, reg));
            std::ops::ControlFlow::Continue(())
        });
        pieces
    }
}

fn face_time_1d(x: f64, vx: f64, half: f64) -> f64 {
    if vx > 0.0 {
        (half - x) / vx
    } else if vx < 0.0 {
        (-half - x) / vx
    } else {
        f64::INFINITY
    }
}

/// Admissible neutron velocities.
#[derive(Clone, Debug, PartialEq)]
pub enum VelocitySpace {
    /// V = {-v0, +v0} on the line.
    TwoPoint1D { v0: f64 },
    /// Fixed speed, any direction on the plane.
    FixedSpeed2D { v0: f64 },
    /// Speeds in [vmin, vmax], any direction on the plane.
    Annulus2D { vmin: f64, vmax: f64 },
}

impl VelocitySpace {
    pub fn validate(&self) -> Result<()> {
        match self {
            VelocitySpace::TwoPoint1D { v0 } | VelocitySpace::FixedSpeed2D { v0 } => {
                if !(v0 > &0.0) || !v0.is_finite() {
                    return Err(Error::config("speed v0 must be positive and finite"));
                }
            }
            VelocitySpace::Annulus2D { vmin, vmax } => {
                if !(0.0 < *vmin && vmin < vmax) || !vmax.is_finite() {
                    return Err(Error::config("annulus requires 0 < vmin < vmax < inf"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            VelocitySpace::TwoPoint1D { .. } => 1,
            _ => 2,
        }
    }

    pub fn contains(&self, v: Vec2) -> bool {
        match self {
            VelocitySpace::TwoPoint1D { v0 } => {
                let tol = 1e-12 * v0.max(1.0);
                v.y == 0.0 && ((v.x - v0).abs() < tol || (v.x + v0).abs() < tol)
            }
            VelocitySpace::FixedSpeed2D { v0 } => (v.norm() - v0).abs() < 1e-9 * v0,
            VelocitySpace::Annulus2D { vmin, vmax } => {
                let s = v.norm();
                *vmin <= s && s <= *vmax
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(l: f64) -> Domain {
        Domain::interval(l).unwrap()
    }

    #[test]
    fn exit_time_1d_linear() {
        let d = interval(1.0);
        let k = d.exit_time(Vec2::x1(0.0), Vec2::x1(1.0)).unwrap();
        assert!((k - 1.0).abs() < 1e-15);
        let k = d.exit_time(Vec2::x1(0.5), Vec2::x1(-1.0)).unwrap();
        assert!((k - 1.5).abs() < 1e-15);
    }

    #[test]
    fn exit_time_2d_against_bisection() {
        let d = Domain::rect(1.0, 1.0, vec![]).unwrap();
        let v = Vec2::from_angle(30f64.to_radians(), 1.0);
        let r = Vec2::new(0.0, 0.0);
        let k = d.exit_time(r, v).unwrap();
        assert!((k - 1.0 / 30f64.to_radians().cos()).abs() < 1e-12);

        // independent oracle: bisection on the inside indicator
        let mut lo = 0.0;
        let mut hi = 4.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if d.contains(r.advance(v, mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((k - 0.5 * (lo + hi)).abs() < 1e-10);
    }

    #[test]
    fn contains_is_open() {
        let d = interval(1.0);
        assert!(d.contains(Vec2::x1(0.0)));
        assert!(!d.contains(Vec2::x1(1.0)));
        let r = Domain::rect(1.0, 1.0, vec![]).unwrap();
        assert!(r.contains(Vec2::new(0.999, 0.0)));
    }

    #[test]
    fn region_of_four_rods() {
        let rod1 = Circle { center: Vec2::new(0.5, 0.5), radius: 0.2 };
        let rod2 = Circle { center: Vec2::new(-0.5, 0.5), radius: 0.2 };
        let d = Domain::rect(1.0, 1.0, vec![rod1, rod2]).unwrap();
        assert_eq!(d.region_of(rod1.center).unwrap(), RegionId(1));
        assert_eq!(d.region_of(Vec2::new(0.0, 0.0)).unwrap(), RegionId(0));
        assert!(d.region_of(Vec2::new(2.0, 0.0)).is_err());
    }

    #[test]
    fn region_of_split_slab() {
        let d = Domain::interval_with_splits(1.0, vec![0.0]).unwrap();
        assert_eq!(d.region_of(Vec2::x1(-0.5)).unwrap(), RegionId(0));
        assert_eq!(d.region_of(Vec2::x1(0.5)).unwrap(), RegionId(1));
    }

    #[test]
    fn region_pieces_cross_split() {
        let d = Domain::interval_with_splits(1.0, vec![0.0]).unwrap();
        let pieces = d.region_pieces(Vec2::x1(-0.5), Vec2::x1(1.0), 1.0);
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0], (0.0, 0.5, RegionId(0)));
        assert_eq!(pieces[1], (0.5, 1.0, RegionId(1)));
    }

    #[test]
    fn region_pieces_through_rod() {
        let rod = Circle { center: Vec2::new(0.0, 0.0), radius: 0.25 };
        let d = Domain::rect(1.0, 1.0, vec![rod]).unwrap();
        let pieces = d.region_pieces(Vec2::new(-0.9, 0.0), Vec2::new(1.0, 0.0), 1.8);
        let regions: Vec<usize> = pieces.iter().map(|p| p.2 .0).collect();
        assert_eq!(regions, vec![0, 1, 0]);
        assert!((pieces[0].1 - 0.65).abs() < 1e-12);
        assert!((pieces[1].1 - 1.15).abs() < 1e-12);
    }
}
