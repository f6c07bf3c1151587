//! Local metric frames, camera footprint projection and the small amount of
//! plane geometry the planner and simulator share.
//!
//! Body frame convention: heading 0 faces +x (east). The image's height axis
//! (pitch `α`) projects along the body x axis, the width axis (roll `β`)
//! along the body y axis.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::GeoError;

/// East-North-Up position in metres relative to a [`GeoOrigin`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EnuPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EnuPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn offset(self, dx: f64, dy: f64, dz: f64) -> Self {
        Self::new(self.x + dx, self.y + dy, self.z + dz)
    }

    pub fn horizontal_distance(&self, other: &EnuPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Equirectangular anchor for converting between lat/lon and the local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    pub lat0: f64,
    pub lon0: f64,
    metres_per_deg_lat: f64,
    metres_per_deg_lon: f64,
}

impl GeoOrigin {
    pub fn new(lat0: f64, lon0: f64) -> Self {
        let phi = lat0.to_radians();
        let metres_per_deg_lat = 111_132.92 - 559.82 * (2.0 * phi).cos() + 1.175 * (4.0 * phi).cos();
        let metres_per_deg_lon = 111_412.84 * phi.cos() - 93.5 * (3.0 * phi).cos();
        Self {
            lat0,
            lon0,
            metres_per_deg_lat,
            metres_per_deg_lon,
        }
    }

    /// Bottom-left survey waypoint of the field site.
    pub fn field_site() -> Self {
        Self::new(-27.389_276_5, 152.872_772_2)
    }

    pub fn metres_per_degree(&self) -> (f64, f64) {
        (self.metres_per_deg_lat, self.metres_per_deg_lon)
    }

    pub fn to_enu(&self, lat: f64, lon: f64, alt: f64) -> EnuPoint {
        EnuPoint::new(
            (lon - self.lon0) * self.metres_per_deg_lon,
            (lat - self.lat0) * self.metres_per_deg_lat,
            alt,
        )
    }

    /// Returns `(lat, lon, alt)`.
    pub fn to_latlon(&self, p: &EnuPoint) -> (f64, f64, f64) {
        (
            self.lat0 + p.y / self.metres_per_deg_lat,
            self.lon0 + p.x / self.metres_per_deg_lon,
            p.z,
        )
    }
}

/// Pinhole camera description. Lens dimensions and focal length in mm,
/// pointing angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub lens_width: f64,
    pub lens_height: f64,
    pub focal_length: f64,
    /// Pitch from the vertical.
    pub pitch: f64,
    /// Roll-axis pointing angle.
    pub roll: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self::rgb()
    }
}

impl CameraIntrinsics {
    /// Nadir-pointing RGB payload used for the field trials.
    pub fn rgb() -> Self {
        Self {
            lens_width: 2.06,
            lens_height: 1.52,
            focal_length: 4.7,
            pitch: 0.0,
            roll: 0.0,
            image_width: 640,
            image_height: 480,
        }
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.focal_length) || !positive(self.lens_width) || !positive(self.lens_height) {
            return Err(GeoError::InvalidIntrinsics(
                "lens dimensions and focal length must be positive",
            ));
        }
        if !(self.pitch.abs() < FRAC_PI_2 && self.roll.abs() < FRAC_PI_2) {
            return Err(GeoError::InvalidIntrinsics(
                "pointing angles must lie strictly within (-pi/2, pi/2)",
            ));
        }
        Ok(())
    }

    fn half_angle_height(&self) -> f64 {
        (self.lens_height / (2.0 * self.focal_length)).atan()
    }

    fn half_angle_width(&self) -> f64 {
        (self.lens_width / (2.0 * self.focal_length)).atan()
    }
}

/// Signed ground distances from the nadir point to each footprint edge.
/// `top`/`bottom` run along body x, `left`/`right` along body y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintExtent {
    pub top: f64,
    pub bottom: f64,
    pub left: f64,
    pub right: f64,
}

impl FootprintExtent {
    /// Ground length along body x.
    pub fn length_x(&self) -> f64 {
        (self.top - self.bottom).abs()
    }

    /// Ground length along body y.
    pub fn length_y(&self) -> f64 {
        (self.left - self.right).abs()
    }
}

fn ray_extent(altitude: f64, pointing: f64, half_angle: f64) -> Result<(f64, f64), GeoError> {
    let hi = pointing + half_angle;
    let lo = pointing - half_angle;
    if hi >= FRAC_PI_2 || lo <= -FRAC_PI_2 {
        return Err(GeoError::HorizonRay);
    }
    Ok((altitude * hi.tan(), altitude * lo.tan()))
}

/// Projected footprint extents at `altitude` above flat ground.
pub fn footprint_extent(altitude: f64, cam: &CameraIntrinsics) -> Result<FootprintExtent, GeoError> {
    if !(altitude.is_finite() && altitude > 0.0) {
        return Err(GeoError::NonPositiveAltitude(altitude));
    }
    cam.validate()?;
    let (top, bottom) = ray_extent(altitude, cam.pitch, cam.half_angle_height())?;
    let (left, right) = ray_extent(altitude, cam.roll, cam.half_angle_width())?;
    Ok(FootprintExtent {
        top,
        bottom,
        left,
        right,
    })
}

/// Ground quadrilateral seen by the camera. Corners are counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub corners: [EnuPoint; 4],
}

impl Footprint {
    /// Builds a footprint from arbitrary corner order; corners are sorted
    /// counterclockwise around their centroid.
    pub fn from_corners(mut corners: [EnuPoint; 4]) -> Self {
        let cx = corners.iter().map(|c| c.x).sum::<f64>() / 4.0;
        let cy = corners.iter().map(|c| c.y).sum::<f64>() / 4.0;
        corners.sort_by(|a, b| {
            let ta = (a.y - cy).atan2(a.x - cx);
            let tb = (b.y - cy).atan2(b.x - cx);
            ta.total_cmp(&tb)
        });
        for c in corners.iter_mut() {
            c.z = 0.0;
        }
        Self { corners }
    }

    /// Axis-aligned rectangle, mostly useful in tests and for the hybrid prior.
    pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self::from_corners([
            EnuPoint::ground(min_x, min_y),
            EnuPoint::ground(max_x, min_y),
            EnuPoint::ground(max_x, max_y),
            EnuPoint::ground(min_x, max_y),
        ])
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let c = &self.corners;
        let mut twice = 0.0;
        for i in 0..4 {
            let j = (i + 1) % 4;
            twice += c[i].x * c[j].y - c[j].x * c[i].y;
        }
        0.5 * twice
    }

    pub fn centroid(&self) -> EnuPoint {
        let cx = self.corners.iter().map(|c| c.x).sum::<f64>() / 4.0;
        let cy = self.corners.iter().map(|c| c.y).sum::<f64>() / 4.0;
        EnuPoint::ground(cx, cy)
    }

    /// `(min_x, min_y, max_x, max_y)`
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        self.corners.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
        )
    }

    /// Horizontal span `[lo, hi]` of the quadrilateral at ordinate `y`, if any.
    pub fn row_span(&self, y: f64) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..4 {
            let a = self.corners[i];
            let b = self.corners[(i + 1) % 4];
            let (ylo, yhi) = if a.y <= b.y { (a.y, b.y) } else { (b.y, a.y) };
            if y < ylo || y > yhi {
                continue;
            }
            if (b.y - a.y).abs() < 1e-12 {
                lo = lo.min(a.x.min(b.x));
                hi = hi.max(a.x.max(b.x));
            } else {
                let t = (y - a.y) / (b.y - a.y);
                let x = a.x + t * (b.x - a.x);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// Camera footprint in the world frame for a UAV at `uav` with yaw `yaw`.
/// With `yaw == 0` this is a pure translation of the body-frame corners.
pub fn footprint_corners_world(uav: &EnuPoint, yaw: f64, cam: &CameraIntrinsics) -> Result<Footprint, GeoError> {
    let ext = footprint_extent(uav.z, cam)?;
    let (s, c) = yaw.sin_cos();
    let body = [
        (ext.top, ext.right),
        (ext.top, ext.left),
        (ext.bottom, ext.left),
        (ext.bottom, ext.right),
    ];
    let corners = body.map(|(bx, by)| EnuPoint::ground(uav.x + c * bx - s * by, uav.y + s * bx + c * by));
    Ok(Footprint::from_corners(corners))
}

const ANGLE_SUM_TOL: f64 = 1e-9;

/// Inside-or-on test for a point against a footprint, using the sum of the
/// angles subtended by each edge: interior points sum to 2π, exterior to 0.
pub fn point_in_footprint(p: &EnuPoint, fp: &Footprint) -> bool {
    let mut sum = 0.0;
    for i in 0..4 {
        let a = fp.corners[i];
        let b = fp.corners[(i + 1) % 4];
        let (ax, ay) = (a.x - p.x, a.y - p.y);
        let (bx, by) = (b.x - p.x, b.y - p.y);
        let cross = ax * by - ay * bx;
        let dot = ax * bx + ay * by;
        let scale = (ax.hypot(ay) * bx.hypot(by)).max(f64::MIN_POSITIVE);
        // On the edge (or a vertex): the subtended angle is π or undefined.
        if cross.abs() <= 1e-12 * scale.max(1.0) && dot <= 0.0 {
            return true;
        }
        sum += cross.atan2(dot);
    }
    (sum.abs() - TAU).abs() <= ANGLE_SUM_TOL
}

/// Horizontal advance for a given footprint length and desired overlap.
pub fn position_step_delta(l_fov: f64, overlap: f64) -> Result<f64, GeoError> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(GeoError::InvalidOverlap(overlap));
    }
    if !(l_fov.is_finite() && l_fov > 0.0) {
        return Err(GeoError::NonPositiveLength(l_fov));
    }
    Ok(l_fov * (1.0 - overlap))
}

/// Manhattan distance over the horizontal components.
pub fn manhattan(p: &EnuPoint, q: &EnuPoint) -> f64 {
    (p.x - q.x).abs() + (p.y - q.y).abs()
}

/// Manhattan distance over all three components.
pub fn manhattan3(p: &EnuPoint, q: &EnuPoint) -> f64 {
    manhattan(p, q) + (p.z - q.z).abs()
}

/// Axis-aligned survey rectangle on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveyArea {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl SurveyArea {
    pub const fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    /// The 6 m x 60 m strip flown in the field trials.
    pub const fn field_strip() -> Self {
        Self::new(0.0, 0.0, 6.0, 60.0)
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn is_valid(&self) -> bool {
        self.width() > 0.0 && self.height() > 0.0
    }

    pub fn center(&self) -> EnuPoint {
        EnuPoint::ground(0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))
    }

    pub fn contains(&self, p: &EnuPoint) -> bool {
        self.contains_with_margin(p, 0.0)
    }

    pub fn contains_with_margin(&self, p: &EnuPoint, margin: f64) -> bool {
        p.x >= self.min_x - margin
            && p.x <= self.max_x + margin
            && p.y >= self.min_y - margin
            && p.y <= self.max_y + margin
    }

    pub fn inflate(&self, margin: f64) -> Self {
        Self::new(
            self.min_x - margin,
            self.min_y - margin,
            self.max_x + margin,
            self.max_y + margin,
        )
    }

    /// Manhattan diagonal.
    pub fn manhattan_diagonal(&self) -> f64 {
        manhattan(
            &EnuPoint::ground(self.max_x, self.max_y),
            &EnuPoint::ground(self.min_x, self.min_y),
        )
    }

    pub fn as_footprint(&self) -> Footprint {
        Footprint::rect(self.min_x, self.min_y, self.max_x, self.max_y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn half_plane_inside(p: &EnuPoint, fp: &Footprint) -> bool {
        (0..4).all(|i| {
            let a = fp.corners[i];
            let b = fp.corners[(i + 1) % 4];
            (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
        })
    }

    #[test]
    fn nadir_extent_matches_similar_triangles() {
        let cam = CameraIntrinsics::rgb();
        let ext = footprint_extent(16.0, &cam).unwrap();
        let half_x = 16.0 * cam.lens_height / (2.0 * cam.focal_length);
        let half_y = 16.0 * cam.lens_width / (2.0 * cam.focal_length);
        assert_abs_diff_eq!(ext.top, half_x, epsilon = 1e-12);
        assert_abs_diff_eq!(ext.bottom, -half_x, epsilon = 1e-12);
        assert_abs_diff_eq!(ext.left, half_y, epsilon = 1e-12);
        assert_abs_diff_eq!(ext.right, -half_y, epsilon = 1e-12);
        assert_abs_diff_eq!(half_y, 3.5064, epsilon = 1e-4);
        assert_abs_diff_eq!(half_x, 2.5872, epsilon = 1e-4);
    }

    #[test]
    fn extent_collapses_near_ground() {
        let ext = footprint_extent(1e-9, &CameraIntrinsics::rgb()).unwrap();
        assert!(ext.length_x() < 1e-8 && ext.length_y() < 1e-8);
    }

    #[test]
    fn horizon_rays_are_rejected() {
        let mut cam = CameraIntrinsics::rgb();
        cam.pitch = FRAC_PI_2 - cam.half_angle_height();
        assert!(matches!(footprint_extent(16.0, &cam), Err(GeoError::HorizonRay)));
        assert!(footprint_extent(0.0, &CameraIntrinsics::rgb()).is_err());
        assert!(footprint_extent(-1.0, &CameraIntrinsics::rgb()).is_err());
    }

    #[test]
    fn pure_translation_at_zero_yaw() {
        let cam = CameraIntrinsics::rgb();
        let a = footprint_corners_world(&EnuPoint::new(0.0, 0.0, 16.0), 0.0, &cam).unwrap();
        let b = footprint_corners_world(&EnuPoint::new(10.0, 5.0, 16.0), 0.0, &cam).unwrap();
        for (p, q) in a.corners.iter().zip(b.corners.iter()) {
            assert_abs_diff_eq!(q.x - p.x, 10.0, epsilon = 1e-12);
            assert_abs_diff_eq!(q.y - p.y, 5.0, epsilon = 1e-12);
        }
        let (x0, y0, x1, y1) = a.bbox();
        assert_abs_diff_eq!(x1 - x0, 5.1745, epsilon = 1e-4);
        assert_abs_diff_eq!(y1 - y0, 7.0128, epsilon = 1e-4);
    }

    #[test]
    fn quarter_turn_rotates_corners() {
        let cam = CameraIntrinsics::rgb();
        let uav = EnuPoint::new(0.0, 0.0, 16.0);
        let a = footprint_corners_world(&uav, 0.0, &cam).unwrap();
        let b = footprint_corners_world(&uav, FRAC_PI_2, &cam).unwrap();
        assert_abs_diff_eq!(a.area(), b.area(), epsilon = 1e-9);
        for p in a.corners {
            let rotated = EnuPoint::ground(-p.y, p.x);
            assert!(b
                .corners
                .iter()
                .any(|q| (q.x - rotated.x).abs() < 1e-9 && (q.y - rotated.y).abs() < 1e-9));
        }
    }

    #[test]
    fn point_tests_at_centre_and_just_outside() {
        let cam = CameraIntrinsics::rgb();
        let fp = footprint_corners_world(&EnuPoint::new(0.0, 0.0, 16.0), 0.0, &cam).unwrap();
        assert!(point_in_footprint(&EnuPoint::ground(0.0, 0.0), &fp));
        let (_, _, max_x, _) = fp.bbox();
        assert!(!point_in_footprint(&EnuPoint::ground(max_x + 1e-3, 0.0), &fp));
        assert!(point_in_footprint(&EnuPoint::ground(max_x, 0.0), &fp));
        assert!(point_in_footprint(&fp.corners[2], &fp));
    }

    #[test]
    fn step_delta() {
        assert_abs_diff_eq!(position_step_delta(7.0128, 0.4).unwrap(), 4.20768, epsilon = 1e-9);
        assert_eq!(position_step_delta(3.0, 0.0).unwrap(), 3.0);
        assert!(position_step_delta(3.0, 1.0).is_err());
        assert!(position_step_delta(3.0, -0.1).is_err());
        assert!(position_step_delta(0.0, 0.3).is_err());
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan(&EnuPoint::ground(0.0, 0.0), &EnuPoint::ground(3.0, 4.0)), 7.0);
        let p = EnuPoint::ground(1.5, -2.0);
        assert_eq!(manhattan(&p, &p), 0.0);
        assert_eq!(SurveyArea::field_strip().manhattan_diagonal(), 66.0);
    }

    #[test]
    fn latlon_round_trip_within_a_kilometre() {
        let origin = GeoOrigin::field_site();
        for &(dx, dy) in &[(0.0, 0.0), (500.0, -700.0), (-999.0, 999.0), (6.0, 60.0)] {
            let (lat, lon, _) = origin.to_latlon(&EnuPoint::new(dx, dy, 0.0));
            let back = origin.to_enu(lat, lon, 0.0);
            let (lat2, lon2, _) = origin.to_latlon(&back);
            assert!((lat - lat2).abs() < 1e-6 && (lon - lon2).abs() < 1e-6);
            assert!((back.x - dx).abs() < 1e-6 && (back.y - dy).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn nadir_area_scales_with_altitude_squared(z in 0.5f64..120.0) {
            let cam = CameraIntrinsics::rgb();
            let fp = footprint_corners_world(&EnuPoint::new(0.0, 0.0, z), 0.0, &cam).unwrap();
            let expected = z * z * cam.lens_width * cam.lens_height / (cam.focal_length * cam.focal_length);
            prop_assert!((fp.area() - expected).abs() <= 1e-9 * expected);
        }

        #[test]
        fn yaw_then_inverse_yaw_is_identity(yaw in -PI..PI, x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let cam = CameraIntrinsics::rgb();
            let uav = EnuPoint::new(x, y, 16.0);
            let fp = footprint_corners_world(&uav, yaw, &cam).unwrap();
            let (s, c) = (-yaw).sin_cos();
            let back: Vec<EnuPoint> = fp.corners.iter().map(|p| {
                let (dx, dy) = (p.x - x, p.y - y);
                EnuPoint::ground(x + c * dx - s * dy, y + s * dx + c * dy)
            }).collect();
            let flat = footprint_corners_world(&uav, 0.0, &cam).unwrap();
            for q in flat.corners {
                prop_assert!(back.iter().any(|p| (p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9));
            }
        }

        #[test]
        fn angle_sum_agrees_with_half_planes(
            yaw in -PI..PI, z in 3.0f64..30.0, pitch in -0.5f64..0.5, roll in -0.5f64..0.5,
            px in -25.0f64..25.0, py in -25.0f64..25.0,
        ) {
            let cam = CameraIntrinsics { pitch, roll, ..CameraIntrinsics::rgb() };
            let fp = footprint_corners_world(&EnuPoint::new(0.0, 0.0, z), yaw, &cam).unwrap();
            let p = EnuPoint::ground(px, py);
            prop_assert_eq!(point_in_footprint(&p, &fp), half_plane_inside(&p, &fp));
        }

        #[test]
        fn manhattan_is_a_metric(
            a in (-100.0f64..100.0, -100.0f64..100.0),
            b in (-100.0f64..100.0, -100.0f64..100.0),
            c in (-100.0f64..100.0, -100.0f64..100.0),
        ) {
            let (a, b, c) = (EnuPoint::ground(a.0, a.1), EnuPoint::ground(b.0, b.1), EnuPoint::ground(c.0, c.1));
            prop_assert_eq!(manhattan(&a, &b), manhattan(&b, &a));
            prop_assert!(manhattan(&a, &c) <= manhattan(&a, &b) + manhattan(&b, &c) + 1e-12);
        }
    }
}
