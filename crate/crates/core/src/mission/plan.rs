use serde::{Deserialize, Serialize};

use crate::error::GeoError;
use crate::geo::{footprint_extent, position_step_delta, CameraIntrinsics, EnuPoint, SurveyArea};

/// Waypoint list flown at constant speed and altitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    pub waypoints: Vec<EnuPoint>,
    pub speed: f64,
    pub altitude: f64,
    /// Distance between adjacent lanes.
    pub lane_spacing: f64,
}

impl FlightPlan {
    pub fn lanes(&self) -> usize {
        self.waypoints.len() / 2
    }

    /// Total path length in metres.
    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                ((b.x - a.x).powi(2) + (b.y - a.y).powi(2) + (b.z - a.z).powi(2)).sqrt()
            })
            .sum()
    }

    pub fn duration(&self) -> f64 {
        self.length() / self.speed
    }

    /// Point at arc length `s` along the path, with the index of the leg it
    /// lies on. Clamped to the path ends.
    pub fn point_at(&self, s: f64) -> (EnuPoint, usize) {
        let mut remaining = s.max(0.0);
        for (i, w) in self.waypoints.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2) + (b.z - a.z).powi(2)).sqrt();
            if remaining <= len || i + 2 == self.waypoints.len() {
                let t = if len > 0.0 { (remaining / len).min(1.0) } else { 1.0 };
                return (
                    EnuPoint::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.z + t * (b.z - a.z)),
                    i,
                );
            }
            remaining -= len;
        }
        (self.waypoints.last().copied().unwrap_or_default(), 0)
    }
}

/// Boustrophedon survey of `survey`: legs run along the long axis, lanes
/// are spaced by the cross-track footprint width reduced by `overlap`, and
/// the lane set is centred on the rectangle.
pub fn lawnmower_waypoints(
    survey: &SurveyArea,
    cam: &CameraIntrinsics,
    overlap: f64,
    altitude: f64,
    speed: f64,
) -> Result<FlightPlan, GeoError> {
    if !survey.is_valid() {
        return Err(GeoError::NonPositiveLength(survey.width().min(survey.height())));
    }
    let ext = footprint_extent(altitude, cam)?;
    let along_y = survey.height() >= survey.width();
    // cross-track footprint size: body x when legs run along y
    let (cross_width, footprint_cross) = if along_y {
        (survey.width(), ext.length_x())
    } else {
        (survey.height(), ext.length_y())
    };
    let spacing = position_step_delta(footprint_cross, overlap)?;
    let lanes = if cross_width <= footprint_cross {
        1
    } else {
        (cross_width / spacing).ceil() as usize
    };
    let centre = if along_y {
        0.5 * (survey.min_x + survey.max_x)
    } else {
        0.5 * (survey.min_y + survey.max_y)
    };
    let first = centre - 0.5 * (lanes as f64 - 1.0) * spacing;
    let mut waypoints = Vec::with_capacity(2 * lanes);
    for i in 0..lanes {
        let c = first + i as f64 * spacing;
        let (lo, hi) = if along_y {
            (
                EnuPoint::new(c, survey.min_y, altitude),
                EnuPoint::new(c, survey.max_y, altitude),
            )
        } else {
            (
                EnuPoint::new(survey.min_x, c, altitude),
                EnuPoint::new(survey.max_x, c, altitude),
            )
        };
        if i % 2 == 0 {
            waypoints.extend([lo, hi]);
        } else {
            waypoints.extend([hi, lo]);
        }
    }
    Ok(FlightPlan {
        waypoints,
        speed,
        altitude,
        lane_spacing: spacing,
    })
}
