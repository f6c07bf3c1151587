//! Raster record of ground the camera has already seen.

use std::io::{self, Write};

use crate::geo::{EnuPoint, Footprint, SurveyArea};

pub const DEFAULT_CELL_SIZE: f64 = 0.5;

/// Cell geometry shared by the coverage map and its scanline rasterizer.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Raster {
    origin: EnuPoint,
    cell_size: f64,
    width: usize,
    height: usize,
}

impl Raster {
    /// Visits every on-map cell whose centre lies inside `fp`, row by row.
    fn for_each_cell_under(&self, fp: &Footprint, mut f: impl FnMut(usize, usize)) {
        let (_, min_y, _, max_y) = fp.bbox();
        let cs = self.cell_size;
        let row_lo = ((min_y - self.origin.y) / cs - 0.5).ceil().max(0.0);
        let row_hi = ((max_y - self.origin.y) / cs - 0.5)
            .floor()
            .min(self.height as f64 - 1.0);
        if row_hi < row_lo {
            return;
        }
        for iy in row_lo as usize..=row_hi as usize {
            let yc = self.origin.y + (iy as f64 + 0.5) * cs;
            let Some((lo, hi)) = fp.row_span(yc) else {
                continue;
            };
            let col_lo = ((lo - self.origin.x) / cs - 0.5).ceil().max(0.0);
            let col_hi = ((hi - self.origin.x) / cs - 0.5).floor().min(self.width as f64 - 1.0);
            if col_hi < col_lo {
                continue;
            }
            for ix in col_lo as usize..=col_hi as usize {
                f(ix, iy);
            }
        }
    }
}

/// Seen-flag grid. A flag never clears once set.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    raster: Raster,
    bits: Vec<u64>,
}

impl CoverageMap {
    pub fn new(origin: EnuPoint, cell_size: f64, width: usize, height: usize) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        let words = (width * height).div_ceil(64);
        Self {
            raster: Raster {
                origin,
                cell_size,
                width,
                height,
            },
            bits: vec![0; words],
        }
    }

    /// Map covering `survey` plus `margin` metres on every side.
    pub fn for_survey(survey: &SurveyArea, margin: f64, cell_size: f64) -> Self {
        let area = survey.inflate(margin);
        let width = (area.width() / cell_size).ceil() as usize;
        let height = (area.height() / cell_size).ceil() as usize;
        Self::new(EnuPoint::ground(area.min_x, area.min_y), cell_size, width, height)
    }

    pub fn cell_size(&self) -> f64 {
        self.raster.cell_size
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.raster.width, self.raster.height)
    }

    pub fn origin(&self) -> EnuPoint {
        self.raster.origin
    }

    pub fn cell_centre(&self, ix: usize, iy: usize) -> EnuPoint {
        let r = &self.raster;
        EnuPoint::ground(
            r.origin.x + (ix as f64 + 0.5) * r.cell_size,
            r.origin.y + (iy as f64 + 0.5) * r.cell_size,
        )
    }

    /// Cell containing `p`, if it lies on the map.
    pub fn cell_of(&self, p: &EnuPoint) -> Option<(usize, usize)> {
        let r = &self.raster;
        let fx = ((p.x - r.origin.x) / r.cell_size).floor();
        let fy = ((p.y - r.origin.y) / r.cell_size).floor();
        if fx < 0.0 || fy < 0.0 || fx >= r.width as f64 || fy >= r.height as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }

    pub fn is_seen(&self, ix: usize, iy: usize) -> bool {
        let i = iy * self.raster.width + ix;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn seen_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of on-map cells whose centre lies inside `fp`.
    pub fn cells_under(&self, fp: &Footprint) -> usize {
        let mut n = 0;
        self.raster.for_each_cell_under(fp, |_, _| n += 1);
        n
    }

    /// Marks every cell under `fp` as seen. Off-map parts are clipped.
    pub fn stamp_footprint(&mut self, fp: &Footprint) {
        let width = self.raster.width;
        let bits = &mut self.bits;
        self.raster.for_each_cell_under(fp, |ix, iy| {
            let i = iy * width + ix;
            bits[i / 64] |= 1 << (i % 64);
        });
    }

    /// Share of the cells under `fp` that are already seen. A footprint that
    /// covers no cell counts as fully seen.
    pub fn overlap_fraction(&self, fp: &Footprint) -> f64 {
        let (mut seen, mut total) = (0usize, 0usize);
        self.raster.for_each_cell_under(fp, |ix, iy| {
            total += 1;
            seen += self.is_seen(ix, iy) as usize;
        });
        if total == 0 {
            1.0
        } else {
            seen as f64 / total as f64
        }
    }

    /// [`overlap_fraction`](Self::overlap_fraction) followed by
    /// [`stamp_footprint`](Self::stamp_footprint) in one pass.
    pub fn overlap_then_stamp(&mut self, fp: &Footprint) -> f64 {
        let (mut seen, mut total) = (0usize, 0usize);
        let width = self.raster.width;
        let bits = &mut self.bits;
        self.raster.for_each_cell_under(fp, |ix, iy| {
            let i = iy * width + ix;
            let (w, b) = (i / 64, i % 64);
            total += 1;
            seen += (bits[w] >> b & 1) as usize;
            bits[w] |= 1 << b;
        });
        if total == 0 {
            1.0
        } else {
            seen as f64 / total as f64
        }
    }

    /// Fraction of cells with centres inside `survey` that have been seen.
    pub fn coverage_ratio(&self, survey: &SurveyArea) -> f64 {
        let (mut seen, mut total) = (0usize, 0usize);
        self.raster.for_each_cell_under(&survey.as_footprint(), |ix, iy| {
            total += 1;
            seen += self.is_seen(ix, iy) as usize;
        });
        if total == 0 {
            0.0
        } else {
            seen as f64 / total as f64
        }
    }

    /// `x,y,seen` per cell, cell centres in metres.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,seen")?;
        let (width, height) = self.dims();
        for iy in 0..height {
            for ix in 0..width {
                let c = self.cell_centre(ix, iy);
                writeln!(out, "{},{},{}", c.x, c.y, self.is_seen(ix, iy) as u8)?;
            }
        }
        Ok(())
    }

    /// Binary PGM, north up, seen cells white.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        let (width, height) = self.dims();
        write!(out, "P5\n{width} {height}\n255\n")?;
        let mut row = vec![0u8; width];
        for iy in (0..height).rev() {
            for (ix, px) in row.iter_mut().enumerate() {
                *px = if self.is_seen(ix, iy) { 255 } else { 0 };
            }
            out.write_all(&row)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{footprint_corners_world, CameraIntrinsics};
    use proptest::prelude::*;

    fn map() -> CoverageMap {
        CoverageMap::for_survey(&SurveyArea::new(0.0, 0.0, 40.0, 40.0), 0.0, 0.5)
    }

    #[test]
    fn fresh_map_is_empty() {
        let m = map();
        assert_eq!(m.seen_count(), 0);
        assert_eq!(m.coverage_ratio(&SurveyArea::new(0.0, 0.0, 40.0, 40.0)), 0.0);
    }

    #[test]
    fn stamp_count_tracks_area() {
        let mut m = map();
        let cam = CameraIntrinsics::rgb();
        let fp = footprint_corners_world(&EnuPoint::new(20.0, 20.0, 16.0), 0.3, &cam).unwrap();
        m.stamp_footprint(&fp);
        let expected = fp.area() / 0.25;
        // one perimeter band of cells
        let perimeter: f64 = (0..4)
            .map(|i| fp.corners[i].horizontal_distance(&fp.corners[(i + 1) % 4]))
            .sum();
        let band = perimeter / 0.5;
        assert!(
            (m.seen_count() as f64 - expected).abs() <= band,
            "{} vs {expected}",
            m.seen_count()
        );
    }

    #[test]
    fn stamping_is_idempotent_and_requery_is_one() {
        let mut m = map();
        let fp = Footprint::rect(3.3, 4.1, 9.7, 12.2);
        m.stamp_footprint(&fp);
        let once = m.clone();
        m.stamp_footprint(&fp);
        assert_eq!(m, once);
        assert_eq!(m.overlap_fraction(&fp), 1.0);
    }

    #[test]
    fn off_map_footprint_changes_nothing() {
        let mut m = map();
        let fp = Footprint::rect(100.0, 100.0, 110.0, 110.0);
        m.stamp_footprint(&fp);
        assert_eq!(m.seen_count(), 0);
        assert_eq!(m.overlap_fraction(&fp), 1.0);
    }

    #[test]
    fn virgin_and_half_overlap() {
        let mut m = map();
        let fp = Footprint::rect(10.0, 10.0, 20.0, 16.0);
        assert_eq!(m.overlap_fraction(&fp), 0.0);
        m.stamp_footprint(&Footprint::rect(0.0, 0.0, 15.0, 40.0));
        let eps = m.overlap_fraction(&fp);
        assert!((eps - 0.5).abs() <= 2.0 * 0.5 / 10.0, "{eps}");
    }

    #[test]
    fn single_stamp_coverage_ratio_is_area_ratio() {
        let mut m = map();
        let survey = SurveyArea::new(0.0, 0.0, 40.0, 40.0);
        m.stamp_footprint(&Footprint::rect(0.0, 0.0, 10.0, 20.0));
        assert!((m.coverage_ratio(&survey) - 200.0 / 1600.0).abs() < 1e-12);
    }

    #[test]
    fn fused_query_matches_separate_calls() {
        let mut a = map();
        let mut b = map();
        a.stamp_footprint(&Footprint::rect(5.0, 5.0, 12.0, 9.0));
        b.stamp_footprint(&Footprint::rect(5.0, 5.0, 12.0, 9.0));
        let fp = Footprint::rect(8.0, 6.0, 15.0, 14.0);
        let eps = a.overlap_fraction(&fp);
        a.stamp_footprint(&fp);
        assert_eq!(b.overlap_then_stamp(&fp), eps);
        assert_eq!(a, b);
    }

    #[test]
    fn pgm_has_expected_size() {
        let m = map();
        let mut buf = Vec::new();
        m.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n80 80\n255\n"));
        assert_eq!(buf.len(), "P5\n80 80\n255\n".len() + 80 * 80);
    }

    fn rect_strategy() -> impl Strategy<Value = Footprint> {
        (-5.0f64..45.0, -5.0f64..45.0, 0.2f64..15.0, 0.2f64..15.0, -3.2f64..3.2).prop_map(|(x, y, w, h, yaw)| {
            let (s, c) = yaw.sin_cos();
            let corners = [(-w, -h), (w, -h), (w, h), (-w, h)]
                .map(|(dx, dy)| EnuPoint::ground(x + c * dx * 0.5 - s * dy * 0.5, y + s * dx * 0.5 + c * dy * 0.5));
            Footprint::from_corners(corners)
        })
    }

    proptest! {
        #[test]
        fn overlap_stays_in_unit_interval_and_never_decreases(
            stamps in proptest::collection::vec(rect_strategy(), 1..8),
            query in rect_strategy(),
        ) {
            let mut m = map();
            let mut last = m.overlap_fraction(&query);
            for fp in &stamps {
                let before = m.seen_count();
                m.stamp_footprint(fp);
                prop_assert!(m.seen_count() >= before);
                let eps = m.overlap_fraction(&query);
                prop_assert!((0.0..=1.0).contains(&eps));
                prop_assert!(eps >= last);
                last = eps;
                prop_assert_eq!(m.overlap_fraction(fp), 1.0);
            }
        }
    }
}
