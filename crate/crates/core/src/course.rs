//! Elevation profiles indexed by distance, and their resampling onto the
//! uniform grid used by the solver.

use std::path::Path;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Mean Earth radius used for haversine distances, m.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CourseFormat {
    Csv,
    Gpx,
}

impl CourseFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("gpx") => CourseFormat::Gpx,
            _ => CourseFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Course {
    /// `(s, z)` pairs, distance and elevation in metres.
    points: Vec<(f64, f64)>,
    /// Set once the course sits on a uniform grid.
    ds: Option<f64>,
    /// Road slope of each segment, rad.
    grades: Vec<f64>,
}

impl Course {
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("course", "need at least 2 points"));
        }
        if points.iter().any(|(s, z)| !(s.is_finite() && z.is_finite())) {
            return Err(Error::invalid("course", "non-finite coordinate"));
        }
        if points[0].0 != 0.0 {
            return Err(Error::invalid("course", "distance must start at 0"));
        }
        if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid(
                "course",
                format!("distance not strictly increasing at s={}", w[1].0),
            ));
        }
        let grades = points
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).atan())
            .collect();
        Ok(Self {
            points,
            ds: None,
            grades,
        })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn grades(&self) -> &[f64] {
        &self.grades
    }

    pub fn ds(&self) -> Option<f64> {
        self.ds
    }

    pub fn length(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.0)
    }

    pub fn segments(&self) -> usize {
        self.grades.len()
    }

    /// Total ascent, sum of positive elevation differences.
    pub fn total_climb(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1).max(0.0))
            .sum()
    }

    /// Elevation at distance `s` by linear interpolation (clamped to the ends).
    pub fn elevation_at(&self, s: f64) -> f64 {
        let pts = &self.points;
        if s <= 0.0 {
            return pts[0].1;
        }
        if s >= self.length() {
            return pts[pts.len() - 1].1;
        }
        let i = self.segment_index(s);
        let (s0, z0) = pts[i];
        let (s1, z1) = pts[i + 1];
        z0 + (z1 - z0) * (s - s0) / (s1 - s0)
    }

    /// Index of the segment containing `s`; segments are closed on the left.
    pub fn segment_index(&self, s: f64) -> usize {
        let last = self.grades.len() - 1;
        if let Some(ds) = self.ds {
            return ((s / ds).floor().max(0.0) as usize).min(last);
        }
        let idx = self.points.partition_point(|p| p.0 <= s);
        idx.saturating_sub(1).min(last)
    }

    /// Road slope at distance `s`, right-continuous at segment boundaries.
    pub fn grade_at(&self, s: f64) -> f64 {
        self.grades[self.segment_index(s)]
    }

    /// Linear interpolation onto a uniform `ds` grid, truncated to the last
    /// full multiple of `ds`.
    pub fn resample(&self, ds: f64) -> Result<Course> {
        if !(ds > 0.0 && ds.is_finite()) {
            return Err(Error::invalid("resample", format!("ds={ds} must be positive")));
        }
        let length = self.length();
        if ds > length {
            return Err(Error::invalid(
                "resample",
                format!("ds={ds} exceeds course length {length}"),
            ));
        }
        // Tolerate representation error when the length is a multiple of ds.
        let n = (length / ds * (1.0 + 1e-12)).floor() as usize;
        let points: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let s = k as f64 * ds;
                (s, self.elevation_at(s))
            })
            .collect();
        let grades = points
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / ds).atan())
            .collect();
        Ok(Course {
            points,
            ds: Some(ds),
            grades,
        })
    }

    /// Centered moving average of elevation over `window` points.
    pub fn smoothed(&self, window: usize) -> Result<Course> {
        if window <= 1 {
            return Ok(self.clone());
        }
        let half = window / 2;
        let n = self.points.len();
        let points = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half).min(n - 1);
                let mean =
                    self.points[lo..=hi].iter().map(|p| p.1).sum::<f64>() / (hi - lo + 1) as f64;
                (self.points[i].0, mean)
            })
            .collect();
        let mut out = Course::from_points(points)?;
        out.ds = self.ds;
        Ok(out)
    }

    /// Stable content hash of the profile, used to check that two runs
    /// describe the same course.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (s, z) in &self.points {
            hasher.update(s.to_le_bytes());
            hasher.update(z.to_le_bytes());
        }
        hex::encode(&hasher.finalize()[..16])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance_m,elevation_m\n");
        for (s, z) in &self.points {
            out.push_str(&format!("{s},{z}\n"));
        }
        out
    }
}

pub fn load_course(path: &Path, format: CourseFormat) -> Result<Course> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        CourseFormat::Csv => parse_csv(&text, &path.display().to_string()),
        CourseFormat::Gpx => parse_gpx(&text),
    }
}

/// `distance_m,elevation_m` rows; a non-numeric first row is taken as a header.
pub fn parse_csv(text: &str, source_name: &str) -> Result<Course> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::Parse {
                source_name: source_name.into(),
                line: idx + 1,
                reason: "expected two columns".into(),
            });
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(s), Ok(z)) => points.push((s, z)),
            _ if idx == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    source_name: source_name.into(),
                    line: idx + 1,
                    reason: format!("non-numeric row `{},{}`", &record[0], &record[1]),
                })
            }
        }
    }
    Course::from_points(points)
}

/// Great-circle distance between two (lat, lon) points in degrees.
pub fn haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().asin()
}

/// Track points of a GPX 1.1 document as cumulative distance and elevation.
pub fn parse_gpx(text: &str) -> Result<Course> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut fixes: Vec<(f64, f64, Option<f64>)> = Vec::new();
    let mut in_ele = false;
    loop {
        match reader.read_event().map_err(|e| Error::Gpx(e.to_string()))? {
            Event::Start(e) | Event::Empty(e) if local(e.name().as_ref()) == b"trkpt" => {
                let mut lat = None;
                let mut lon = None;
                for attr in e.attributes() {
                    let attr = attr.map_err(|e| Error::Gpx(e.to_string()))?;
                    let value = std::str::from_utf8(&attr.value)
                        .ok()
                        .and_then(|v| v.trim().parse::<f64>().ok());
                    match attr.key.as_ref() {
                        b"lat" => lat = value,
                        b"lon" => lon = value,
                        _ => {}
                    }
                }
                match (lat, lon) {
                    (Some(lat), Some(lon)) => fixes.push((lat, lon, None)),
                    _ => return Err(Error::Gpx("trkpt without numeric lat/lon".into())),
                }
            }
            Event::Start(e) if local(e.name().as_ref()) == b"ele" => in_ele = true,
            Event::End(e) if local(e.name().as_ref()) == b"ele" => in_ele = false,
            Event::Text(t) if in_ele => {
                let raw = t.unescape().map_err(|e| Error::Gpx(e.to_string()))?;
                let ele = raw
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Gpx(format!("bad elevation `{raw}`")))?;
                if let Some(last) = fixes.last_mut() {
                    last.2 = Some(ele);
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if fixes.len() < 2 {
        return Err(Error::invalid("course", "GPX track has fewer than 2 points"));
    }
    let mut points = Vec::with_capacity(fixes.len());
    let mut s = 0.0;
    for (i, fix) in fixes.iter().enumerate() {
        let ele = fix
            .2
            .ok_or_else(|| Error::Gpx(format!("trackpoint {i} has no elevation")))?;
        if i > 0 {
            let prev = fixes[i - 1];
            s += haversine((prev.0, prev.1), (fix.0, fix.1));
        }
        points.push((s, ele));
    }
    Course::from_points(points)
}

fn local(name: &[u8]) -> &[u8] {
    match name.iter().rposition(|b| *b == b':') {
        Some(pos) => &name[pos + 1..],
        None => name,
    }
}
