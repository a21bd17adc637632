//! Deterministic grid world: occupancy grid, robot pose, discrete action
//! dynamics and the two sensor models.
//!
//! World files are UTF-8 text, one row per line: `#` wall, `.` free,
//! `S` free cell holding the initial pose (heading north). The outer
//! boundary must be wall and exactly one `S` must appear.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::som::InputVector;
use crate::transition::ActionId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("malformed grid: {0}")]
    MalformedGrid(String),
    #[error("expected exactly one start cell `S`, found {0}")]
    MissingStart(usize),
    #[error("boundary cell ({row}, {col}) is not a wall")]
    OpenBoundary { row: usize, col: usize },
    #[error("invalid pose ({row}, {col})")]
    InvalidPose { row: i64, col: i64 },
}

pub type Result<T> = std::result::Result<T, WorldError>;

/// Default sensor saturation distance, in cells.
pub const DEFAULT_MAX_RANGE: f64 = 8.0;
/// Ray-march step, in cells.
pub const RAY_STEP: f64 = 0.1;
pub const RING_RAYS: usize = 16;
pub const IMAGE_SIDE: usize = 8;
/// Side of the forward window the image sensor downsamples, in cells.
pub const IMAGE_WINDOW: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    N,
    E,
    S,
    W,
}

impl Heading {
    /// Quarter turns clockwise from north.
    pub fn quarter(self) -> usize {
        match self {
            Heading::N => 0,
            Heading::E => 1,
            Heading::S => 2,
            Heading::W => 3,
        }
    }

    pub fn from_quarter(q: usize) -> Self {
        [Heading::N, Heading::E, Heading::S, Heading::W][q % 4]
    }

    pub fn left(self) -> Self {
        Self::from_quarter(self.quarter() + 3)
    }

    pub fn right(self) -> Self {
        Self::from_quarter(self.quarter() + 1)
    }

    /// Unit step `(drow, dcol)`.
    pub fn step(self) -> (i64, i64) {
        match self {
            Heading::N => (-1, 0),
            Heading::E => (0, 1),
            Heading::S => (1, 0),
            Heading::W => (0, -1),
        }
    }

    pub const ALL: [Heading; 4] = [Heading::N, Heading::E, Heading::S, Heading::W];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pose {
    pub row: usize,
    pub col: usize,
    pub heading: Heading,
}

impl Pose {
    pub fn new(row: usize, col: usize, heading: Heading) -> Self {
        Self { row, col, heading }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorModel {
    Ring16,
    Image8x8,
}

impl SensorModel {
    pub fn dim(self) -> usize {
        match self {
            SensorModel::Ring16 => RING_RAYS,
            SensorModel::Image8x8 => IMAGE_SIDE * IMAGE_SIDE,
        }
    }
}

impl std::str::FromStr for SensorModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ring16" => Ok(SensorModel::Ring16),
            "image8x8" => Ok(SensorModel::Image8x8),
            other => Err(format!("unknown sensor `{other}` (expected ring16 or image8x8)")),
        }
    }
}

/// Unit direction vectors for the 16 absolute ray angles, clockwise from
/// north in steps of 22.5 degrees, as `(drow, dcol)`. A table rather than
/// per-call trigonometry so that a 90 degree turn maps rays onto each other
/// exactly.
fn ray_directions() -> [(f64, f64); RING_RAYS] {
    let mut dirs = [(0.0, 0.0); RING_RAYS];
    // first quadrant from closed-form values, the rest by exact rotation
    for (k, d) in dirs.iter_mut().take(4).enumerate() {
        let theta = k as f64 * std::f64::consts::PI / 8.0;
        let (s, c) = match k {
            0 => (0.0, 1.0),
            _ => theta.sin_cos(),
        };
        *d = (-c, s);
    }
    for k in 4..RING_RAYS {
        let (dr, dc) = dirs[k - 4];
        // clockwise quarter turn in (row, col) space
        dirs[k] = (dc, -dr);
    }
    dirs
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    start: Pose,
    max_range: f64,
}

impl GridWorld {
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.split('\n').collect();
        // a single trailing newline terminates the last row
        let rows = match rows.split_last() {
            Some((&"", rest)) => rest,
            _ => &rows[..],
        };
        if rows.is_empty() || rows[0].is_empty() {
            return Err(WorldError::MalformedGrid("empty grid".into()));
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut walls = Vec::with_capacity(width * height);
        let mut starts = Vec::new();
        for (r, line) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return Err(WorldError::MalformedGrid(format!(
                    "row {r} has {} cells, expected {width}",
                    line.chars().count()
                )));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'S' => {
                        walls.push(false);
                        starts.push((r, c));
                    }
                    other => {
                        return Err(WorldError::MalformedGrid(format!(
                            "unexpected character {other:?} at ({r}, {c})"
                        )))
                    }
                }
            }
        }
        for r in 0..height {
            for c in 0..width {
                let border = r == 0 || c == 0 || r + 1 == height || c + 1 == width;
                if border && !walls[r * width + c] {
                    return Err(WorldError::OpenBoundary { row: r, col: c });
                }
            }
        }
        if starts.len() != 1 {
            return Err(WorldError::MissingStart(starts.len()));
        }
        let (row, col) = starts[0];
        Ok(Self {
            width,
            height,
            walls,
            start: Pose::new(row, col, Heading::N),
            max_range: DEFAULT_MAX_RANGE,
        })
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<std::result::Result<Self, WorldError>> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn with_max_range(mut self, max_range: f64) -> Self {
        assert!(max_range > 0.0, "max_range must be positive");
        self.max_range = max_range;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    /// Cells outside the grid count as wall.
    pub fn is_wall(&self, row: i64, col: i64) -> bool {
        if row < 0 || col < 0 || row >= self.height as i64 || col >= self.width as i64 {
            return true;
        }
        self.walls[row as usize * self.width + col as usize]
    }

    pub fn free_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height)
            .flat_map(move |r| (0..self.width).map(move |c| (r, c)))
            .filter(|&(r, c)| !self.walls[r * self.width + c])
    }

    /// Every valid pose, row-major then by heading.
    pub fn all_poses(&self) -> Vec<Pose> {
        self.free_cells()
            .flat_map(|(r, c)| Heading::ALL.map(|h| Pose::new(r, c, h)))
            .collect()
    }

    fn check_pose(&self, pose: Pose) -> Result<()> {
        if self.is_wall(pose.row as i64, pose.col as i64) {
            return Err(WorldError::InvalidPose {
                row: pose.row as i64,
                col: pose.col as i64,
            });
        }
        Ok(())
    }

    pub fn apply_action(&self, pose: Pose, action: ActionId) -> Result<Pose> {
        self.check_pose(pose)?;
        Ok(match action {
            ActionId::Forward => {
                let (dr, dc) = pose.heading.step();
                let (r, c) = (pose.row as i64 + dr, pose.col as i64 + dc);
                if self.is_wall(r, c) {
                    pose
                } else {
                    Pose::new(r as usize, c as usize, pose.heading)
                }
            }
            ActionId::SpinLeft => Pose {
                heading: pose.heading.left(),
                ..pose
            },
            ActionId::SpinRight => Pose {
                heading: pose.heading.right(),
                ..pose
            },
            ActionId::Stop => pose,
        })
    }

    pub fn sense(&self, pose: Pose, model: SensorModel) -> Result<InputVector> {
        self.check_pose(pose)?;
        let values = match model {
            SensorModel::Ring16 => self.ring16(pose),
            SensorModel::Image8x8 => self.image8x8(pose),
        };
        Ok(InputVector::new(values).expect("sensor values are normalized"))
    }

    /// Distance to the first wall along ray `k` (relative to the heading),
    /// saturated at `max_range`.
    ///
    /// The robot sits at the centre of its cell. The ray advances in
    /// `RAY_STEP` increments; the first sample that falls in a wall cell
    /// identifies the obstacle, and the reading is the centre-to-centre
    /// distance from the robot's cell to that wall cell.
    pub fn ray_distance(&self, pose: Pose, k: usize) -> f64 {
        let dirs = ray_directions();
        let (dr, dc) = dirs[(pose.heading.quarter() * 4 + k) % RING_RAYS];
        let (r0, c0) = (pose.row as f64, pose.col as f64);
        let steps = (self.max_range / RAY_STEP).ceil() as usize;
        for i in 1..=steps {
            let t = i as f64 * RAY_STEP;
            let (r, c) = ((r0 + t * dr).round() as i64, (c0 + t * dc).round() as i64);
            if self.is_wall(r, c) {
                let (er, ec) = (r as f64 - r0, c as f64 - c0);
                return (er * er + ec * ec).sqrt().min(self.max_range);
            }
        }
        self.max_range
    }

    fn ring16(&self, pose: Pose) -> Vec<f64> {
        (0..RING_RAYS)
            .map(|k| self.ray_distance(pose, k) / self.max_range)
            .collect()
    }

    /// Occupancy of the `IMAGE_WINDOW` square ahead of the robot (free = 1,
    /// wall = 0), downsampled 2:1. Image row 0 is the far edge of the window
    /// and column 0 its left edge as seen facing along the heading.
    fn image8x8(&self, pose: Pose) -> Vec<f64> {
        let (fr, fc) = pose.heading.step();
        let (rr, rc) = pose.heading.right().step();
        let half = (IMAGE_WINDOW / 2) as i64;
        let window = IMAGE_WINDOW as i64;
        let cell = |ahead: i64, lateral: i64| -> f64 {
            let r = pose.row as i64 + ahead * fr + lateral * rr;
            let c = pose.col as i64 + ahead * fc + lateral * rc;
            if self.is_wall(r, c) {
                0.0
            } else {
                1.0
            }
        };
        let scale = IMAGE_WINDOW / IMAGE_SIDE;
        let mut out = Vec::with_capacity(IMAGE_SIDE * IMAGE_SIDE);
        for i in 0..IMAGE_SIDE {
            for j in 0..IMAGE_SIDE {
                // sampling midway between source pixels: bilinear weights
                // are equal over each scale x scale block
                let mut acc = 0.0;
                for di in 0..scale {
                    for dj in 0..scale {
                        let wi = (i * scale + di) as i64;
                        let wj = (j * scale + dj) as i64;
                        acc += cell(window - wi, wj - half);
                    }
                }
                out.push(acc / (scale * scale) as f64);
            }
        }
        out
    }
}
