use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};

/// A point on the simulator's virtual clock.
///
/// Totally ordered (via `f64::total_cmp`) so it can key event queues.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VTime(pub f64);

impl VTime {
    pub const ZERO: VTime = VTime(0.0);

    pub fn as_f64(self) -> f64 {
        self.0
    }
}

impl Eq for VTime {}

impl PartialOrd for VTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for VTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for VTime {
    type Output = VTime;

    fn add(self, rhs: f64) -> VTime {
        VTime(self.0 + rhs)
    }
}

impl Sub for VTime {
    type Output = f64;

    fn sub(self, rhs: VTime) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for VTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.0)
    }
}
