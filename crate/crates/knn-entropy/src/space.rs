//! Metric measure spaces with exact ball-volume scaling.
//!
//! Both provided spaces satisfy `mu(B(x, r)) = c_D r^D` for all radii up to
//! an exactness radius `rho`: Euclidean `R^D` (Lebesgue measure, `rho = inf`)
//! and the flat torus `[0, 1)^D` with per-coordinate wraparound and Euclidean
//! combining (`rho = 1/2`, the injectivity radius). The geodesic sphere is
//! deliberately not provided: its ball areas do not scale as `c r^D`, which
//! would void every exactness guarantee downstream.

use crate::{Error, Result};

/// Which geometry distances and ball volumes are computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Euclidean,
    /// `[0, 1)^D` with per-coordinate distance `min(|d|, 1 - |d|)`.
    FlatTorus,
}

/// A metric measure space of dimension `D` with `mu(B(x, r)) = c_D r^D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricSpace {
    kind: SpaceKind,
    dim: usize,
}

impl MetricSpace {
    pub fn new(kind: SpaceKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("space dimension must be >= 1".into()));
        }
        Ok(Self { kind, dim })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::Euclidean, dim)
    }

    pub fn flat_torus(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::FlatTorus, dim)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unit-ball volume constant `c_D = pi^{D/2} / Gamma(D/2 + 1)`, computed
    /// by the recurrence `c_D = (2 pi / D) c_{D-2}` (exact at D = 1, 2).
    ///
    /// The same constant applies on the torus: for `r <= 1/2` a torus ball
    /// is isometric to a Euclidean ball. `c_1 = 2` is the unit circle case.
    pub fn ball_volume_constant(&self) -> f64 {
        let mut c = if self.dim % 2 == 0 { 1.0 } else { 2.0 };
        let mut d = if self.dim % 2 == 0 { 0 } else { 1 };
        while d < self.dim {
            d += 2;
            c *= 2.0 * std::f64::consts::PI / d as f64;
        }
        c
    }

    /// Radius up to which `mu(B(x, r)) = c_D r^D` holds exactly.
    pub fn exactness_radius(&self) -> f64 {
        match self.kind {
            SpaceKind::Euclidean => f64::INFINITY,
            SpaceKind::FlatTorus => 0.5,
        }
    }

    /// Largest possible distance between two points.
    pub fn max_distance(&self) -> f64 {
        match self.kind {
            SpaceKind::Euclidean => f64::INFINITY,
            SpaceKind::FlatTorus => 0.5 * (self.dim as f64).sqrt(),
        }
    }

    /// `c_D r^D`. Exact as a ball measure only for `r <= exactness_radius()`;
    /// beyond that it is still returned but no longer equals `mu(B(x, r))`.
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Domain(format!("ball radius must be >= 0, got {r}")));
        }
        Ok(self.ball_volume_constant() * r.powi(self.dim as i32))
    }

    /// Whether `ball_volume(r)` is an exact ball measure at this radius.
    pub fn volume_is_exact(&self, r: f64) -> bool {
        r <= self.exactness_radius()
    }

    /// Map coordinates into the canonical torus domain `[0, 1)`. No-op for
    /// Euclidean space.
    pub fn canonicalize(&self, coords: &mut [f64]) {
        if self.kind == SpaceKind::FlatTorus {
            for c in coords.iter_mut() {
                *c = c.rem_euclid(1.0);
                // rem_euclid can return exactly 1.0 for tiny negatives.
                if *c >= 1.0 {
                    *c = 0.0;
                }
            }
        }
    }

    /// Squared distance. Points must conform to the space dimension.
    pub fn distance_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), self.dim, "point dimension mismatch");
        assert_eq!(b.len(), self.dim, "point dimension mismatch");
        let mut acc = 0.0;
        match self.kind {
            SpaceKind::Euclidean => {
                for (x, y) in a.iter().zip(b) {
                    let d = x - y;
                    acc += d * d;
                }
            }
            SpaceKind::FlatTorus => {
                for (x, y) in a.iter().zip(b) {
                    let d = (x - y).abs();
                    let d = d.min(1.0 - d);
                    acc += d * d;
                }
            }
        }
        acc
    }

    /// Metric distance between two points of this space.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.distance_sq(a, b).sqrt()
    }

    /// Checked variant of [`MetricSpace::distance`].
    pub fn try_distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        for p in [a, b] {
            if p.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: p.len(),
                });
            }
        }
        Ok(self.distance(a, b))
    }
}

impl std::fmt::Display for MetricSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            SpaceKind::Euclidean => write!(f, "euclidean(D={})", self.dim),
            SpaceKind::FlatTorus => write!(f, "flat_torus(D={})", self.dim),
        }
    }
}
