//! Workspaces: bounds, convex obstacles, goal region and measurement regions.

use nalgebra::{DMatrix, DVector};

use crate::belief::GaussianBelief;
use crate::error::{Error, Result};
use crate::geometry::{Aabb, ConvexPolygon};
use crate::linalg::validated_psd;
use crate::validity;

#[derive(Debug, Clone, PartialEq)]
pub enum GoalRegion {
    Box(Aabb),
    Disc { center: DVector<f64>, radius: f64 },
}

impl GoalRegion {
    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            GoalRegion::Box(b) => b.contains(p),
            GoalRegion::Disc { center, radius } => {
                let d2: f64 = center.iter().zip(p).map(|(c, x)| (c - x) * (c - x)).sum();
                d2 <= radius * radius
            }
        }
    }

    pub fn center(&self) -> DVector<f64> {
        match self {
            GoalRegion::Box(b) => b.center(),
            GoalRegion::Disc { center, .. } => center.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GoalRegion::Box(b) => b.dim(),
            GoalRegion::Disc { center, .. } => center.len(),
        }
    }

    fn bounding_box(&self) -> Aabb {
        match self {
            GoalRegion::Box(b) => b.clone(),
            GoalRegion::Disc { center, radius } => Aabb {
                lower: center.add_scalar(-radius),
                upper: center.add_scalar(*radius),
            },
        }
    }
}

/// Area where measurements with covariance `noise` are received.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRegion {
    pub region: ConvexPolygon,
    pub noise: DMatrix<f64>,
}

/// How planning decides whether a measurement is received at a predicted belief.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementMembership {
    /// The nominal position lies inside the region.
    Nominal,
    /// A conservative lower bound on the probability of being inside the region is at least
    /// `level`.
    Probabilistic { level: f64 },
}

/// How the per-step collision budget is shared among obstacles and the workspace boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskAllocation {
    /// The summed risk over all obstacles and the boundary stays below `delta`, which bounds
    /// the probability of the union.
    Union,
    /// Each obstacle and the boundary separately stay below `delta`.
    PerObstacle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub bounds: Aabb,
    pub obstacles: Vec<ConvexPolygon>,
    pub goal: GoalRegion,
    pub measurement_regions: Vec<MeasurementRegion>,
    /// Maximum allowed collision probability per step.
    pub delta: f64,
    pub risk_allocation: RiskAllocation,
    pub membership: MeasurementMembership,
}

impl Environment {
    pub fn new(
        bounds: Aabb,
        obstacles: Vec<ConvexPolygon>,
        goal: GoalRegion,
        measurement_regions: Vec<MeasurementRegion>,
        delta: f64,
    ) -> Result<Self> {
        let env = Self {
            bounds,
            obstacles,
            goal,
            measurement_regions,
            delta,
            risk_allocation: RiskAllocation::Union,
            membership: MeasurementMembership::Nominal,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.bounds.dim();
        if !(2..=3).contains(&k) {
            return Err(Error::Invalid(format!("workspace must be 2-D or 3-D, got {k}")));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if self.goal.dim() != k {
            return Err(Error::DimensionMismatch("goal and workspace dimensions differ".into()));
        }
        if !self.goal.bounding_box().intersects(&self.bounds) {
            return Err(Error::Invalid("goal region does not intersect the workspace".into()));
        }
        if let GoalRegion::Disc { radius, .. } = self.goal {
            if !(radius > 0.0) {
                return Err(Error::Invalid("goal disc radius must be positive".into()));
            }
        }
        if let MeasurementMembership::Probabilistic { level } = self.membership {
            if !(0.0..=1.0).contains(&level) {
                return Err(Error::Invalid("membership level must lie in [0, 1]".into()));
            }
        }
        let p = self.measurement_regions.first().map(|m| m.noise.nrows());
        for m in &self.measurement_regions {
            if Some(m.noise.nrows()) != p {
                return Err(Error::DimensionMismatch(
                    "measurement regions disagree on measurement dimension".into(),
                ));
            }
            validated_psd(&m.noise)?;
        }
        Ok(())
    }

    /// Number of leading state coordinates that are positions.
    pub fn position_dims(&self) -> usize {
        self.bounds.dim()
    }

    /// Measurement noise received at a position during execution (true-state membership).
    pub fn measurement_at_position(&self, p: &[f64]) -> Option<&DMatrix<f64>> {
        let q = [p[0], p.get(1).copied().unwrap_or(0.0)];
        self.measurement_regions
            .iter()
            .find(|m| m.region.contains(q))
            .map(|m| &m.noise)
    }

    /// Measurement noise assumed at planning time for a predicted belief whose mean is the
    /// nominal state.
    pub fn measurement_for_belief(&self, prior: &GaussianBelief) -> Option<&DMatrix<f64>> {
        match self.membership {
            MeasurementMembership::Nominal => self.measurement_at_position(prior.mean().as_slice()),
            MeasurementMembership::Probabilistic { level } => self
                .measurement_regions
                .iter()
                .find(|m| {
                    m.region.contains(planar(prior.mean().as_slice()))
                        && validity::polygon_containment_lower_bound(prior, &m.region) >= level
                })
                .map(|m| &m.noise),
        }
    }

    pub fn with_membership(mut self, membership: MeasurementMembership) -> Self {
        self.membership = membership;
        self
    }

    pub fn with_risk_allocation(mut self, allocation: RiskAllocation) -> Self {
        self.risk_allocation = allocation;
        self
    }

    /// Whether a deterministic position is outside every obstacle and inside the bounds.
    pub fn point_is_free(&self, p: &[f64]) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(planar(p)))
    }
}

/// First two coordinates of a position; a missing second coordinate reads as zero.
pub fn planar(p: &[f64]) -> [f64; 2] {
    [p[0], p.get(1).copied().unwrap_or(0.0)]
}
