//! Sampled dynamical maps and sampled generators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::superop::{self, Superoperator};

/// Tolerance on `maps[0] = identity`.
pub const INITIAL_IDENTITY_TOL: f64 = 1e-12;
/// Drift budget for trace preservation along a propagated trajectory.
pub const TP_DRIFT_TOL: f64 = 1e-6;

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("non-finite grid value".into()));
    }
    if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(format!("grid not strictly increasing at {} -> {}", w[0], w[1])));
    }
    Ok(())
}

/// `Lambda(t, t0)` sampled on an increasing grid starting at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapTrajectoryRepr", into = "MapTrajectoryRepr")]
pub struct MapTrajectory {
    t0: f64,
    grid: Vec<f64>,
    maps: Vec<Superoperator>,
}

#[derive(Serialize, Deserialize)]
struct MapTrajectoryRepr {
    t0: f64,
    grid: Vec<f64>,
    maps: Vec<Superoperator>,
}

impl TryFrom<MapTrajectoryRepr> for MapTrajectory {
    type Error = Error;
    fn try_from(r: MapTrajectoryRepr) -> Result<Self> {
        MapTrajectory::new(r.t0, r.grid, r.maps)
    }
}

impl From<MapTrajectory> for MapTrajectoryRepr {
    fn from(t: MapTrajectory) -> Self {
        MapTrajectoryRepr {
            t0: t.t0,
            grid: t.grid,
            maps: t.maps,
        }
    }
}

impl MapTrajectory {
    pub fn new(t0: f64, grid: Vec<f64>, maps: Vec<Superoperator>) -> Result<Self> {
        check_grid(&grid)?;
        if grid.len() != maps.len() {
            return Err(Error::InvalidGrid(format!("{} grid points but {} maps", grid.len(), maps.len())));
        }
        if (grid[0] - t0).abs() > 1e-12 * t0.abs().max(1.0) {
            return Err(Error::InvalidGrid(format!("grid starts at {} but t0 = {t0}", grid[0])));
        }
        let dim = maps[0].dim();
        if maps.iter().any(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch("maps of different dimensions in one trajectory".into()));
        }
        let start = maps[0].max_entry_distance(&Superoperator::identity(dim));
        if start > INITIAL_IDENTITY_TOL {
            return Err(Error::InvalidGrid(format!("initial map differs from identity by {start:e}")));
        }
        Ok(MapTrajectory { t0, grid, maps })
    }

    /// Samples `map(tau)` at `t0 + tau` for every `tau` in `taus` (which must start at 0).
    pub fn from_fn(t0: f64, taus: &[f64], map: impl Fn(f64) -> Result<Superoperator>) -> Result<Self> {
        let maps = taus.iter().map(|&tau| map(tau)).collect::<Result<Vec<_>>>()?;
        Self::new(t0, taus.iter().map(|tau| t0 + tau).collect(), maps)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn maps(&self) -> &[Superoperator] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.maps[0].dim()
    }

    pub fn last(&self) -> &Superoperator {
        self.maps.last().expect("trajectory is non-empty")
    }

    /// Largest trace-preservation witness along the trajectory.
    pub fn max_tp_drift(&self) -> f64 {
        self.maps.iter().map(|m| superop::trace_defect(m, 1.0)).fold(0.0, f64::max)
    }

    /// Smallest Choi eigenvalue along the trajectory.
    pub fn min_choi_eigenvalue(&self) -> f64 {
        self.maps
            .iter()
            .map(|m| superop::is_completely_positive(m, 0.0).value)
            .fold(f64::INFINITY, f64::min)
    }

    /// Elapsed times `t - t0`.
    pub fn elapsed(&self) -> Vec<f64> {
        self.grid.iter().map(|t| t - self.t0).collect()
    }

    /// Supremum over shared grid points of the Frobenius distance. Grids are
    /// matched on elapsed time; points present in only one trajectory are
    /// skipped. Returns `None` when no point is shared.
    pub fn sup_distance(&self, other: &MapTrajectory) -> Option<f64> {
        let mut j = 0;
        let mut worst: Option<f64> = None;
        let other_elapsed = other.elapsed();
        for (i, tau) in self.elapsed().iter().enumerate() {
            while j < other_elapsed.len() && other_elapsed[j] < tau - 1e-9 {
                j += 1;
            }
            if j < other_elapsed.len() && (other_elapsed[j] - tau).abs() <= 1e-9 {
                let d = self.maps[i].distance(&other.maps[j]);
                worst = Some(worst.map_or(d, |w: f64| w.max(d)));
            }
        }
        worst
    }
}

/// A time-local generator sampled on a grid. `None` marks a grid point where
/// extraction failed the invertibility test; such points are never filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorTrajectory {
    grid: Vec<f64>,
    generators: Vec<Option<Superoperator>>,
}

impl GeneratorTrajectory {
    pub fn new(grid: Vec<f64>, generators: Vec<Option<Superoperator>>) -> Result<Self> {
        check_grid(&grid)?;
        if grid.len() != generators.len() {
            return Err(Error::InvalidGrid(format!(
                "{} grid points but {} generators",
                grid.len(),
                generators.len()
            )));
        }
        Ok(GeneratorTrajectory { grid, generators })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn generators(&self) -> &[Option<Superoperator>] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn singular_flags(&self) -> Vec<bool> {
        self.generators.iter().map(Option::is_none).collect()
    }

    pub fn singular_times(&self) -> Vec<f64> {
        self.grid
            .iter()
            .zip(&self.generators)
            .filter(|(_, g)| g.is_none())
            .map(|(t, _)| *t)
            .collect()
    }

    /// Largest trace-annihilation defect over non-singular points.
    pub fn max_trace_defect(&self) -> f64 {
        self.generators
            .iter()
            .flatten()
            .map(|g| superop::trace_defect(g, 0.0))
            .fold(0.0, f64::max)
    }
}
