//! Study-region geometry: locations, pairwise distances, and enumeration of
//! the collection of variable-radius circular scan windows.

use ndarray::Array2;
use std::collections::HashSet;
use thiserror::Error;

/// A spatial unit (areal centroid) with a stable identifier and planar,
/// projected coordinates. Geodesic coordinates are not supported; project
/// before ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(id: impl Into<String>, x: f64, y: f64) -> Self {
        Self { id: id.into(), x, y }
    }
}

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("need at least 2 locations, got {0}")]
    TooFewLocations(usize),
    #[error("location {id:?} has a non-finite coordinate ({x}, {y})")]
    NonFiniteCoordinate { id: String, x: f64, y: f64 },
    #[error("duplicate location id {0:?}")]
    DuplicateId(String),
    #[error("distance matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("max window fraction must be in (0, 0.5], got {0}")]
    InvalidFraction(f64),
    #[error(
        "window cap of {max_fraction} over {n} locations admits no windows; \
         increase the fraction or the region size"
    )]
    EmptyCap { max_fraction: f64, n: usize },
    #[error("population weights: expected {expected} values, got {got}")]
    PopulationLength { expected: usize, got: usize },
    #[error("population weight at index {index} must be positive and finite, got {value}")]
    InvalidPopulation { index: usize, value: f64 },
}

/// Euclidean distance matrix between location centroids.
///
/// # Errors
/// Fewer than two locations, a non-finite coordinate, or a duplicate id.
pub fn distance_matrix(locations: &[Location]) -> Result<Array2<f64>, GeoError> {
    let n = locations.len();
    if n < 2 {
        return Err(GeoError::TooFewLocations(n));
    }
    let mut seen = HashSet::with_capacity(n);
    for loc in locations {
        if !(loc.x.is_finite() && loc.y.is_finite()) {
            return Err(GeoError::NonFiniteCoordinate {
                id: loc.id.clone(),
                x: loc.x,
                y: loc.y,
            });
        }
        if !seen.insert(loc.id.as_str()) {
            return Err(GeoError::DuplicateId(loc.id.clone()));
        }
    }
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (locations[i].x - locations[j].x).hypot(locations[i].y - locations[j].y);
            d[[i, j]] = dist;
            d[[j, i]] = dist;
        }
    }
    Ok(d)
}

/// A candidate circular window: exactly the locations within `radius` of the
/// centroid of `center`, stored as sorted indices into the location list.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialCluster {
    pub center: usize,
    pub radius: f64,
    /// Sorted ascending; always contains `center`.
    pub members: Vec<usize>,
}

impl PotentialCluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.binary_search(&index).is_ok()
    }

    /// True when the member sets share no location.
    pub fn disjoint_from(&self, other: &PotentialCluster) -> bool {
        // merge walk over two sorted lists
        let (mut i, mut j) = (0, 0);
        while i < self.members.len() && j < other.members.len() {
            match self.members[i].cmp(&other.members[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }
}

/// Basis on which the window-size cap is measured: share of the location
/// count (default) or share of the total at-risk population.
#[derive(Debug, Clone, Copy)]
pub enum SizeCap<'a> {
    Locations,
    Population(&'a [f64]),
}

/// Enumerates every circular window: for each center, balls grow by
/// nearest-neighbor inclusion (equidistant locations always enter together)
/// until the next step would exceed `max_fraction` of the region. Duplicate
/// member sets are dropped; order is deterministic (center index, then size).
///
/// # Errors
/// `max_fraction` outside (0, 0.5], a non-square matrix, or a cap so tight
/// that no window fits.
pub fn enumerate_windows(
    distances: &Array2<f64>,
    max_fraction: f64,
) -> Result<Vec<PotentialCluster>, GeoError> {
    enumerate_windows_capped(distances, max_fraction, SizeCap::Locations)
}

/// `enumerate_windows` with an explicit cap basis.
pub fn enumerate_windows_capped(
    distances: &Array2<f64>,
    max_fraction: f64,
    cap: SizeCap<'_>,
) -> Result<Vec<PotentialCluster>, GeoError> {
    let n = distances.nrows();
    if distances.ncols() != n {
        return Err(GeoError::NotSquare {
            rows: n,
            cols: distances.ncols(),
        });
    }
    if n < 2 {
        return Err(GeoError::TooFewLocations(n));
    }
    if !(max_fraction > 0.0 && max_fraction <= 0.5) {
        return Err(GeoError::InvalidFraction(max_fraction));
    }
    let budget = match cap {
        SizeCap::Locations => Budget::Count((max_fraction * n as f64).floor() as usize),
        SizeCap::Population(pops) => {
            if pops.len() != n {
                return Err(GeoError::PopulationLength {
                    expected: n,
                    got: pops.len(),
                });
            }
            for (index, &value) in pops.iter().enumerate() {
                if !(value.is_finite() && value > 0.0) {
                    return Err(GeoError::InvalidPopulation { index, value });
                }
            }
            Budget::Population {
                pops,
                cap: max_fraction * pops.iter().sum::<f64>(),
            }
        }
    };

    let mut windows = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for center in 0..n {
        order.clear();
        order.extend(0..n);
        order.sort_by(|&a, &b| {
            distances[[center, a]]
                .partial_cmp(&distances[[center, b]])
                .expect("finite distances")
                .then(a.cmp(&b))
        });

        let mut members: Vec<usize> = Vec::new();
        let mut used = 0.0;
        let mut cursor = 0;
        while cursor < n {
            // one growth step = the whole group of equidistant locations
            let step_distance = distances[[center, order[cursor]]];
            let mut end = cursor + 1;
            while end < n && distances[[center, order[end]]] == step_distance {
                end += 1;
            }
            let group = &order[cursor..end];
            if !budget.admits(members.len(), used, group) {
                break;
            }
            members.extend_from_slice(group);
            used += budget.weight(group);
            cursor = end;

            let mut sorted = members.clone();
            sorted.sort_unstable();
            if seen.insert(sorted.clone()) {
                windows.push(PotentialCluster {
                    center,
                    radius: step_distance,
                    members: sorted,
                });
            }
        }
    }
    if windows.is_empty() {
        return Err(GeoError::EmptyCap { max_fraction, n });
    }
    Ok(windows)
}

enum Budget<'a> {
    Count(usize),
    Population { pops: &'a [f64], cap: f64 },
}

impl Budget<'_> {
    fn admits(&self, current_len: usize, current_weight: f64, group: &[usize]) -> bool {
        match self {
            Budget::Count(cap) => current_len + group.len() <= *cap,
            Budget::Population { cap, .. } => current_weight + self.weight(group) <= *cap,
        }
    }

    fn weight(&self, group: &[usize]) -> f64 {
        match self {
            Budget::Count(_) => group.len() as f64,
            Budget::Population { pops, .. } => group.iter().map(|&i| pops[i]).sum(),
        }
    }
}
