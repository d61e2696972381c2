use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Default cap on the total Hilbert-space dimension (12 qubits).
pub const DEFAULT_MAX_DIM: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Closed,
}

/// Sites, local dimensions and boundary condition of a chain.
///
/// Site 0 is the slowest-varying tensor index everywhere in the crate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainGeometry {
    dims: Vec<usize>,
    boundary: Boundary,
    max_dim: usize,
}

impl ChainGeometry {
    pub fn new(dims: Vec<usize>, boundary: Boundary) -> Result<Self> {
        Self::with_cap(dims, boundary, DEFAULT_MAX_DIM)
    }

    pub fn with_cap(dims: Vec<usize>, boundary: Boundary, max_dim: usize) -> Result<Self> {
        if dims.is_empty() {
            return domain("a chain needs at least one site");
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return domain(format!("local dimension {d} is below 2"));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(Error::DimensionCap { dim: usize::MAX, cap: max_dim })?;
        if total > max_dim {
            return Err(Error::DimensionCap { dim: total, cap: max_dim });
        }
        Ok(Self { dims, boundary, max_dim })
    }

    pub fn qubits(n: usize, boundary: Boundary) -> Result<Self> {
        Self::new(vec![2; n], boundary)
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, site: usize) -> usize {
        self.dims[site]
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn all_sites(&self) -> SiteSet {
        SiteSet::range(0, self.n())
    }

    /// Builds a site set, checking every index against the chain.
    pub fn sites(&self, sites: impl IntoIterator<Item = usize>) -> Result<SiteSet> {
        let s = SiteSet::new(sites)?;
        self.check(&s)?;
        Ok(s)
    }

    pub fn check(&self, s: &SiteSet) -> Result<()> {
        match s.as_slice().last() {
            Some(&m) if m >= self.n() => domain(format!("site {m} outside a chain of {} sites", self.n())),
            _ => Ok(()),
        }
    }

    pub fn dims_of(&self, s: &SiteSet) -> Vec<usize> {
        s.iter().map(|i| self.dims[i]).collect()
    }

    pub fn dim_of(&self, s: &SiteSet) -> usize {
        s.iter().map(|i| self.dims[i]).product()
    }

    /// `ln dim H_X`, the size `|X|` used in entropy bounds.
    pub fn log_dim(&self, s: &SiteSet) -> f64 {
        s.iter().map(|i| (self.dims[i] as f64).ln()).sum()
    }

    /// Graph distance between two sites.
    pub fn distance(&self, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j);
        match self.boundary {
            Boundary::Open => d,
            Boundary::Closed => d.min(self.n() - d),
        }
    }

    /// Distance between two site sets (minimum over pairs).
    pub fn set_distance(&self, a: &SiteSet, b: &SiteSet) -> usize {
        let mut best = usize::MAX;
        for i in a.iter() {
            for j in b.iter() {
                best = best.min(self.distance(i, j));
            }
        }
        best
    }

    fn neighbours(&self, i: usize) -> Vec<usize> {
        let n = self.n();
        let mut out = Vec::with_capacity(2);
        match self.boundary {
            Boundary::Open => {
                if i > 0 {
                    out.push(i - 1);
                }
                if i + 1 < n {
                    out.push(i + 1);
                }
            }
            Boundary::Closed => {
                if n > 1 {
                    out.push((i + n - 1) % n);
                    out.push((i + 1) % n);
                }
            }
        }
        out
    }

    /// True when every path from `a` to `c` in the chain graph passes through `b`.
    pub fn shields(&self, a: &SiteSet, b: &SiteSet, c: &SiteSet) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = a.iter().filter(|i| !b.contains(*i)).collect();
        for &i in &stack {
            seen[i] = true;
        }
        while let Some(i) = stack.pop() {
            if c.contains(i) {
                return false;
            }
            for j in self.neighbours(i) {
                if !seen[j] && !b.contains(j) {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        true
    }

    /// True when the sites form a single interval (an arc on a ring).
    pub fn is_contiguous(&self, s: &SiteSet) -> bool {
        self.arc_start(s).is_some()
    }

    /// First site of the interval formed by `s` when walking in increasing order.
    pub fn arc_start(&self, s: &SiteSet) -> Option<usize> {
        let v = s.as_slice();
        if v.is_empty() {
            return None;
        }
        if v[v.len() - 1] - v[0] + 1 == v.len() {
            return Some(v[0]);
        }
        if self.boundary == Boundary::Closed {
            let n = self.n();
            let gaps: Vec<usize> = (0..v.len()).filter(|&k| v[(k + 1) % v.len()] != (v[k] + 1) % n).collect();
            if gaps.len() == 1 {
                return Some(v[(gaps[0] + 1) % v.len()]);
            }
        }
        None
    }

    /// Sites of a contiguous set in walking order (wrapping on a ring).
    pub fn walk_order(&self, s: &SiteSet) -> Result<Vec<usize>> {
        let start = self
            .arc_start(s)
            .ok_or_else(|| Error::Domain(format!("sites {s} are not contiguous")))?;
        Ok((0..s.len()).map(|k| (start + k) % self.n()).collect())
    }

    /// Number of sites spanned by the smallest interval containing `s`.
    pub fn diameter(&self, s: &SiteSet) -> usize {
        let v = s.as_slice();
        if v.is_empty() {
            return 0;
        }
        let open = v[v.len() - 1] - v[0] + 1;
        match self.boundary {
            Boundary::Open => open,
            Boundary::Closed => {
                let n = self.n();
                let mut largest_gap = n - v[v.len() - 1] + v[0] - 1;
                for w in v.windows(2) {
                    largest_gap = largest_gap.max(w[1] - w[0] - 1);
                }
                n - largest_gap
            }
        }
    }

    /// Number of chain edges with exactly one endpoint in `s`.
    pub fn boundary_bonds(&self, s: &SiteSet) -> usize {
        let n = self.n();
        let edges: Vec<(usize, usize)> = match self.boundary {
            Boundary::Open => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            Boundary::Closed if n > 2 => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Boundary::Closed => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
        };
        edges.iter().filter(|(i, j)| s.contains(*i) != s.contains(*j)).count()
    }
}

/// Sorted, duplicate-free list of site indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct SiteSet(Vec<usize>);

impl<'de> Deserialize<'de> for SiteSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        SiteSet::new(v).map_err(serde::de::Error::custom)
    }
}

impl SiteSet {
    pub fn new(sites: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = sites.into_iter().collect();
        v.sort_unstable();
        if let Some(w) = v.windows(2).find(|w| w[0] == w[1]) {
            return domain(format!("duplicate site {}", w[0]));
        }
        Ok(Self(v))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn single(i: usize) -> Self {
        Self(vec![i])
    }

    /// Sites `start..end`.
    pub fn range(start: usize, end: usize) -> Self {
        Self((start..end).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Position of site `i` within the sorted list.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.0.binary_search(&i).ok()
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        let mut v = self.0.clone();
        v.extend(other.iter().filter(|i| !self.contains(*i)));
        v.sort_unstable();
        Self(v)
    }

    pub fn intersection(&self, other: &SiteSet) -> SiteSet {
        Self(self.iter().filter(|i| other.contains(*i)).collect())
    }

    pub fn difference(&self, other: &SiteSet) -> SiteSet {
        Self(self.iter().filter(|i| !other.contains(*i)).collect())
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.iter().all(|i| other.contains(i))
    }

    pub fn is_disjoint(&self, other: &SiteSet) -> bool {
        self.iter().all(|i| !other.contains(i))
    }

    pub fn union_all<'a>(sets: impl IntoIterator<Item = &'a SiteSet>) -> SiteSet {
        sets.into_iter().fold(SiteSet::empty(), |acc, s| acc.union(s))
    }
}

impl fmt::Display for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<usize> for SiteSet {
    /// Collects sites, silently dropping duplicates.
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut v: Vec<usize> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[usize]) -> SiteSet {
        SiteSet::new(v.iter().copied()).unwrap()
    }

    #[test]
    fn rejects_bad_geometries() {
        assert!(ChainGeometry::new(vec![], Boundary::Open).is_err());
        assert!(ChainGeometry::new(vec![2, 1], Boundary::Open).is_err());
        assert!(matches!(ChainGeometry::qubits(13, Boundary::Open), Err(Error::DimensionCap { dim: 8192, cap: 4096 })));
        assert!(ChainGeometry::with_cap(vec![2; 13], Boundary::Open, 8192).is_ok());
        assert!(SiteSet::new([1, 1]).is_err());
    }

    #[test]
    fn shielding_on_open_and_closed_chains() {
        let open = ChainGeometry::qubits(6, Boundary::Open).unwrap();
        let ring = ChainGeometry::qubits(6, Boundary::Closed).unwrap();
        let (a, b, c) = (s(&[0, 1]), s(&[2]), s(&[3, 4, 5]));
        assert!(open.shields(&a, &b, &c));
        assert!(!ring.shields(&a, &b, &c));
        assert!(ring.shields(&s(&[0]), &s(&[1, 5]), &s(&[2, 3, 4])));
    }

    #[test]
    fn ring_arcs_and_diameters() {
        let ring = ChainGeometry::qubits(6, Boundary::Closed).unwrap();
        let wrap = s(&[0, 1, 5]);
        assert!(ring.is_contiguous(&wrap));
        assert_eq!(ring.walk_order(&wrap).unwrap(), vec![5, 0, 1]);
        assert_eq!(ring.diameter(&wrap), 3);
        assert!(!ring.is_contiguous(&s(&[0, 2])));
        assert_eq!(ring.distance(0, 5), 1);
        assert_eq!(ring.boundary_bonds(&s(&[0, 1])), 2);
        let open = ChainGeometry::qubits(6, Boundary::Open).unwrap();
        assert_eq!(open.boundary_bonds(&s(&[0, 1])), 1);
        assert_eq!(open.diameter(&wrap), 6);
    }
}
