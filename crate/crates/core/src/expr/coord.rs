//! Coordinates of a jet space.
//!
//! A [`Coordinate`] is one of the symbols an [`Expression`](super::Expression)
//! is built from: a parameter, an independent variable, a dependent variable
//! or one of its partial derivatives. Derivative multi-indices are stored as
//! sorted lists of independent-variable positions, so `u_xy` and `u_yx` are the
//! same coordinate.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::Serialize;
use smallvec::SmallVec;

/// Sorted multiset of independent-variable positions.
pub type MultiIndex = SmallVec<[u8; 4]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordKind {
    Parameter,
    Independent,
    Dependent,
    /// Dependent variable of a reduced equation (the `phi` of an ansatz).
    ReducedDependent,
}

impl CoordKind {
    fn class(self) -> u8 {
        match self {
            CoordKind::Parameter => 0,
            CoordKind::Independent => 1,
            CoordKind::Dependent | CoordKind::ReducedDependent => 2,
        }
    }
}

#[derive(Debug)]
struct CoordData {
    kind: CoordKind,
    index: u16,
    name: Arc<str>,
    multi: MultiIndex,
    label: Arc<str>,
}

#[derive(Clone)]
pub struct Coordinate(Arc<CoordData>);

impl Coordinate {
    pub fn parameter(index: usize, name: &str) -> Self {
        Self::plain(CoordKind::Parameter, index, name)
    }

    pub fn independent(index: usize, name: &str) -> Self {
        Self::plain(CoordKind::Independent, index, name)
    }

    fn plain(kind: CoordKind, index: usize, name: &str) -> Self {
        let name: Arc<str> = Arc::from(name);
        Coordinate(Arc::new(CoordData {
            kind,
            index: index as u16,
            label: name.clone(),
            name,
            multi: MultiIndex::new(),
        }))
    }

    /// A dependent variable or one of its derivatives. `suffix_names` gives the
    /// printed name of each independent position appearing in `multi`.
    pub fn jet(
        kind: CoordKind,
        dep_index: usize,
        dep_name: &str,
        mut multi: MultiIndex,
        indep_names: &[Arc<str>],
    ) -> Self {
        debug_assert!(matches!(
            kind,
            CoordKind::Dependent | CoordKind::ReducedDependent
        ));
        multi.sort_unstable();
        let label: Arc<str> = if multi.is_empty() {
            Arc::from(dep_name)
        } else {
            let mut s = String::from(dep_name);
            s.push('_');
            for &i in &multi {
                s.push_str(&indep_names[i as usize]);
            }
            Arc::from(s.as_str())
        };
        Coordinate(Arc::new(CoordData {
            kind,
            index: dep_index as u16,
            name: Arc::from(dep_name),
            multi,
            label,
        }))
    }

    pub fn kind(&self) -> CoordKind {
        self.0.kind
    }

    /// Position of the symbol among the declared symbols of its kind.
    pub fn index(&self) -> usize {
        self.0.index as usize
    }

    /// Base name (`u` for `u_xy`).
    pub fn name(&self) -> &str {
        &self.0.name
    }

    /// Printed form (`u_xy`).
    pub fn label(&self) -> &str {
        &self.0.label
    }

    pub fn multi_index(&self) -> &[u8] {
        &self.0.multi
    }

    pub fn order(&self) -> usize {
        self.0.multi.len()
    }

    pub fn is_jet(&self) -> bool {
        matches!(
            self.0.kind,
            CoordKind::Dependent | CoordKind::ReducedDependent
        )
    }

    pub fn is_independent(&self) -> bool {
        self.0.kind == CoordKind::Independent
    }

    pub fn is_parameter(&self) -> bool {
        self.0.kind == CoordKind::Parameter
    }

    fn key(&self) -> (u8, usize, CoordKind, u16, &[u8], &str) {
        let d = &self.0;
        (d.kind.class(), d.multi.len(), d.kind, d.index, &d.multi, &d.name)
    }
}

impl PartialEq for Coordinate {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.key() == other.key()
    }
}

impl Eq for Coordinate {}

impl Hash for Coordinate {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl Ord for Coordinate {
    /// Parameters < independents < jets; jets by order, then dependent index,
    /// then multi-index in declaration order of the independents.
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for Coordinate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use smallvec::smallvec;

    fn names() -> Vec<Arc<str>> {
        ["t", "x", "y"].iter().map(|s| Arc::from(*s)).collect()
    }

    #[test]
    fn mixed_partials_coincide() {
        let n = names();
        let a = Coordinate::jet(CoordKind::Dependent, 0, "u", smallvec![1, 2], &n);
        let b = Coordinate::jet(CoordKind::Dependent, 0, "u", smallvec![2, 1], &n);
        assert_eq!(a, b);
        assert_eq!(a.label(), "u_xy");
        assert_eq!(b.label(), "u_xy");
    }

    #[test]
    fn ranking() {
        let n = names();
        let t = Coordinate::independent(0, "t");
        let y = Coordinate::independent(2, "y");
        let u = Coordinate::jet(CoordKind::Dependent, 0, "u", smallvec![], &n);
        let ux = Coordinate::jet(CoordKind::Dependent, 0, "u", smallvec![1], &n);
        let uy = Coordinate::jet(CoordKind::Dependent, 0, "u", smallvec![2], &n);
        let utt = Coordinate::jet(CoordKind::Dependent, 0, "u", smallvec![0, 0], &n);
        let lam = Coordinate::parameter(0, "lambda0");
        assert!(lam < t && t < y && y < u && u < ux && ux < uy && uy < utt);
    }
}
