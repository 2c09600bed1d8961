//! First-order stochastic dominance over rank distributions (lower rank is better).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::RankDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dominance {
    StrictlyDominates,
    Equal,
    Incomparable,
    DominatedBy,
}

impl Dominance {
    pub fn reversed(self) -> Self {
        match self {
            Dominance::StrictlyDominates => Dominance::DominatedBy,
            Dominance::DominatedBy => Dominance::StrictlyDominates,
            other => other,
        }
    }
}

impl fmt::Display for Dominance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dominance::StrictlyDominates => "strictly dominates",
            Dominance::Equal => "equal",
            Dominance::Incomparable => "incomparable",
            Dominance::DominatedBy => "dominated by",
        };
        f.write_str(s)
    }
}

/// Comparison of `x` against `y`. For strict dominance in either direction,
/// `thresholds` lists the ranks `n` at which the two CDFs differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominanceVerdict {
    pub relation: Dominance,
    pub thresholds: Vec<usize>,
}

impl DominanceVerdict {
    pub fn is_strict(&self) -> bool {
        self.relation == Dominance::StrictlyDominates
    }
}

pub fn fosd_compare(x: &RankDistribution, y: &RankDistribution) -> Result<DominanceVerdict> {
    if x.domain() != y.domain() {
        return Err(Error::Domain(format!(
            "cannot compare rank distributions over {} and {} outcomes",
            x.domain(),
            y.domain()
        )));
    }
    let (cx, cy) = (x.cdf(), y.cdf());
    let mut above = Vec::new();
    let mut below = Vec::new();
    for (n, (a, b)) in cx.iter().zip(&cy).enumerate() {
        if a > b {
            above.push(n + 1);
        } else if a < b {
            below.push(n + 1);
        }
    }
    Ok(match (above.is_empty(), below.is_empty()) {
        (true, true) => DominanceVerdict { relation: Dominance::Equal, thresholds: vec![] },
        (false, true) => DominanceVerdict { relation: Dominance::StrictlyDominates, thresholds: above },
        (true, false) => DominanceVerdict { relation: Dominance::DominatedBy, thresholds: below },
        (false, false) => DominanceVerdict { relation: Dominance::Incomparable, thresholds: vec![] },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::AgentId;
    use crate::rational::q;

    fn dist(mass: &[(i64, i64)]) -> RankDistribution {
        RankDistribution::new(AgentId::man(0), mass.iter().map(|&(n, d)| q(n, d)).collect()).unwrap()
    }

    #[test]
    fn second_choice_beats_third() {
        let x = dist(&[(2, 3), (1, 3), (0, 1)]);
        let y = dist(&[(2, 3), (0, 1), (1, 3)]);
        let v = fosd_compare(&x, &y).unwrap();
        assert_eq!(v.relation, Dominance::StrictlyDominates);
        assert_eq!(v.thresholds, vec![2]);
        assert_eq!(fosd_compare(&y, &x).unwrap().relation, Dominance::DominatedBy);
    }

    #[test]
    fn equal_and_incomparable() {
        let x = dist(&[(1, 2), (0, 1), (1, 2)]);
        assert_eq!(fosd_compare(&x, &x).unwrap().relation, Dominance::Equal);
        let y = dist(&[(0, 1), (1, 1), (0, 1)]);
        assert_eq!(fosd_compare(&x, &y).unwrap().relation, Dominance::Incomparable);
    }

    #[test]
    fn mismatched_domains() {
        let x = dist(&[(1, 1), (0, 1)]);
        let y = dist(&[(1, 1), (0, 1), (0, 1)]);
        assert!(fosd_compare(&x, &y).is_err());
    }
}
