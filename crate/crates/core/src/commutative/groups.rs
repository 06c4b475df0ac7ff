use crate::error::{Error, Result};
use crate::model::NetworkWeights;

/// A partition of the players into disjoint groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    groups: Vec<Vec<usize>>,
    membership: Vec<usize>,
}

impl GroupSpec {
    pub fn new(groups: Vec<Vec<usize>>, n_players: usize) -> Result<Self> {
        let mut membership = vec![usize::MAX; n_players];
        for (g, members) in groups.iter().enumerate() {
            for &p in members {
                if p >= n_players {
                    return Err(Error::IndexOutOfRange { index: p, n_players });
                }
                if membership[p] != usize::MAX {
                    return Err(Error::InfeasibleInput(format!("player {p} appears in two groups")));
                }
                membership[p] = g;
            }
        }
        if membership.iter().any(|&g| g == usize::MAX) {
            return Err(Error::InfeasibleInput("groups do not cover every player".into()));
        }
        Ok(Self { groups, membership })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, player: usize) -> usize {
        self.membership[player]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSums {
    /// Per group, the change summed over ordered pairs `(i, j)` inside the group.
    pub within: Vec<f64>,
    /// The change summed over links bridging the groups, each link once.
    pub cross: f64,
}

const IDENTITY_TOL: f64 = 1e-9;

/// Splits the direction `p = m' - m` between two undirected networks with the
/// same per-group budgets into within-group and cross-group totals, and
/// checks `within_1 = within_2 = -cross`.
pub fn direction_group_decomposition(m: &NetworkWeights, m_prime: &NetworkWeights, groups: &GroupSpec) -> Result<GroupSums> {
    let n = m.n_players();
    if m_prime.n_players() != n || groups.membership.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m_prime.n_players() });
    }
    if groups.groups.len() != 2 {
        return Err(Error::InfeasibleInput("the decomposition needs exactly two groups".into()));
    }
    for net in [m, m_prime] {
        if !net.is_symmetric(IDENTITY_TOL) {
            return Err(Error::InfeasibleInput("networks must be undirected".into()));
        }
    }
    for members in &groups.groups {
        let budget = m.row_sum(members[0]);
        for &p in members {
            if (m.row_sum(p) - budget).abs() > IDENTITY_TOL || (m_prime.row_sum(p) - budget).abs() > IDENTITY_TOL {
                return Err(Error::InfeasibleInput(format!("player {p} does not spend its group budget")));
            }
        }
    }
    let mut within = vec![0.0; 2];
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = m_prime.weight(i, j) - m.weight(i, j);
            let (gi, gj) = (groups.group_of(i), groups.group_of(j));
            if gi == gj {
                within[gi] += p;
            } else if i < j {
                cross += p;
            }
        }
    }
    let scale = 1.0 + within.iter().chain(std::iter::once(&cross)).map(|v| v.abs()).fold(0.0, f64::max);
    if (within[0] - within[1]).abs() > IDENTITY_TOL * scale || (within[0] + cross).abs() > IDENTITY_TOL * scale {
        return Err(Error::TheoremViolation(format!("group sums {within:?} and cross {cross} break the balance identity")));
    }
    Ok(GroupSums { within, cross })
}
