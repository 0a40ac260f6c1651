//! Star-shaped river networks.
//!
//! Upper branches live on `(-inf, 0]`, lower branches on `[0, +inf)`, and all
//! of them meet at the junction `x = 0`. Water flows from the upper branches
//! into the lower ones, so an admissible network has to conserve the flux
//! `a * beta` through the junction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the conservation law and the weight normalization.
pub const CONSERVATION_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub orientation: Orientation,
    /// Advection speed.
    pub beta: f64,
    /// Cross-section area.
    pub a: f64,
    /// Diffusion coefficient, normalized to one.
    #[serde(default = "unit_diffusion")]
    pub diffusion: f64,
}

fn unit_diffusion() -> f64 {
    1.0
}

impl BranchSpec {
    pub fn upper(beta: f64, a: f64) -> Self {
        Self { orientation: Orientation::Upper, beta, a, diffusion: 1.0 }
    }

    pub fn lower(beta: f64, a: f64) -> Self {
        Self { orientation: Orientation::Lower, beta, a, diffusion: 1.0 }
    }

    pub fn is_upper(&self) -> bool {
        self.orientation == Orientation::Upper
    }

    /// Flux carried through the junction.
    pub fn flux(&self) -> f64 {
        self.a * self.beta
    }

    fn validate(&self, id: usize) -> Result<()> {
        let checks = [("beta", self.beta), ("a", self.a)];
        for (name, value) in checks {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonpositiveParameter { name: format!("branch {id} {name}"), value });
            }
        }
        if self.diffusion != 1.0 {
            return Err(Error::InvalidInput(format!(
                "branch {id}: diffusion must be 1, got {}",
                self.diffusion
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    TwoBranch,
    TwoUpOneDown,
    OneUpTwoDown,
    /// m upper and n lower branches; accepted by the simulator only.
    GeneralStar,
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Topology::TwoBranch => "TwoBranch",
            Topology::TwoUpOneDown => "TwoUpOneDown",
            Topology::OneUpTwoDown => "OneUpTwoDown",
            Topology::GeneralStar => "GeneralStar",
        };
        f.write_str(s)
    }
}

/// A validated star network. Branch ids are positions in `branches`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct RiverNetwork {
    branches: Vec<BranchSpec>,
    topology: Topology,
}

#[derive(Deserialize)]
struct RawNetwork {
    branches: Vec<BranchSpec>,
}

impl TryFrom<RawNetwork> for RiverNetwork {
    type Error = Error;
    fn try_from(raw: RawNetwork) -> Result<Self> {
        build_network(raw.branches)
    }
}

/// Builds and validates a network, inferring its topology.
pub fn build_network(branches: Vec<BranchSpec>) -> Result<RiverNetwork> {
    if branches.is_empty() {
        return Err(Error::InvalidInput("network needs at least one branch".into()));
    }
    for (id, b) in branches.iter().enumerate() {
        b.validate(id)?;
    }
    let n_up = branches.iter().filter(|b| b.is_upper()).count();
    let n_low = branches.len() - n_up;
    if n_up == 0 {
        return Err(Error::NoUpperBranch);
    }
    if n_low == 0 {
        return Err(Error::NoLowerBranch);
    }
    let up: f64 = branches.iter().filter(|b| b.is_upper()).map(BranchSpec::flux).sum();
    let low: f64 = branches.iter().filter(|b| !b.is_upper()).map(BranchSpec::flux).sum();
    let residual = up - low;
    if residual.abs() > CONSERVATION_RTOL * up.max(low) {
        return Err(Error::ConservationViolated { residual });
    }
    let topology = match (n_up, n_low) {
        (1, 1) => Topology::TwoBranch,
        (2, 1) => Topology::TwoUpOneDown,
        (1, 2) => Topology::OneUpTwoDown,
        _ => Topology::GeneralStar,
    };
    Ok(RiverNetwork { branches, topology })
}

impl RiverNetwork {
    pub fn branches(&self) -> &[BranchSpec] {
        &self.branches
    }

    pub fn branch(&self, id: usize) -> &BranchSpec {
        &self.branches[id]
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn upper_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.branches[i].is_upper()).collect()
    }

    pub fn lower_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.branches[i].is_upper()).collect()
    }

    /// Upper minus lower flux.
    pub fn conservation_residual(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| if b.is_upper() { b.flux() } else { -b.flux() })
            .sum()
    }

    /// Same network with every cross-section multiplied by `lambda`.
    pub fn rescaled(&self, lambda: f64) -> Result<RiverNetwork> {
        let branches = self
            .branches
            .iter()
            .map(|b| BranchSpec { a: b.a * lambda, ..b.clone() })
            .collect();
        build_network(branches)
    }

    /// Two-branch network with `a_U = 1` and `a_L` fixed by conservation.
    pub fn two_branch(beta_u: f64, beta_l: f64) -> Result<RiverNetwork> {
        build_network(vec![BranchSpec::upper(beta_u, 1.0), BranchSpec::lower(beta_l, beta_u / beta_l)])
    }

    /// Two upper branches with unit cross-section feeding one lower branch.
    pub fn two_up_one_down(beta_u1: f64, beta_u2: f64, beta_l: f64) -> Result<RiverNetwork> {
        build_network(vec![
            BranchSpec::upper(beta_u1, 1.0),
            BranchSpec::upper(beta_u2, 1.0),
            BranchSpec::lower(beta_l, (beta_u1 + beta_u2) / beta_l),
        ])
    }

    /// One upper branch with unit cross-section splitting its flux evenly.
    pub fn one_up_two_down(beta_u: f64, beta_l1: f64, beta_l2: f64) -> Result<RiverNetwork> {
        build_network(vec![
            BranchSpec::upper(beta_u, 1.0),
            BranchSpec::lower(beta_l1, 0.5 * beta_u / beta_l1),
            BranchSpec::lower(beta_l2, 0.5 * beta_u / beta_l2),
        ])
    }
}

/// Dimensionless flux fractions at the junction: `xi_i` for two upper
/// branches, `eta_i` for two lower branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionWeights {
    /// Which side the weights split.
    pub side: Orientation,
    /// Branch ids in the order of `weights`.
    pub branch_ids: Vec<usize>,
    pub weights: Vec<f64>,
}

pub fn junction_weights(network: &RiverNetwork) -> Result<JunctionWeights> {
    let (side, ids, single) = match network.topology() {
        Topology::TwoUpOneDown => (Orientation::Upper, network.upper_ids(), network.lower_ids()[0]),
        Topology::OneUpTwoDown => (Orientation::Lower, network.lower_ids(), network.upper_ids()[0]),
        t => return Err(Error::UnsupportedTopology(format!("junction weights undefined for {t}"))),
    };
    let denom = network.branch(single).flux();
    let mut weights: Vec<f64> = ids.iter().map(|&i| network.branch(i).flux() / denom).collect();
    // Normalize away the conservation slack so the weights sum to one.
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(JunctionWeights { side, branch_ids: ids, weights })
}

/// On-disk network description: the branch list, plus derived weights when written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub branches: Vec<BranchSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<JunctionWeights>,
}

impl NetworkConfig {
    pub fn build(&self) -> Result<RiverNetwork> {
        build_network(self.branches.clone())
    }

    pub fn from_network(network: &RiverNetwork) -> Self {
        Self { branches: network.branches.clone(), weights: junction_weights(network).ok() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_is_inferred() {
        let net = build_network(vec![BranchSpec::upper(2.0, 1.0), BranchSpec::lower(2.0, 1.0)]).unwrap();
        assert_eq!(net.topology(), Topology::TwoBranch);
        let net = build_network(vec![
            BranchSpec::upper(3.0, 1.0),
            BranchSpec::upper(1.0, 1.0),
            BranchSpec::lower(2.0, 2.0),
        ])
        .unwrap();
        assert_eq!(net.topology(), Topology::TwoUpOneDown);
        let net = build_network(vec![
            BranchSpec::upper(1.0, 1.0),
            BranchSpec::upper(1.0, 1.0),
            BranchSpec::lower(1.0, 1.0),
            BranchSpec::lower(1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(net.topology(), Topology::GeneralStar);
    }

    #[test]
    fn conservation_residual_is_reported() {
        let err = build_network(vec![BranchSpec::upper(3.0, 1.0), BranchSpec::lower(1.0, 1.0)]).unwrap_err();
        assert_eq!(err, Error::ConservationViolated { residual: 2.0 });
    }

    #[test]
    fn missing_sides_and_bad_parameters() {
        assert_eq!(build_network(vec![BranchSpec::lower(1.0, 1.0)]).unwrap_err(), Error::NoUpperBranch);
        assert_eq!(build_network(vec![BranchSpec::upper(1.0, 1.0)]).unwrap_err(), Error::NoLowerBranch);
        let err = build_network(vec![BranchSpec::upper(0.0, 1.0), BranchSpec::lower(1.0, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::NonpositiveParameter { .. }));
    }

    #[test]
    fn decimal_literals_pass_conservation() {
        // 0.1 * 3 is not exactly 0.3 in binary.
        build_network(vec![BranchSpec::upper(3.0, 0.1), BranchSpec::lower(1.0, 0.3)]).unwrap();
    }

    #[test]
    fn weights_for_three_branch_networks() {
        let net = build_network(vec![
            BranchSpec::upper(3.0, 1.0),
            BranchSpec::upper(1.0, 1.0),
            BranchSpec::lower(2.0, 2.0),
        ])
        .unwrap();
        let w = junction_weights(&net).unwrap();
        assert_eq!(w.weights, vec![0.75, 0.25]);
        assert_eq!(w.side, Orientation::Upper);

        let net = build_network(vec![
            BranchSpec::upper(2.0, 2.0),
            BranchSpec::lower(3.0, 1.0),
            BranchSpec::lower(1.0, 1.0),
        ])
        .unwrap();
        let w = junction_weights(&net).unwrap();
        assert_eq!(w.weights, vec![0.75, 0.25]);
        assert_eq!(w.branch_ids, vec![1, 2]);

        let tb = RiverNetwork::two_branch(2.0, 2.0).unwrap();
        assert!(matches!(junction_weights(&tb), Err(Error::UnsupportedTopology(_))));
    }
}
