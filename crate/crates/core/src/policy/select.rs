use serde::Serialize;

use super::PolicyError;
use crate::semantic_map::{NodeId, Pose2};
use crate::symbols::BehaviorType;

/// Default length scale of the value function, in square meters.
pub const PSI_SCALE: f64 = 10.0;

/// Decaying Gaussian value of a goal `d` meters away: `exp(-d² / 10)`.
pub fn psi(d: f64) -> f64 {
    psi_with(d, PSI_SCALE)
}

pub fn psi_with(d: f64, scale: f64) -> f64 {
    (-d * d / scale).exp()
}

/// A grounded behavior inferred in one particle's map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Behavior {
    pub kind: BehaviorType,
    pub goal: Pose2,
    pub goal_node: NodeId,
    pub particle: usize,
    pub likelihood: f64,
}

/// Score of a behavior under the greedy rule.
pub fn behavior_score(b: &Behavior, weight: f64, robot: Pose2, scale: f64) -> f64 {
    psi_with(robot.distance(b.goal), scale) * b.likelihood * weight
}

/// Greedy choice: argmax of `psi × likelihood × particle weight`, ties to
/// the lower particle index. `weights` is indexed by particle.
pub fn select_behavior<'a>(
    behaviors: &'a [Behavior],
    weights: &[f64],
    robot: Pose2,
    scale: f64,
) -> Result<&'a Behavior, PolicyError> {
    let mut best: Option<(f64, &Behavior)> = None;
    for b in behaviors {
        let w = weights.get(b.particle).copied().unwrap_or(0.0);
        let s = behavior_score(b, w, robot, scale);
        let better = match best {
            None => true,
            Some((bs, bb)) => s > bs || (s == bs && b.particle < bb.particle),
        };
        if better {
            best = Some((s, b));
        }
    }
    best.map(|(_, b)| b).ok_or(PolicyError::NoBehaviors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn behavior(particle: usize, x: f64, likelihood: f64) -> Behavior {
        Behavior {
            kind: BehaviorType::Retrieve,
            goal: Pose2::new(x, 0.0, 0.0),
            goal_node: NodeId(particle as u32),
            particle,
            likelihood,
        }
    }

    #[test]
    fn psi_values() {
        assert_eq!(psi(0.0), 1.0);
        assert!((psi(10f64.sqrt()) - (-1f64).exp()).abs() <= 1e-12);
        assert!((psi(10.0) - (-10f64).exp()).abs() <= 1e-15);
        assert!(psi(1.0) > psi(1.1));
    }

    #[test]
    fn nearer_goal_wins_at_equal_odds() {
        let bs = [behavior(0, 5.0, 0.5), behavior(1, 1.0, 0.5)];
        let b = select_behavior(&bs, &[0.5, 0.5], Pose2::origin(), PSI_SCALE).unwrap();
        assert_eq!(b.particle, 1);
    }

    #[test]
    fn weight_decides_at_equal_distance() {
        let bs = [behavior(0, 2.0, 0.5), behavior(1, 2.0, 0.5)];
        let b = select_behavior(&bs, &[0.1, 0.9], Pose2::origin(), PSI_SCALE).unwrap();
        assert_eq!(b.particle, 1);
        let b = select_behavior(&bs, &[0.5, 0.5], Pose2::origin(), PSI_SCALE).unwrap();
        assert_eq!(b.particle, 0);
    }

    #[test]
    fn mixed_fixture() {
        // 0.8 * 0.3 * e^-0.4 = 0.1609 against 0.9 * 0.7 * e^-1.6 = 0.1272.
        let bs = [behavior(0, 2.0, 0.8), behavior(1, 4.0, 0.9)];
        let w = [0.3, 0.7];
        let s0 = behavior_score(&bs[0], w[0], Pose2::origin(), PSI_SCALE);
        let s1 = behavior_score(&bs[1], w[1], Pose2::origin(), PSI_SCALE);
        assert!((s0 - 0.160_877).abs() < 1e-5, "{s0}");
        assert!((s1 - 0.127_195).abs() < 1e-5, "{s1}");
        assert_eq!(select_behavior(&bs, &w, Pose2::origin(), PSI_SCALE).unwrap().particle, 0);
    }

    #[test]
    fn empty_ensemble_is_an_error() {
        assert!(matches!(
            select_behavior(&[], &[1.0], Pose2::origin(), PSI_SCALE),
            Err(PolicyError::NoBehaviors)
        ));
    }
}
