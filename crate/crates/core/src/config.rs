//! Classification thresholds.

use serde::{Deserialize, Serialize};

use crate::activity::DEFAULT_BURST_FRACTION;
use crate::graph::EdgeSemantics;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config: {field} = {value} ({expected})")]
pub struct InvalidConfig {
    pub field: &'static str,
    pub value: f64,
    pub expected: &'static str,
}

/// Thresholds for every identification rule. Percentile thresholds refer to
/// midpoint-rank percentiles, ratio thresholds to the value divided by the
/// community mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub novice_max_days: f64,
    /// Mean inter-login gap at most this share of the community mean.
    pub active_gap_ratio_max: f64,
    pub active_recency_ratio_max: f64,
    pub leader_degree_percentile_min: f64,
    /// Applied to the largest of the betweenness, closeness and eigenvector
    /// percentiles.
    pub leader_broker_percentile_min: f64,
    pub leader_activity_percentile_min: f64,
    pub passive_gap_ratio_min: f64,
    pub passive_post_percentile_max: f64,
    pub passive_churn_max: f64,
    pub troll_burstiness_min: f64,
    pub troll_flags_min: u64,
    pub troll_reciprocity_max: f64,
    pub departed_inactivity_days: f64,
    pub edge_semantics: EdgeSemantics,
    /// Burst sub-window width as a fraction of the snapshot window.
    pub burst_window_fraction: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            novice_max_days: 14.0,
            active_gap_ratio_max: 0.8,
            active_recency_ratio_max: 1.0,
            leader_degree_percentile_min: 0.90,
            leader_broker_percentile_min: 0.90,
            leader_activity_percentile_min: 0.75,
            passive_gap_ratio_min: 1.5,
            passive_post_percentile_max: 0.25,
            passive_churn_max: 0.2,
            troll_burstiness_min: 0.8,
            troll_flags_min: 3,
            troll_reciprocity_max: 0.25,
            departed_inactivity_days: 90.0,
            edge_semantics: EdgeSemantics::Interactions,
            burst_window_fraction: DEFAULT_BURST_FRACTION,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), InvalidConfig> {
        let unit = [
            ("leader_degree_percentile_min", self.leader_degree_percentile_min),
            ("leader_broker_percentile_min", self.leader_broker_percentile_min),
            ("leader_activity_percentile_min", self.leader_activity_percentile_min),
            ("passive_post_percentile_max", self.passive_post_percentile_max),
            ("passive_churn_max", self.passive_churn_max),
            ("troll_burstiness_min", self.troll_burstiness_min),
            ("troll_reciprocity_max", self.troll_reciprocity_max),
        ];
        for (field, value) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(InvalidConfig {
                    field,
                    value,
                    expected: "a value in [0, 1]",
                });
            }
        }
        let non_negative = [
            ("novice_max_days", self.novice_max_days),
            ("active_gap_ratio_max", self.active_gap_ratio_max),
            ("active_recency_ratio_max", self.active_recency_ratio_max),
            ("passive_gap_ratio_min", self.passive_gap_ratio_min),
            ("departed_inactivity_days", self.departed_inactivity_days),
        ];
        for (field, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(InvalidConfig {
                    field,
                    value,
                    expected: "a finite non-negative value",
                });
            }
        }
        let f = self.burst_window_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(InvalidConfig {
                field: "burst_window_fraction",
                value: f,
                expected: "a value in (0, 1]",
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ThresholdConfig::default().validate().unwrap();
    }

    #[test]
    fn out_of_range_rejected() {
        let cfg = ThresholdConfig {
            leader_degree_percentile_min: 1.2,
            ..ThresholdConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().field, "leader_degree_percentile_min");
        let cfg = ThresholdConfig {
            novice_max_days: f64::NAN,
            ..ThresholdConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ThresholdConfig {
            burst_window_fraction: 0.0,
            ..ThresholdConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_partial_files() {
        let cfg = ThresholdConfig {
            troll_flags_min: 7,
            edge_semantics: EdgeSemantics::ExplicitEdges,
            ..ThresholdConfig::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"edge_semantics\":\"explicit_edges\""));
        assert_eq!(serde_json::from_str::<ThresholdConfig>(&json).unwrap(), cfg);

        let partial: ThresholdConfig = serde_json::from_str(r#"{"novice_max_days": 7}"#).unwrap();
        assert_eq!(partial.novice_max_days, 7.0);
        assert_eq!(partial.troll_flags_min, 3);
        assert!(serde_json::from_str::<ThresholdConfig>(r#"{"novice_days": 7}"#).is_err());
    }
}
