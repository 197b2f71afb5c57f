use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::GovernanceError;
use crate::canonical::canonical_digest;
use crate::credentials::ClaimValue;
use crate::digest::Digest;
use crate::identity::Did;

/// One named record of audit evidence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub name: String,
    pub fields: BTreeMap<String, ClaimValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub records: Vec<EvidenceRecord>,
}

impl Evidence {
    pub fn new() -> Evidence {
        Evidence::default()
    }

    pub fn with(mut self, name: impl Into<String>, fields: impl IntoIterator<Item = (&'static str, ClaimValue)>) -> Evidence {
        self.records.push(EvidenceRecord {
            name: name.into(),
            fields: fields.into_iter().map(|(k, v)| (k.to_owned(), v)).collect(),
        });
        self
    }

    pub fn digest(&self) -> Digest {
        canonical_digest(self)
    }

    pub fn record(&self, name: &str) -> Option<&EvidenceRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub(crate) fn validate(&self) -> Result<(), GovernanceError> {
        let mut names = BTreeSet::new();
        for r in &self.records {
            if r.name.is_empty() || !names.insert(r.name.as_str()) {
                return Err(GovernanceError::MalformedEvidence(format!("record name {:?} empty or repeated", r.name)));
            }
        }
        Ok(())
    }

    fn field(&self, record: &str, field: &str) -> Option<&ClaimValue> {
        self.record(record).and_then(|r| r.fields.get(field))
    }

    fn count(&self, record: &str, field: &str) -> Result<Option<i128>, GovernanceError> {
        match self.field(record, field) {
            None => Ok(None),
            Some(ClaimValue::Integer(i)) if *i >= 0 => Ok(Some(i128::from(*i))),
            Some(other) => Err(GovernanceError::MalformedEvidence(format!(
                "{record}.{field} must be a non-negative integer, found {other}"
            ))),
        }
    }
}

/// A declarative predicate over evidence records. Counts are integers and
/// ratios are compared by cross-multiplication, so evaluation is exact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Condition {
    Present { record: String, field: String },
    Equals { record: String, field: String, value: ClaimValue },
    AtLeast { record: String, field: String, value: i64 },
    AtMost { record: String, field: String, value: i64 },
    /// `numerator / denominator >= min_numerator / min_denominator`.
    RatioAtLeast { record: String, numerator: String, denominator: String, min_numerator: i64, min_denominator: i64 },
    /// `|positive_a / total_a - positive_b / total_b| <= max_numerator / max_denominator`.
    RateGapAtMost {
        record: String,
        positive_a: String,
        total_a: String,
        positive_b: String,
        total_b: String,
        max_numerator: i64,
        max_denominator: i64,
    },
}

impl Condition {
    pub fn evaluate(&self, evidence: &Evidence) -> Result<bool, GovernanceError> {
        let malformed = |why: &str| GovernanceError::MalformedEvidence(why.to_owned());
        match self {
            Condition::Present { record, field } => Ok(evidence.field(record, field).is_some()),
            Condition::Equals { record, field, value } => Ok(evidence.field(record, field) == Some(value)),
            Condition::AtLeast { record, field, value } => {
                Ok(evidence.count(record, field)?.is_some_and(|v| v >= i128::from(*value)))
            }
            Condition::AtMost { record, field, value } => {
                Ok(evidence.count(record, field)?.is_some_and(|v| v <= i128::from(*value)))
            }
            Condition::RatioAtLeast { record, numerator, denominator, min_numerator, min_denominator } => {
                if *min_denominator <= 0 {
                    return Err(malformed("ratio bound has a non-positive denominator"));
                }
                let (Some(n), Some(d)) = (evidence.count(record, numerator)?, evidence.count(record, denominator)?) else {
                    return Ok(false);
                };
                if d == 0 || n > d {
                    return Err(malformed("ratio evidence needs 0 <= numerator <= denominator, denominator > 0"));
                }
                Ok(n * i128::from(*min_denominator) >= i128::from(*min_numerator) * d)
            }
            Condition::RateGapAtMost { record, positive_a, total_a, positive_b, total_b, max_numerator, max_denominator } => {
                if *max_denominator <= 0 {
                    return Err(malformed("rate bound has a non-positive denominator"));
                }
                let fields = [positive_a, total_a, positive_b, total_b];
                let mut v = [0i128; 4];
                for (slot, f) in v.iter_mut().zip(fields) {
                    match evidence.count(record, f)? {
                        Some(x) => *slot = x,
                        None => return Ok(false),
                    }
                }
                let [pa, ta, pb, tb] = v;
                if ta == 0 || tb == 0 || pa > ta || pb > tb {
                    return Err(malformed("rate evidence needs 0 <= positives <= totals, totals > 0"));
                }
                let gap = (pa * tb - pb * ta).abs();
                Ok(gap * i128::from(*max_denominator) <= i128::from(*max_numerator) * ta * tb)
            }
        }
    }
}

/// A rule an authority audits against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regulation {
    pub id: String,
    pub description: String,
    pub authority: Did,
    /// All conditions must hold.
    pub check: Vec<Condition>,
}

impl Regulation {
    pub fn evaluate(&self, evidence: &Evidence) -> Result<bool, GovernanceError> {
        evidence.validate()?;
        let mut pass = true;
        // Evaluate every condition so malformed evidence is reported even
        // after an earlier condition fails.
        for c in &self.check {
            pass &= c.evaluate(evidence)?;
        }
        Ok(pass)
    }
}

pub const CONSENT_REGULATION: &str = "data-collection-consent";
pub const BIAS_REGULATION: &str = "model-bias-bound";
pub const SUPPLY_CHAIN_REGULATION: &str = "source-supply-chain";

/// The three regulations shipped with the library, issued by `authority`.
pub fn shipped_regulations(authority: Did) -> Vec<Regulation> {
    vec![
        Regulation {
            id: CONSENT_REGULATION.into(),
            description: "Every collected record is covered by a recorded consent.".into(),
            authority,
            check: vec![Condition::RatioAtLeast {
                record: "consent".into(),
                numerator: "records_with_consent".into(),
                denominator: "records_total".into(),
                min_numerator: 1,
                min_denominator: 1,
            }],
        },
        Regulation {
            id: BIAS_REGULATION.into(),
            description: "Positive-outcome rates of the two audited groups differ by at most 0.1.".into(),
            authority,
            check: vec![Condition::RateGapAtMost {
                record: "confusion".into(),
                positive_a: "group_a_positive".into(),
                total_a: "group_a_total".into(),
                positive_b: "group_b_positive".into(),
                total_b: "group_b_total".into(),
                max_numerator: 1,
                max_denominator: 10,
            }],
        },
        Regulation {
            id: SUPPLY_CHAIN_REGULATION.into(),
            description: "Shipped code references an attestation and every component is attested.".into(),
            authority,
            check: vec![
                Condition::Present { record: "supply_chain".into(), field: "attestation".into() },
                Condition::Equals {
                    record: "supply_chain".into(),
                    field: "all_components_attested".into(),
                    value: ClaimValue::Boolean(true),
                },
            ],
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digest::Digest;

    fn authority() -> Did {
        Did::from_id(Digest([1; 32]))
    }

    fn reg(id: &str) -> Regulation {
        shipped_regulations(authority()).into_iter().find(|r| r.id == id).unwrap()
    }

    fn consent(with: i64, total: i64) -> Evidence {
        Evidence::new().with(
            "consent",
            [("records_with_consent", ClaimValue::Integer(with)), ("records_total", ClaimValue::Integer(total))],
        )
    }

    fn confusion(pa: i64, ta: i64, pb: i64, tb: i64) -> Evidence {
        Evidence::new().with(
            "confusion",
            [
                ("group_a_positive", ClaimValue::Integer(pa)),
                ("group_a_total", ClaimValue::Integer(ta)),
                ("group_b_positive", ClaimValue::Integer(pb)),
                ("group_b_total", ClaimValue::Integer(tb)),
            ],
        )
    }

    #[test]
    fn consent_coverage() {
        let r = reg(CONSENT_REGULATION);
        assert!(r.evaluate(&consent(40, 40)).unwrap());
        assert!(!r.evaluate(&consent(39, 40)).unwrap());
        assert!(!r.evaluate(&Evidence::new()).unwrap());
        assert!(r.evaluate(&consent(41, 40)).is_err());
    }

    #[test]
    fn bias_bound_is_inclusive() {
        let r = reg(BIAS_REGULATION);
        assert!(r.evaluate(&confusion(50, 100, 40, 100)).unwrap());
        assert!(!r.evaluate(&confusion(51, 100, 40, 100)).unwrap());
        assert!(r.evaluate(&confusion(3, 10, 7, 20)).unwrap());
        assert!(r.evaluate(&confusion(1, 0, 1, 1)).is_err());
    }

    #[test]
    fn supply_chain_needs_both_conditions() {
        let r = reg(SUPPLY_CHAIN_REGULATION);
        let ok = Evidence::new().with(
            "supply_chain",
            [("attestation", ClaimValue::text("urn:x")), ("all_components_attested", ClaimValue::Boolean(true))],
        );
        assert!(r.evaluate(&ok).unwrap());
        let partial = Evidence::new().with("supply_chain", [("all_components_attested", ClaimValue::Boolean(true))]);
        assert!(!r.evaluate(&partial).unwrap());
    }

    #[test]
    fn type_errors_and_duplicate_records_are_malformed() {
        let r = reg(CONSENT_REGULATION);
        let typed = Evidence::new().with(
            "consent",
            [("records_with_consent", ClaimValue::text("all")), ("records_total", ClaimValue::Integer(3))],
        );
        assert!(matches!(r.evaluate(&typed), Err(GovernanceError::MalformedEvidence(_))));
        let dup = consent(1, 1).with("consent", []);
        assert!(matches!(r.evaluate(&dup), Err(GovernanceError::MalformedEvidence(_))));
    }

    #[test]
    fn regulations_round_trip_canonically() {
        for r in shipped_regulations(authority()) {
            let bytes = crate::canonical::canonical_bytes(&r);
            let back: Regulation = crate::canonical::from_canonical_slice(&bytes).unwrap();
            assert_eq!(back, r);
        }
    }
}
