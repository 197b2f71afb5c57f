use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AgreementError, Role};

/// Machine terms: flat key-value obligations.
pub type Terms = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alternative {
    pub label: String,
    pub text: String,
    pub terms: Terms,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClauseKind {
    /// Binding as proposed; assent comes with accept-all.
    Fixed { text: String, terms: Terms },
    /// The non-proposing party picks exactly one alternative.
    Choice { alternatives: Vec<Alternative> },
    /// An add-on the non-proposing party accepts or rejects.
    Option { text: String, terms: Terms },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseSpec {
    pub id: String,
    pub title: String,
    pub kind: ClauseKind,
}

impl ClauseSpec {
    fn term_keys(&self) -> BTreeSet<&str> {
        match &self.kind {
            ClauseKind::Fixed { terms, .. } | ClauseKind::Option { terms, .. } => {
                terms.keys().map(String::as_str).collect()
            }
            ClauseKind::Choice { alternatives } => {
                alternatives.iter().flat_map(|a| a.terms.keys().map(String::as_str)).collect()
            }
        }
    }

    fn validate(&self) -> Result<(), AgreementError> {
        let invalid = |why: String| Err(AgreementError::InvalidClauses(why));
        if self.id.is_empty() || self.title.is_empty() {
            return invalid("clause id and title must be non-empty".into());
        }
        if let ClauseKind::Choice { alternatives } = &self.kind {
            let labels: BTreeSet<&str> = alternatives.iter().map(|a| a.label.as_str()).collect();
            if alternatives.is_empty() || labels.len() != alternatives.len() || labels.contains("") {
                return invalid(format!("choice {} needs distinct non-empty alternatives", self.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum ClauseState {
    Open,
    Resolved { alternative: String },
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub spec: ClauseSpec,
    pub proposer: Role,
    pub state: ClauseState,
}

impl Clause {
    pub fn new(spec: ClauseSpec, proposer: Role) -> Clause {
        let state = match spec.kind {
            ClauseKind::Fixed { .. } => ClauseState::Accepted,
            _ => ClauseState::Open,
        };
        Clause { spec, proposer, state }
    }

    pub fn is_open(&self) -> bool {
        self.state == ClauseState::Open
    }

    /// The clause as it enters the agreement, or `None` if it stays out
    /// (open, or a rejected option).
    pub fn resolved(&self) -> Option<ResolvedClause> {
        let spec = &self.spec;
        let make = |selection: Option<&str>, text: &str, terms: &Terms| ResolvedClause {
            id: spec.id.clone(),
            title: spec.title.clone(),
            selection: selection.map(str::to_owned),
            text: text.to_owned(),
            terms: terms.clone(),
        };
        match (&spec.kind, &self.state) {
            (ClauseKind::Fixed { text, terms }, ClauseState::Accepted)
            | (ClauseKind::Option { text, terms }, ClauseState::Accepted) => Some(make(None, text, terms)),
            (ClauseKind::Choice { alternatives }, ClauseState::Resolved { alternative }) => alternatives
                .iter()
                .find(|a| &a.label == alternative)
                .map(|a| make(Some(&a.label), &a.text, &a.terms)),
            _ => None,
        }
    }
}

/// A clause as bound into an agreement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedClause {
    pub id: String,
    pub title: String,
    pub selection: Option<String>,
    pub text: String,
    pub terms: Terms,
}

/// Checks a whole clause set: every clause valid, and no machine-term key
/// reachable from two different clauses.
pub(crate) fn validate_clause_set(clauses: &BTreeMap<String, Clause>) -> Result<(), AgreementError> {
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for (id, clause) in clauses {
        clause.spec.validate()?;
        for key in clause.spec.term_keys() {
            if let Some(other) = owner.insert(key, id) {
                return Err(AgreementError::InvalidClauses(format!("term {key} set by both {other} and {id}")));
            }
        }
    }
    Ok(())
}

pub const DATA_SHARING: &str = "data-sharing";
pub const AD_PERSONALIZATION: &str = "ad-personalization";
pub const RETENTION_DAYS: &str = "retention-days";
pub const PORTABILITY: &str = "portability";

fn terms(pairs: &[(&str, &str)]) -> Terms {
    pairs.iter().map(|(k, v)| ((*k).to_owned(), (*v).to_owned())).collect()
}

/// Choice of how much user data the provider may share or learn from.
pub fn data_sharing_choice() -> ClauseSpec {
    let alt = |label: &str, text: &str| Alternative {
        label: label.into(),
        text: text.into(),
        terms: terms(&[(DATA_SHARING, label)]),
    };
    ClauseSpec {
        id: DATA_SHARING.into(),
        title: "Data sharing".into(),
        kind: ClauseKind::Choice {
            alternatives: vec![
                alt("none", "The provider shall not transmit, share, or learn from any claim-level user data."),
                alt("aggregate", "The provider may use user data only in aggregated form."),
                alt("full", "The provider may use and share user data."),
            ],
        },
    }
}

pub fn ad_personalization_option() -> ClauseSpec {
    ClauseSpec {
        id: AD_PERSONALIZATION.into(),
        title: "Personalized advertising".into(),
        kind: ClauseKind::Option {
            text: "The provider may personalize advertising using the user's data.".into(),
            terms: terms(&[(AD_PERSONALIZATION, "allowed")]),
        },
    }
}

pub fn retention_clause(days: u32) -> ClauseSpec {
    ClauseSpec {
        id: "retention".into(),
        title: "Retention".into(),
        kind: ClauseKind::Fixed {
            text: format!("User data is deleted {days} days after it is no longer needed for the service."),
            terms: terms(&[(RETENTION_DAYS, &days.to_string())]),
        },
    }
}

pub fn portability_clause() -> ClauseSpec {
    ClauseSpec {
        id: PORTABILITY.into(),
        title: "Portability".into(),
        kind: ClauseKind::Fixed {
            text: "On migration the provider exports the user's data and mail to the user.".into(),
            terms: terms(&[(PORTABILITY, "guaranteed")]),
        },
    }
}

/// One choice and one option.
pub fn two_clause_template() -> Vec<ClauseSpec> {
    vec![data_sharing_choice(), ad_personalization_option()]
}

/// Terms an email provider offers: data sharing, personalized ads, retention,
/// and portability.
pub fn email_service_template() -> Vec<ClauseSpec> {
    vec![data_sharing_choice(), ad_personalization_option(), retention_clause(30), portability_clause()]
}
