use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AgreementError, RicardianAgreement, AD_PERSONALIZATION, DATA_SHARING, PORTABILITY};

pub const DATA_EXPORT: &str = "data-export";
pub const MODEL_TRAINING: &str = "model-training";
pub const AD_SERVING: &str = "ad-personalization";
pub const RETENTION_EXPIRED: &str = "retention-expired";
pub const ACCOUNT_MIGRATION: &str = "account-migration";
pub const SERVICE_TERMINATION: &str = "service-termination";

pub const EVENTS: [&str; 6] =
    [DATA_EXPORT, MODEL_TRAINING, AD_SERVING, RETENTION_EXPIRED, ACCOUNT_MIGRATION, SERVICE_TERMINATION];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Obligation {
    Deny,
    AllowAggregated,
    Allow,
    Delete,
    CeaseDataUse,
    ExportData,
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Obligation::Deny => "deny",
            Obligation::AllowAggregated => "allow-aggregated",
            Obligation::Allow => "allow",
            Obligation::Delete => "delete",
            Obligation::CeaseDataUse => "cease-data-use",
            Obligation::ExportData => "export-data",
        })
    }
}

/// Obligations an event triggers under the agreement's machine terms. Absent
/// terms fall back to the most restrictive reading.
pub fn evaluate_terms(agreement: &RicardianAgreement, event: &str) -> Result<Vec<Obligation>, AgreementError> {
    let term = |k: &str| agreement.terms.get(k).map(String::as_str);
    let sharing = || match term(DATA_SHARING) {
        Some("full") => Obligation::Allow,
        Some("aggregate") => Obligation::AllowAggregated,
        _ => Obligation::Deny,
    };
    Ok(match event {
        DATA_EXPORT | MODEL_TRAINING => vec![sharing()],
        AD_SERVING => match term(AD_PERSONALIZATION) {
            Some("allowed") => vec![Obligation::Allow],
            _ => vec![Obligation::Deny],
        },
        RETENTION_EXPIRED => vec![Obligation::Delete],
        ACCOUNT_MIGRATION => match term(PORTABILITY) {
            Some("guaranteed") => vec![Obligation::ExportData, Obligation::CeaseDataUse],
            _ => vec![Obligation::CeaseDataUse],
        },
        SERVICE_TERMINATION => vec![Obligation::CeaseDataUse, Obligation::Delete],
        other => return Err(AgreementError::UnknownEvent(other.to_owned())),
    })
}
