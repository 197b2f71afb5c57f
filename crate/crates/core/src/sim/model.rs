use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agreements::{evaluate_terms, Obligation, RicardianAgreement, MODEL_TRAINING};
use crate::digest::Digest;
use crate::identity::Did;

/// One observation a user contributes: under `topic`, they chose `item`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DataRecord {
    pub owner: Did,
    pub topic: String,
    pub item: String,
}

/// topic -> item -> count.
pub type FrequencyTable = BTreeMap<String, BTreeMap<String, u64>>;

/// The learned model: item counts per topic over exactly these records.
pub fn learn<'a>(records: impl IntoIterator<Item = &'a DataRecord>) -> FrequencyTable {
    let mut table = FrequencyTable::new();
    for r in records {
        *table.entry(r.topic.clone()).or_default().entry(r.item.clone()).or_default() += 1;
    }
    table
}

/// A provider's AI service: the records users sent it, the agreements that
/// govern them, and the code that turns permitted records into answers.
#[derive(Debug, Clone, PartialEq)]
pub struct AiServiceModel {
    /// Digest of the source code artifact.
    pub program: Digest,
    pub default_response: String,
    records: Vec<DataRecord>,
    agreements: BTreeMap<Did, RicardianAgreement>,
}

impl AiServiceModel {
    pub fn new(program: Digest, default_response: impl Into<String>) -> AiServiceModel {
        AiServiceModel { program, default_response: default_response.into(), records: Vec::new(), agreements: BTreeMap::new() }
    }

    pub fn set_agreement(&mut self, owner: Did, agreement: RicardianAgreement) {
        self.agreements.insert(owner, agreement);
    }

    pub fn agreement(&self, owner: &Did) -> Option<&RicardianAgreement> {
        self.agreements.get(owner)
    }

    pub fn ingest(&mut self, records: impl IntoIterator<Item = DataRecord>) {
        self.records.extend(records);
    }

    pub fn records(&self) -> &[DataRecord] {
        &self.records
    }

    /// Drops everything held for `owner`, records and agreement alike.
    pub fn purge(&mut self, owner: &Did) {
        self.records.retain(|r| r.owner != *owner);
        self.agreements.remove(owner);
    }

    /// Whether `owner`'s agreement lets their records train the model. No
    /// agreement means no.
    pub fn may_train_on(&self, owner: &Did) -> bool {
        self.agreements.get(owner).is_some_and(|a| {
            evaluate_terms(a, MODEL_TRAINING)
                .is_ok_and(|o| o.iter().any(|x| matches!(x, Obligation::Allow | Obligation::AllowAggregated)))
        })
    }

    pub fn permitted_records(&self) -> impl Iterator<Item = &DataRecord> {
        self.records.iter().filter(|r| self.may_train_on(&r.owner))
    }

    pub fn learned(&self) -> FrequencyTable {
        learn(self.permitted_records())
    }
}

/// The service's answer to `query` (a topic): the most frequent item, ties to
/// the lexicographically smallest, or the default when the topic is unseen.
pub fn train_and_serve(service: &AiServiceModel, query: &str) -> String {
    let table = service.learned();
    table
        .get(query)
        .and_then(|items| items.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))))
        .map(|(item, _)| item.clone())
        .unwrap_or_else(|| service.default_response.clone())
}
