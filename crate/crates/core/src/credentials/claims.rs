use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::CredentialError;

/// A claim value. Its canonical rendering is what gets committed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum ClaimValue {
    Text(String),
    Integer(i64),
    /// Serialized as `YYYY-MM-DD`.
    Date(NaiveDate),
    Boolean(bool),
}

fn parse_date(s: &str) -> Option<NaiveDate> {
    if s.len() != 10 {
        return None;
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
}

impl ClaimValue {
    pub fn text(s: impl Into<String>) -> ClaimValue {
        ClaimValue::Text(s.into())
    }

    pub fn date(y: i32, m: u32, d: u32) -> ClaimValue {
        ClaimValue::Date(NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date"))
    }

    /// Dates as `YYYY-MM-DD`, integers base 10, booleans `true`/`false`.
    pub fn render(&self) -> String {
        match self {
            ClaimValue::Text(s) => s.clone(),
            ClaimValue::Integer(i) => i.to_string(),
            ClaimValue::Date(d) => d.format("%Y-%m-%d").to_string(),
            ClaimValue::Boolean(b) => b.to_string(),
        }
    }

    /// Infers the type of a textual value: boolean, then integer, then date,
    /// falling back to text.
    pub fn infer(s: &str) -> ClaimValue {
        match s {
            "true" => return ClaimValue::Boolean(true),
            "false" => return ClaimValue::Boolean(false),
            _ => {}
        }
        if let Ok(i) = s.parse::<i64>() {
            if i.to_string() == s {
                return ClaimValue::Integer(i);
            }
        }
        if let Some(d) = parse_date(s) {
            return ClaimValue::Date(d);
        }
        ClaimValue::Text(s.to_owned())
    }
}

impl fmt::Display for ClaimValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A non-empty map of uniquely named claims.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClaimSet(BTreeMap<String, ClaimValue>);

impl ClaimSet {
    /// Builds a claim set, rejecting empty input, duplicate names, and names
    /// that are empty or contain the commitment separator.
    pub fn from_pairs<I, K>(pairs: I) -> Result<ClaimSet, CredentialError>
    where
        I: IntoIterator<Item = (K, ClaimValue)>,
        K: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (name, value) in pairs {
            let name = name.into();
            validate_name(&name)?;
            if map.insert(name.clone(), value).is_some() {
                return Err(CredentialError::InvalidClaims(format!("duplicate claim {name:?}")));
            }
        }
        if map.is_empty() {
            return Err(CredentialError::InvalidClaims("claim set is empty".into()));
        }
        Ok(ClaimSet(map))
    }

    pub fn get(&self, name: &str) -> Option<&ClaimValue> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ClaimValue)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn insert_derived(&mut self, name: String, value: ClaimValue) -> Result<(), CredentialError> {
        validate_name(&name)?;
        if self.0.contains_key(&name) {
            return Err(CredentialError::InvalidClaims(format!("derived claim {name:?} collides with a claim")));
        }
        self.0.insert(name, value);
        Ok(())
    }
}

pub(crate) fn validate_name(name: &str) -> Result<(), CredentialError> {
    if name.is_empty() || name.contains('\u{1f}') {
        return Err(CredentialError::InvalidClaims(format!("invalid claim name {name:?}")));
    }
    Ok(())
}

/// A predicate the issuer evaluates at issuance and commits as a boolean claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "predicate", rename_all = "snake_case")]
pub enum Predicate {
    /// `age_over_<years>`, computed from a date claim at the issuance date.
    AgeOver { birthdate_claim: String, years: u32 },
    /// `<claim>_is_<value>`.
    ValueEquals { claim: String, value: ClaimValue },
}

impl Predicate {
    pub fn age_over(years: u32) -> Predicate {
        Predicate::AgeOver { birthdate_claim: "birthdate".into(), years }
    }

    pub fn value_equals(claim: impl Into<String>, value: ClaimValue) -> Predicate {
        Predicate::ValueEquals { claim: claim.into(), value }
    }

    pub fn derived_name(&self) -> String {
        match self {
            Predicate::AgeOver { years, .. } => format!("age_over_{years}"),
            Predicate::ValueEquals { claim, value } => format!("{claim}_is_{}", value.render()),
        }
    }

    pub fn evaluate(&self, claims: &ClaimSet, as_of: NaiveDate) -> Result<bool, CredentialError> {
        match self {
            Predicate::AgeOver { birthdate_claim, years } => match claims.get(birthdate_claim) {
                Some(ClaimValue::Date(born)) => Ok(as_of.years_since(*born).is_some_and(|age| age >= *years)),
                Some(_) => Err(CredentialError::PredicateUnsatisfiable(format!(
                    "{birthdate_claim} is not a date"
                ))),
                None => Err(CredentialError::PredicateUnsatisfiable(format!("missing claim {birthdate_claim}"))),
            },
            Predicate::ValueEquals { claim, value } => match claims.get(claim) {
                Some(actual) => Ok(actual == value),
                None => Err(CredentialError::PredicateUnsatisfiable(format!("missing claim {claim}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_rendering() {
        assert_eq!(ClaimValue::date(1995, 6, 1).render(), "1995-06-01");
        assert_eq!(ClaimValue::Integer(-42).render(), "-42");
        assert_eq!(ClaimValue::Boolean(true).render(), "true");
        assert_eq!(ClaimValue::text("John Doe").render(), "John Doe");
    }

    #[test]
    fn inference() {
        assert_eq!(ClaimValue::infer("true"), ClaimValue::Boolean(true));
        assert_eq!(ClaimValue::infer("17"), ClaimValue::Integer(17));
        assert_eq!(ClaimValue::infer("017"), ClaimValue::text("017"));
        assert_eq!(ClaimValue::infer("1995-06-01"), ClaimValue::date(1995, 6, 1));
        assert_eq!(ClaimValue::infer("1995-6-1"), ClaimValue::text("1995-6-1"));
        assert_eq!(ClaimValue::infer("BSc"), ClaimValue::text("BSc"));
    }

    #[test]
    fn empty_and_duplicate_sets_are_invalid() {
        let empty: Vec<(String, ClaimValue)> = vec![];
        assert!(matches!(ClaimSet::from_pairs(empty), Err(CredentialError::InvalidClaims(_))));
        let dup = vec![("a", ClaimValue::Integer(1)), ("a", ClaimValue::Integer(2))];
        assert!(matches!(ClaimSet::from_pairs(dup), Err(CredentialError::InvalidClaims(_))));
        let sep = vec![("a\u{1f}b", ClaimValue::Integer(1))];
        assert!(matches!(ClaimSet::from_pairs(sep), Err(CredentialError::InvalidClaims(_))));
    }

    #[test]
    fn value_equals_predicate() {
        let claims = ClaimSet::from_pairs([("legal_person", ClaimValue::Boolean(true))]).unwrap();
        let p = Predicate::value_equals("legal_person", ClaimValue::Boolean(true));
        assert_eq!(p.derived_name(), "legal_person_is_true");
        let day = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        assert!(p.evaluate(&claims, day).unwrap());
        let missing = Predicate::value_equals("nationality", ClaimValue::text("x"));
        assert!(matches!(missing.evaluate(&claims, day), Err(CredentialError::PredicateUnsatisfiable(_))));
    }

    #[test]
    fn date_serialization_is_iso() {
        let v = ClaimValue::date(2001, 2, 3);
        assert_eq!(crate::canonical::canonical_string(&v), r#"{"type":"date","value":"2001-02-03"}"#);
        let back: ClaimValue = serde_json::from_str(r#"{"type":"date","value":"2001-02-03"}"#).unwrap();
        assert_eq!(back, v);
    }
}
