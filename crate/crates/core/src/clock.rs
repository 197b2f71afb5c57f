//! Simulated time. One tick is one simulated day, counted from 2020-01-01.
//! Nothing in the library reads the wall clock.

use std::fmt;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn epoch() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid epoch")
    }

    pub fn to_date(self) -> NaiveDate {
        Self::epoch()
            .checked_add_days(Days::new(self.0))
            .unwrap_or(NaiveDate::MAX)
    }

    /// The tick for `date`, or `None` if it precedes the epoch.
    pub fn from_date(date: NaiveDate) -> Option<Timestamp> {
        let days = (date - Self::epoch()).num_days();
        u64::try_from(days).ok().map(Timestamp)
    }

    pub fn plus_days(self, days: u64) -> Timestamp {
        Timestamp(self.0.saturating_add(days))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "day {} ({})", self.0, self.to_date())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_round_trip() {
        assert_eq!(Timestamp(0).to_date().to_string(), "2020-01-01");
        assert_eq!(Timestamp(366).to_date().to_string(), "2021-01-01");
        let d = NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
        assert_eq!(Timestamp::from_date(d), Some(Timestamp(60)));
        assert_eq!(Timestamp::from_date(NaiveDate::from_ymd_opt(2019, 12, 31).unwrap()), None);
    }
}
