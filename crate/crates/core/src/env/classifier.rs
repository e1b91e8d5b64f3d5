use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Occupancy {
    User(String),
    Vacant,
    Unknown,
}

/// Nearest-profile weight matcher for the sofa.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightClassifier {
    /// User id to reference weight in kg.
    pub profiles: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub vacancy_threshold: f64,
}

impl WeightClassifier {
    /// Readings under the vacancy threshold mean nobody is seated. Otherwise the
    /// closest profile wins if it lies within tolerance; a tie between two
    /// profiles is reported as unknown.
    pub fn classify(&self, reading: f64) -> Occupancy {
        if reading < self.vacancy_threshold {
            return Occupancy::Vacant;
        }
        let mut best: Option<(&String, f64)> = None;
        let mut tied = false;
        for (user, w) in &self.profiles {
            let d = (reading - w).abs();
            if d > self.tolerance {
                continue;
            }
            match best {
                Some((_, bd)) if d > bd => {}
                Some((_, bd)) if d == bd => tied = true,
                _ => {
                    best = Some((user, d));
                    tied = false;
                }
            }
        }
        match best {
            Some((u, _)) if !tied => Occupancy::User(u.clone()),
            _ => Occupancy::Unknown,
        }
    }
}
