//! Macro-nutrient vectors and USDA source provenance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The four tracked macro-nutrients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Nutrient {
    Calories,
    Protein,
    Fat,
    Carbohydrates,
}

impl Nutrient {
    pub const ALL: [Nutrient; 4] = [
        Nutrient::Calories,
        Nutrient::Protein,
        Nutrient::Fat,
        Nutrient::Carbohydrates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Nutrient::Calories => "calories",
            Nutrient::Protein => "protein",
            Nutrient::Fat => "fat",
            Nutrient::Carbohydrates => "carbohydrates",
        }
    }
}

/// Calories (kcal) and protein/fat/carbohydrates (g), all per 100 g.
///
/// Every field is optional; a finalized [`crate::usda::FoodRecord`] always
/// carries calories.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NutrientVector {
    pub calories: Option<f64>,
    pub protein: Option<f64>,
    pub fat: Option<f64>,
    pub carbohydrates: Option<f64>,
}

impl NutrientVector {
    pub fn get(&self, nutrient: Nutrient) -> Option<f64> {
        match nutrient {
            Nutrient::Calories => self.calories,
            Nutrient::Protein => self.protein,
            Nutrient::Fat => self.fat,
            Nutrient::Carbohydrates => self.carbohydrates,
        }
    }

    pub fn set(&mut self, nutrient: Nutrient, value: Option<f64>) {
        match nutrient {
            Nutrient::Calories => self.calories = value,
            Nutrient::Protein => self.protein = value,
            Nutrient::Fat => self.fat = value,
            Nutrient::Carbohydrates => self.carbohydrates = value,
        }
    }

    /// True when every present field is finite and non-negative.
    pub fn is_valid(&self) -> bool {
        Nutrient::ALL
            .iter()
            .filter_map(|&n| self.get(n))
            .all(|v| v.is_finite() && v >= 0.0)
    }
}

/// USDA FoodData Central data source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Foundation,
    Survey,
    SrLegacy,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Foundation, Source::Survey, Source::SrLegacy];

    /// Lower is preferred when collapsing duplicate names.
    pub fn priority(self) -> u8 {
        match self {
            Source::Foundation => 0,
            Source::Survey => 1,
            Source::SrLegacy => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Foundation => "foundation",
            Source::Survey => "survey",
            Source::SrLegacy => "sr_legacy",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "foundation" => Ok(Source::Foundation),
            "survey" | "fndds" => Ok(Source::Survey),
            "sr_legacy" | "srlegacy" => Ok(Source::SrLegacy),
            other => Err(format!("unknown USDA source '{other}'")),
        }
    }
}

/// Median of a slice; the mean of the two middle values for even lengths.
/// Returns `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        Some(sorted[mid])
    } else {
        Some((sorted[mid - 1] + sorted[mid]) / 2.0)
    }
}
