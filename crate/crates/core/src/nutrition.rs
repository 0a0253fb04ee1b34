//! Per-food density and energy constants, and the volume → mass → calories
//! conversion.
//!
//! The built-in table covers the 19 food types of the ECUST food dataset.
//! Values are shipped verbatim, including the three energies above
//! 9 kcal/g (more than pure fat); loading the table logs a warning for
//! those rows but never alters them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::measure::ShapeModel;

/// Energy density of pure fat; anything above is flagged.
pub const PLAUSIBLE_ENERGY_LIMIT: f64 = 9.0;

/// Label for dataset images holding two different foods.
pub const MIX_LABEL: &str = "mix";

#[derive(Debug, thiserror::Error)]
pub enum NutritionError {
    #[error("unknown food {0:?}")]
    UnknownFood(String),
    #[error("volume must be positive, got {0}")]
    NonpositiveVolume(f64),
    #[error("invalid nutrition entry {label:?}: {reason}")]
    InvalidEntry { label: String, reason: String },
    #[error("cannot read nutrition table {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse nutrition table: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodSpec {
    pub label: String,
    /// g/cm³
    pub density: f64,
    /// kcal/g
    pub energy: f64,
    pub shape: ShapeModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalorieResult {
    /// cm³
    pub volume: f64,
    /// g
    pub mass: f64,
    /// kcal
    pub calories: f64,
}

/// (label, density g/cm³, energy kcal/g, shape)
const BUILTIN: [(&str, f64, f64, ShapeModel); 19] = [
    ("apple", 0.78, 0.52, ShapeModel::Ellipsoid),
    ("banana", 0.91, 0.89, ShapeModel::Irregular),
    ("bread", 0.18, 3.15, ShapeModel::Column),
    ("bun", 0.34, 2.23, ShapeModel::Column),
    ("doughnut", 0.31, 4.34, ShapeModel::Column),
    ("egg", 1.03, 1.43, ShapeModel::Ellipsoid),
    ("fired dough twist", 0.58, 24.16, ShapeModel::Column),
    ("grape", 0.97, 0.69, ShapeModel::Ellipsoid),
    ("lemon", 0.96, 0.29, ShapeModel::Ellipsoid),
    ("litchi", 1.00, 0.66, ShapeModel::Ellipsoid),
    ("mango", 1.07, 0.60, ShapeModel::Ellipsoid),
    ("mooncake", 0.96, 18.83, ShapeModel::Column),
    ("orange", 0.90, 0.63, ShapeModel::Ellipsoid),
    ("peach", 0.96, 0.57, ShapeModel::Ellipsoid),
    ("pear", 1.02, 0.39, ShapeModel::Ellipsoid),
    ("plum", 1.01, 0.46, ShapeModel::Ellipsoid),
    ("qiwi", 0.97, 0.61, ShapeModel::Ellipsoid),
    ("sachima", 0.22, 21.45, ShapeModel::Column),
    ("tomato", 0.98, 0.27, ShapeModel::Ellipsoid),
];

/// Canonical form of a food label: lowercase, `_`/`-` read as spaces,
/// whitespace collapsed. `"Fired_Dough_Twist"` → `"fired dough twist"`.
pub fn normalize_label(label: &str) -> String {
    label
        .to_lowercase()
        .replace(['_', '-'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// True for the 19 dataset food types and `"mix"`.
pub fn is_dataset_label(label: &str) -> bool {
    let l = normalize_label(label);
    l == MIX_LABEL || BUILTIN.iter().any(|(name, ..)| *name == l)
}

/// Entry of the `--nutrition` override file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NutritionEntry {
    pub label: String,
    pub density_g_cm3: f64,
    pub energy_kcal_g: f64,
    pub shape: ShapeModel,
}

/// Immutable label → spec table.
#[derive(Debug, Clone, PartialEq)]
pub struct NutritionTable {
    specs: BTreeMap<String, FoodSpec>,
}

impl Default for NutritionTable {
    fn default() -> Self {
        Self::builtin()
    }
}

impl NutritionTable {
    pub fn builtin() -> Self {
        let specs = BUILTIN
            .iter()
            .map(|&(label, density, energy, shape)| {
                (
                    label.to_string(),
                    FoodSpec {
                        label: label.to_string(),
                        density,
                        energy,
                        shape,
                    },
                )
            })
            .collect();
        let table = Self { specs };
        table.warn_implausible();
        table
    }

    /// Built-in table with the entries of a JSON override file merged in.
    pub fn with_overrides_from(path: &Path) -> Result<Self, NutritionError> {
        let text = std::fs::read_to_string(path).map_err(|source| NutritionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let entries: Vec<NutritionEntry> = serde_json::from_str(&text)?;
        let mut table = Self::builtin();
        table.merge(entries)?;
        Ok(table)
    }

    pub fn merge(&mut self, entries: Vec<NutritionEntry>) -> Result<(), NutritionError> {
        for e in entries {
            let label = normalize_label(&e.label);
            let valid = |v: f64| v.is_finite() && v > 0.0;
            if !valid(e.density_g_cm3) || !valid(e.energy_kcal_g) {
                return Err(NutritionError::InvalidEntry {
                    label,
                    reason: "density and energy must be positive".into(),
                });
            }
            if label == MIX_LABEL {
                return Err(NutritionError::InvalidEntry {
                    label,
                    reason: "\"mix\" has no single density or energy".into(),
                });
            }
            self.specs.insert(
                label.clone(),
                FoodSpec {
                    label,
                    density: e.density_g_cm3,
                    energy: e.energy_kcal_g,
                    shape: e.shape,
                },
            );
        }
        self.warn_implausible();
        Ok(())
    }

    fn warn_implausible(&self) {
        for spec in self.implausible_energies() {
            log::warn!(
                "{}: energy {} kcal/g exceeds {} kcal/g (pure fat); kept verbatim",
                spec.label,
                spec.energy,
                PLAUSIBLE_ENERGY_LIMIT
            );
        }
    }

    /// Rows whose energy exceeds [`PLAUSIBLE_ENERGY_LIMIT`].
    pub fn implausible_energies(&self) -> Vec<&FoodSpec> {
        self.specs
            .values()
            .filter(|s| s.energy > PLAUSIBLE_ENERGY_LIMIT)
            .collect()
    }

    pub fn lookup(&self, label: &str) -> Result<&FoodSpec, NutritionError> {
        let key = normalize_label(label);
        self.specs
            .get(&key)
            .ok_or(NutritionError::UnknownFood(label.to_string()))
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Specs in label order.
    pub fn iter(&self) -> impl Iterator<Item = &FoodSpec> {
        self.specs.values()
    }
}

/// `mass = volume · density`, `calories = mass · energy`.
pub fn calories_from_volume(volume: f64, spec: &FoodSpec) -> Result<CalorieResult, NutritionError> {
    if !(volume > 0.0) || !volume.is_finite() {
        return Err(NutritionError::NonpositiveVolume(volume));
    }
    let mass = volume * spec.density;
    Ok(CalorieResult {
        volume,
        mass,
        calories: mass * spec.energy,
    })
}

impl NutritionError {
    pub fn code(&self) -> &'static str {
        match self {
            NutritionError::UnknownFood(_) => "UnknownFood",
            NutritionError::NonpositiveVolume(_) => "NonpositiveVolume",
            NutritionError::InvalidEntry { .. } => "InvalidEntry",
            NutritionError::Io { .. } => "Io",
            NutritionError::Parse(_) => "ParseError",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_known_rows() {
        let t = NutritionTable::builtin();
        let apple = t.lookup("apple").unwrap();
        assert_eq!((apple.density, apple.energy), (0.78, 0.52));
        let egg = t.lookup("egg").unwrap();
        assert_eq!((egg.density, egg.energy), (1.03, 1.43));
        assert!(matches!(t.lookup("pizza"), Err(NutritionError::UnknownFood(_))));
        assert!(matches!(t.lookup("mix"), Err(NutritionError::UnknownFood(_))));
        assert_eq!(t.lookup("Fired_Dough_Twist").unwrap().energy, 24.16);
    }

    #[test]
    fn calorie_examples() {
        let t = NutritionTable::builtin();
        let r = calories_from_volume(200.0, t.lookup("apple").unwrap()).unwrap();
        assert!((r.mass - 156.0).abs() < 1e-9);
        assert!((r.calories - 81.12).abs() < 1e-9);
        let r = calories_from_volume(100.0, t.lookup("sachima").unwrap()).unwrap();
        assert!((r.mass - 22.0).abs() < 1e-9);
        assert!((r.calories - 471.9).abs() < 1e-9);
        for v in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                calories_from_volume(v, t.lookup("egg").unwrap()),
                Err(NutritionError::NonpositiveVolume(_))
            ));
        }
    }

    #[test]
    fn implausible_rows_are_flagged_not_altered() {
        let t = NutritionTable::builtin();
        let mut flagged: Vec<_> = t.implausible_energies().iter().map(|s| s.label.clone()).collect();
        flagged.sort();
        assert_eq!(flagged, ["fired dough twist", "mooncake", "sachima"]);
        assert_eq!(t.lookup("mooncake").unwrap().energy, 18.83);
    }

    #[test]
    fn overrides_merge_and_validate() {
        let mut t = NutritionTable::builtin();
        t.merge(vec![NutritionEntry {
            label: "Pizza".into(),
            density_g_cm3: 0.6,
            energy_kcal_g: 2.7,
            shape: ShapeModel::Column,
        }])
        .unwrap();
        assert_eq!(t.len(), 20);
        assert_eq!(t.lookup("pizza").unwrap().shape, ShapeModel::Column);
        let bad = t.merge(vec![NutritionEntry {
            label: "apple".into(),
            density_g_cm3: 0.0,
            energy_kcal_g: 1.0,
            shape: ShapeModel::Column,
        }]);
        assert!(matches!(bad, Err(NutritionError::InvalidEntry { .. })));
    }

    #[test]
    fn dataset_labels() {
        assert!(is_dataset_label("mix"));
        assert!(is_dataset_label("Qiwi"));
        assert!(!is_dataset_label("kiwi"));
    }
}
