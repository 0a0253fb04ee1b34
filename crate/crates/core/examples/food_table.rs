//! Nutrition table lookups and volume to calorie conversion.

use foodcal::nutrition::{calories_from_volume, NutritionTable};

pub fn run() -> Result<usize, Box<dyn std::error::Error>> {
    let table = NutritionTable::builtin();
    println!("{} foods", table.len());
    for label in ["apple", "banana", "sachima"] {
        let spec = table.lookup(label)?;
        let c = calories_from_volume(100.0, spec)?;
        println!("{label:>8}: 100 cm3 -> {:.2} g, {:.2} kcal ({} model)", c.mass, c.calories, spec.shape);
    }
    for s in table.implausible_energies() {
        println!("note: {} lists {} kcal/g", s.label, s.energy);
    }
    Ok(table.len())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run().map(|_| ())
}
