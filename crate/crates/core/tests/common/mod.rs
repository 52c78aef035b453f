#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use templm::io::{parse_record, Record};
use templm::DataInput;

pub const NAMES: &[&str] = &[
    "Aromi",
    "Bibimbap House",
    "Cotto",
    "Fitzbillies",
    "Giraffe",
    "Loch Fyne",
    "Strada",
    "Wildwood",
    "Zizzi",
    "The Phoenix",
    "Alimentum",
    "Browns Cambridge",
    "Clowns",
    "The Mill",
    "Midsummer House",
];
pub const NEAR: &[&str] = &[
    "Burger King",
    "Café Rouge",
    "The Bakers",
    "Raja Indian Cuisine",
    "Yippee Noodle Bar",
    "All Bar One",
];
pub const FOODS: &[&str] = &["Chinese", "Italian", "French", "Indian", "English", "Japanese"];
pub const EAT_TYPES: &[&str] = &["restaurant", "coffee shop", "pub"];
pub const AREAS: &[&str] = &["city centre", "riverside"];
pub const PRICES: &[&str] = &["cheap", "moderate", "high"];
pub const RATINGS: &[&str] = &["high", "average", "low"];
pub const FAMILY: &[&str] = &["yes", "no"];

/// Twelve field combinations over eight fields.
pub const COMBINATIONS: &[&[&str]] = &[
    &["name", "food"],
    &["name", "food", "area"],
    &["name", "eatType", "food"],
    &["name", "eatType", "area"],
    &["name", "food", "priceRange"],
    &["name", "area", "near"],
    &["name", "food", "customer rating"],
    &["name", "eatType", "familyFriendly"],
    &["name", "food", "area", "near"],
    &["name", "eatType", "food", "priceRange"],
    &["name", "food", "customer rating", "familyFriendly"],
    &["name", "eatType", "area", "near", "priceRange"],
];

fn pool(field: &str) -> &'static [&'static str] {
    match field {
        "name" => NAMES,
        "near" => NEAR,
        "food" => FOODS,
        "eatType" => EAT_TYPES,
        "area" => AREAS,
        "priceRange" => PRICES,
        "customer rating" => RATINGS,
        "familyFriendly" => FAMILY,
        other => panic!("no pool for {other}"),
    }
}

/// A reference sentence verbalizing every field of `d`.
pub fn describe(d: &BTreeMap<&str, &str>, rng: &mut impl Rng) -> String {
    let mut s = match d.get("eatType") {
        Some(t) => format!("{} is a {t}", d["name"]),
        None => format!("{} is a place", d["name"]),
    };
    if let Some(f) = d.get("food") {
        s += &[format!(" serving {f} food"), format!(" that serves {f} food")][rng.gen_range(0..2)];
    }
    if let Some(a) = d.get("area") {
        s += &format!(" in the {a}");
    }
    if let Some(n) = d.get("near") {
        s += &format!(" near {n}");
    }
    if let Some(p) = d.get("priceRange") {
        s += &format!(" with a {p} price range");
    }
    if let Some(r) = d.get("customer rating") {
        s += &format!(" and a {r} customer rating");
    }
    s += " .";
    if let Some(f) = d.get("familyFriendly") {
        s += if *f == "yes" {
            " It is family friendly ."
        } else {
            " It is not family friendly ."
        };
    }
    s
}

fn record(id: &str, d: &BTreeMap<&str, &str>, text: Option<&str>) -> Record {
    let data: BTreeMap<&str, Vec<&str>> = d.iter().map(|(k, v)| (*k, vec![*v])).collect();
    let line = match text {
        Some(t) => serde_json::json!({ "id": id, "data": data, "text": t }),
        None => serde_json::json!({ "id": id, "data": data }),
    };
    parse_record(&line.to_string(), 1).unwrap()
}

/// `n` examples spread round-robin over the combinations.
pub fn restaurant_corpus(n: usize, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let combo = COMBINATIONS[i % COMBINATIONS.len()];
            let d: BTreeMap<&str, &str> = combo.iter().map(|f| (*f, *pool(f).choose(&mut rng).unwrap())).collect();
            let text = describe(&d, &mut rng);
            record(&format!("r{i}"), &d, Some(&text))
        })
        .collect()
}

pub const NOVEL_NEAR: &[&str] = &["Subway", "Starbucks", "Pizza Hut", "Taco Bell", "Five Guys", "Pret"];
pub const NOVEL_FOODS: &[&str] = &["German", "Thai", "Mexican", "Greek", "Korean", "Turkish"];
pub const NOVEL_AREAS: &[&str] = &["Central Park", "Soho", "harbour front", "old town"];

/// Every value any field takes in [`restaurant_corpus`].
pub fn training_values() -> Vec<&'static str> {
    [NAMES, NEAR, FOODS, EAT_TYPES, AREAS, PRICES, RATINGS].concat()
}

/// Inputs of seen combinations whose name, near, food and area fields take
/// novel values.
pub fn novel_entity_inputs(names: &[String], seed: u64) -> Vec<DataInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let combo = COMBINATIONS[i % COMBINATIONS.len()];
            let mut d: BTreeMap<&str, &str> = BTreeMap::new();
            for f in combo.iter().copied() {
                let novel = match f {
                    "name" => name.as_str(),
                    "near" => NOVEL_NEAR.choose(&mut rng).unwrap(),
                    "food" => NOVEL_FOODS.choose(&mut rng).unwrap(),
                    "area" => NOVEL_AREAS.choose(&mut rng).unwrap(),
                    other => pool(other).choose(&mut rng).unwrap(),
                };
                d.insert(f, novel);
            }
            record(&format!("ood{i}"), &d, None).data
        })
        .collect()
}

pub fn novel_names(n: usize) -> Vec<String> {
    const A: &[&str] = &[
        "Blue", "Golden", "Silver", "Red", "Green", "Old", "Little", "Royal", "Happy",
    ];
    const B: &[&str] = &["Lantern", "Oak", "Bistro", "Harbour", "Kettle", "Anchor"];
    let mut out = Vec::new();
    for a in A {
        for b in B {
            out.push(format!("{a} {b}"));
        }
    }
    out.truncate(n);
    assert_eq!(out.len(), n);
    out
}
