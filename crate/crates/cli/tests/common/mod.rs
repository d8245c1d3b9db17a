#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nutrient_estimate::{
    normalize_query_title, EmbeddingRecord, EmbeddingStore, FoodDb, FoodRecord, NutrientVector,
    Source,
};
use sha2::{Digest, Sha256};

pub const DIM: usize = 12;
pub const TAG: &str = "toy-bag-of-words";

/// Deterministic bag-of-words vector: each word adds a fixed pseudo-random
/// direction, so titles sharing words land close together.
pub fn toy_embed(text: &str) -> Vec<f32> {
    let mut v = vec![0.0f32; DIM];
    for word in text.split_whitespace() {
        let h = Sha256::digest(word.as_bytes());
        for (i, x) in v.iter_mut().enumerate() {
            *x += h[i] as f32 / 127.5 - 1.0;
        }
    }
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    v
}

pub const FOODS: [(&str, f64, f64, f64, f64); 16] = [
    ("grilled cheese sandwich", 350.0, 12.0, 19.0, 30.0),
    ("cheddar cheese", 409.0, 23.3, 34.0, 2.4),
    ("cheese pizza", 266.0, 11.0, 10.0, 33.0),
    ("pepperoni pizza", 298.0, 12.0, 13.0, 32.0),
    ("chicken noodle soup", 62.0, 3.3, 1.7, 7.9),
    ("beef ramen", 98.0, 5.0, 3.8, 11.0),
    ("fried rice", 174.0, 4.6, 5.9, 26.0),
    ("chocolate chip cookie", 488.0, 5.4, 24.0, 64.0),
    ("apple pie", 237.0, 1.9, 11.0, 34.0),
    ("caesar salad", 158.0, 3.6, 13.0, 6.6),
    ("beef tacos", 226.0, 9.9, 12.0, 20.0),
    ("sourdough bread", 272.0, 11.0, 1.8, 52.0),
    ("salmon sushi", 145.0, 6.9, 3.1, 22.0),
    ("banana pancakes", 227.0, 6.4, 9.7, 29.0),
    ("beef lasagna", 165.0, 9.0, 7.0, 16.0),
    ("glazed donut", 421.0, 4.6, 23.0, 49.0),
];

pub fn food_db() -> FoodDb {
    FoodDb::from_records(
        FOODS
            .iter()
            .map(|&(name, kcal, p, f, c)| FoodRecord {
                id: name.into(),
                name: name.into(),
                nutrients: NutrientVector {
                    calories: Some(kcal),
                    protein: Some(p),
                    fat: Some(f),
                    carbohydrates: Some(c),
                },
                source: Source::Survey,
            })
            .collect(),
    )
    .unwrap()
}

pub fn food_store() -> EmbeddingStore {
    let records = FOODS
        .iter()
        .map(|(name, ..)| EmbeddingRecord {
            id: name.to_string(),
            vector: toy_embed(name),
        })
        .collect();
    EmbeddingStore::from_records(DIM as u32, TAG, records).unwrap()
}

/// Query store keyed by normalized title.
pub fn query_store<'a>(titles: impl IntoIterator<Item = &'a str>) -> EmbeddingStore {
    let mut keys: Vec<String> = titles
        .into_iter()
        .filter_map(|t| normalize_query_title(t).ok())
        .collect();
    keys.sort();
    keys.dedup();
    let records = keys
        .into_iter()
        .map(|k| EmbeddingRecord {
            vector: toy_embed(&k),
            id: k,
        })
        .collect();
    EmbeddingStore::from_records(DIM as u32, TAG, records).unwrap()
}

pub const LABELED: [(&str, f64); 20] = [
    ("Grilled Cheese", 340.0),
    ("Cheesy pizza", 270.0),
    ("Pepperoni, pizza", 300.0),
    ("chicken soup", 55.0),
    ("Spicy beef ramen", 110.0),
    ("fried rice bowl", 180.0),
    ("cookie", 470.0),
    ("apple crumble pie", 250.0),
    ("salad", 120.0),
    ("tacos", 230.0),
    ("Bread", 265.0),
    ("sushi platter", 150.0),
    ("pancakes", 220.0),
    ("lasagna", 170.0),
    ("donut", 430.0),
    ("mac and cheese", 160.0),
    ("beef stew", 95.0),
    ("chocolate cake", 370.0),
    ("garlic bread", 350.0),
    ("rice pudding", 120.0),
];

pub struct Fixture {
    pub db: PathBuf,
    pub index: PathBuf,
    pub queries: PathBuf,
    pub labeled: PathBuf,
}

/// Write db, index, labeled CSV and a query store covering `extra_titles`
/// plus every labeled title.
pub fn write_fixture(dir: &Path, extra_titles: &[&str]) -> Fixture {
    let db = dir.join("food_db.tsv");
    let mut tsv = Vec::new();
    food_db().write_tsv(&mut tsv).unwrap();
    std::fs::write(&db, tsv).unwrap();

    let index = dir.join("food_index.nteb");
    food_store().save(&index).unwrap();

    let labeled = dir.join("labeled.csv");
    let mut w = csv::Writer::from_path(&labeled).unwrap();
    w.write_record(["title", "calories_per_100g"]).unwrap();
    for (t, k) in LABELED {
        w.write_record([t, &k.to_string()]).unwrap();
    }
    w.flush().unwrap();

    let queries = dir.join("queries.nteb");
    let titles = LABELED
        .iter()
        .map(|(t, _)| *t)
        .chain(extra_titles.iter().copied());
    query_store(titles).save(&queries).unwrap();
    Fixture {
        db,
        index,
        queries,
        labeled,
    }
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nutrient-estimate"))
}

pub fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn nutrient-estimate")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
