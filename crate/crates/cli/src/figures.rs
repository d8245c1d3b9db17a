//! Vega-Lite line charts over the weekly CSV series.

use anyhow::{bail, Result};
use serde_json::{json, Map, Value};

const SCHEMA: &str = "https://vega.github.io/schema/vega-lite/v5.json";

/// CSV rows as JSON objects; numeric cells become numbers, empty cells null.
fn rows(csv_text: &str, expected: &[&str]) -> Result<Vec<Value>> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != expected {
        bail!(
            "expected header {}, found {}",
            expected.join(","),
            header.join(",")
        );
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut obj = Map::new();
        for (key, cell) in header.iter().zip(record.iter()) {
            let v = if cell.is_empty() {
                Value::Null
            } else if key == "week" {
                json!(cell)
            } else {
                match cell.parse::<f64>() {
                    Ok(x) => json!(x),
                    Err(_) => bail!("non-numeric {key} value '{cell}'"),
                }
            };
            obj.insert(key.clone(), v);
        }
        out.push(Value::Object(obj));
    }
    Ok(out)
}

fn line_chart(title: &str, data: &[Value], field: &str, y_title: &str) -> Value {
    json!({
        "$schema": SCHEMA,
        "title": title,
        "width": 600,
        "height": 250,
        "data": { "values": data },
        "mark": { "type": "line", "point": false },
        "encoding": {
            "x": { "field": "week", "type": "ordinal", "title": "ISO week", "axis": { "labelOverlap": true } },
            "y": { "field": field, "type": "quantitative", "title": y_title }
        }
    })
}

pub fn activity_figures(csv_text: &str) -> Result<Vec<(&'static str, Value)>> {
    let data = rows(csv_text, &["week", "posts", "unique_authors"])?;
    Ok(vec![
        (
            "weekly_posts.vl.json",
            line_chart("Posts per week", &data, "posts", "posts"),
        ),
        (
            "weekly_authors.vl.json",
            line_chart(
                "Unique authors per week",
                &data,
                "unique_authors",
                "authors",
            ),
        ),
    ])
}

pub fn nutrient_figure(csv_text: &str) -> Result<(&'static str, Value)> {
    let fields = [
        "calories_median",
        "protein_median",
        "fat_median",
        "carbs_median",
    ];
    let data = rows(
        csv_text,
        &[
            "week",
            "calories_median",
            "protein_median",
            "fat_median",
            "carbs_median",
            "covered_posts",
        ],
    )?;
    let spec = json!({
        "$schema": SCHEMA,
        "title": "Weekly median nutrients per 100 g",
        "data": { "values": data },
        "transform": [{ "fold": fields, "as": ["nutrient", "median"] }],
        "facet": { "row": { "field": "nutrient", "type": "nominal", "sort": fields } },
        "resolve": { "scale": { "y": "independent" } },
        "spec": {
            "width": 600,
            "height": 120,
            "mark": "line",
            "encoding": {
                "x": { "field": "week", "type": "ordinal", "title": "ISO week", "axis": { "labelOverlap": true } },
                "y": { "field": "median", "type": "quantitative", "title": null }
            }
        }
    });
    Ok(("weekly_nutrients.vl.json", spec))
}
