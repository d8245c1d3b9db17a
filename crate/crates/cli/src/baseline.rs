//! HTTP nutrition API used as the comparison baseline.

use std::time::Duration;

use nutrient_estimate::tuning::{BaselineClient, BaselineError};
use serde::Deserialize;

use crate::config::BaselineSection;

#[derive(Deserialize)]
struct ApiResponse {
    items: Vec<ApiItem>,
}

#[derive(Deserialize)]
struct ApiItem {
    calories: f64,
    serving_size_g: f64,
}

/// Calories per 100 g over all parsed items of one answer.
pub fn calories_per_100g(body: &str) -> Result<f64, BaselineError> {
    let parsed: ApiResponse =
        serde_json::from_str(body).map_err(|e| BaselineError::Response(e.to_string()))?;
    if parsed.items.is_empty() {
        return Err(BaselineError::Response("no food items recognized".into()));
    }
    let kcal: f64 = parsed.items.iter().map(|i| i.calories).sum();
    let grams: f64 = parsed.items.iter().map(|i| i.serving_size_g).sum();
    if grams.is_nan() || grams <= 0.0 {
        return Err(BaselineError::Response("total serving size is zero".into()));
    }
    Ok(kcal / grams * 100.0)
}

pub struct HttpBaseline {
    client: reqwest::blocking::Client,
    url: String,
    header: String,
    key: String,
}

impl HttpBaseline {
    pub fn new(cfg: &BaselineSection, key: String) -> reqwest::Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()?;
        Ok(Self {
            client,
            url: cfg.url.clone(),
            header: cfg.api_key_header.clone(),
            key,
        })
    }
}

impl BaselineClient for HttpBaseline {
    fn calories_per_100g(&self, title: &str) -> Result<f64, BaselineError> {
        let resp = self
            .client
            .get(&self.url)
            .query(&[("query", title)])
            .header(self.header.as_str(), self.key.as_str())
            .send()
            .map_err(|e| BaselineError::Network(e.to_string()))?;
        let status = resp.status();
        if status == reqwest::StatusCode::UNAUTHORIZED || status == reqwest::StatusCode::FORBIDDEN {
            return Err(BaselineError::Auth(status.to_string()));
        }
        if !status.is_success() {
            return Err(BaselineError::Network(format!("HTTP {status}")));
        }
        let body = resp
            .text()
            .map_err(|e| BaselineError::Network(e.to_string()))?;
        calories_per_100g(&body)
    }
}
