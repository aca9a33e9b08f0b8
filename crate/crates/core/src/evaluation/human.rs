use serde::{Deserialize, Serialize};

/// Absolute difference below which a model and a band are called even.
/// Reference values carry four decimals.
pub const TIE_TOLERANCE: f64 = 5e-5;

/// Agreement of one group of human raters with the mean rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanBand {
    /// Range of images rated per person, e.g. `[100,200)`.
    pub band: String,
    pub raters: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ranking {
    Above,
    Below,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanComparison {
    pub band: String,
    pub raters: usize,
    pub band_rho: f64,
    pub model_rho: f64,
    pub ranking: Ranking,
}

pub fn rank_against(model_rho: f64, band_rho: f64) -> Ranking {
    let diff = model_rho - band_rho;
    if diff.abs() < TIE_TOLERANCE {
        Ranking::Tie
    } else if diff > 0.0 {
        Ranking::Above
    } else {
        Ranking::Below
    }
}

pub fn human_consistency_table(model_rho: f64, bands: &[HumanBand]) -> Vec<HumanComparison> {
    bands
        .iter()
        .map(|b| HumanComparison {
            band: b.band.clone(),
            raters: b.raters,
            band_rho: b.rho,
            model_rho,
            ranking: rank_against(model_rho, b.rho),
        })
        .collect()
}

pub fn render_human_table(rows: &[HumanComparison]) -> String {
    let mut out = format!("{:<12} {:>7} {:>8} {:>8}  model\n", "band", "raters", "band rho", "model");
    for r in rows {
        let verdict = match r.ranking {
            Ranking::Above => "above",
            Ranking::Below => "below",
            Ranking::Tie => "tie",
        };
        out.push_str(&format!(
            "{:<12} {:>7} {:>8.4} {:>8.4}  {verdict}\n",
            r.band, r.raters, r.band_rho, r.model_rho
        ));
    }
    out
}
