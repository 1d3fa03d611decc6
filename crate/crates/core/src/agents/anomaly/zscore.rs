use super::AnomalyError;

/// Flags points whose population z-score exceeds `threshold`. A series with
/// no spread flags nothing.
pub fn zscore_flags(series: &[f64], threshold: f64) -> Result<Vec<bool>, AnomalyError> {
    let z = zscores(series)?;
    Ok(z.into_iter().map(|z| z > threshold).collect())
}

pub fn zscores(series: &[f64]) -> Result<Vec<f64>, AnomalyError> {
    if series.len() < 2 {
        return Err(AnomalyError::TooFewPoints {
            need: 2,
            got: series.len(),
        });
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd <= 1e-12 * mean.abs().max(1.0) {
        return Ok(vec![0.0; series.len()]);
    }
    Ok(series.iter().map(|x| (x - mean).abs() / sd).collect())
}
