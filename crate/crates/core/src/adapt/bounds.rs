use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundName {
    CortesCovariate,
    ZhaoJsLower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: BoundName,
    pub value: f64,
    pub inputs: BTreeMap<String, f64>,
    pub note: String,
}

/// Generalization bound under covariate shift for importance-weighted
/// learning:
/// `2^(5/4) 2^(D/2) ((c/n) ln(2ne/c) + (1/n) ln(4/delta))^(3/8)`,
/// where `D` is the order-2 Rényi divergence in bits and `c` the
/// pseudo-dimension.
pub fn cortes_covariate_bound(renyi2_bits: f64, pseudo_dim: usize, n: usize, delta: f64) -> Result<BoundReport> {
    if !(renyi2_bits >= 0.0) || !renyi2_bits.is_finite() {
        return Err(Error::InvalidArgument(format!("divergence must be finite and >= 0, got {renyi2_bits}")));
    }
    if pseudo_dim < 1 || n <= pseudo_dim {
        return Err(Error::InvalidArgument(format!(
            "need n > c >= 1, got n = {n}, c = {pseudo_dim}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {delta}")));
    }
    let (c, nf) = (pseudo_dim as f64, n as f64);
    let bracket = (c / nf) * (2.0 * nf * std::f64::consts::E / c).ln() + (4.0 / delta).ln() / nf;
    let value = 2f64.powf(1.25) * 2f64.powf(renyi2_bits / 2.0) * bracket.powf(0.375);
    let inputs = BTreeMap::from([
        ("renyi2_bits".to_string(), renyi2_bits),
        ("pseudo_dim".to_string(), c),
        ("n".to_string(), nf),
        ("delta".to_string(), delta),
    ]);
    Ok(BoundReport {
        bound_name: BoundName::CortesCovariate,
        value,
        inputs,
        note: "divergence exponent base 2 (bits); logarithms inside the bracket natural".into(),
    })
}

/// Lower bound on the joint source-plus-target error for any representation:
/// `0.5 (d_Y - d_Z)^2` when the label distance `d_Y` exceeds the
/// representation distance `d_Z`, zero otherwise. Both are Jensen-Shannon
/// distances (square roots of the divergence in bits).
pub fn zhao_js_lower_bound(label_js_distance: f64, representation_js_distance: f64) -> Result<BoundReport> {
    for (name, v) in [
        ("label_js_distance", label_js_distance),
        ("representation_js_distance", representation_js_distance),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("{name} must be in [0, 1], got {v}")));
        }
    }
    let gap = label_js_distance - representation_js_distance;
    let value = if gap > 0.0 { 0.5 * gap * gap } else { 0.0 };
    Ok(BoundReport {
        bound_name: BoundName::ZhaoJsLower,
        value,
        inputs: BTreeMap::from([
            ("label_js_distance".to_string(), label_js_distance),
            ("representation_js_distance".to_string(), representation_js_distance),
        ]),
        note: if gap > 0.0 {
            "label distance exceeds representation distance".into()
        } else {
            "vacuous: representation distance dominates".into()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cortes_golden_value() {
        // evaluated independently as 2**1.25 * ((1/1e4)*log(2e4*e) + (1/1e4)*log(80))**0.375
        let r = cortes_covariate_bound(0.0, 1, 10_000, 0.05).unwrap();
        assert!((r.value - 0.209_118_5).abs() < 1e-6, "{}", r.value);
        assert_eq!(r.inputs["n"], 10_000.0);
    }

    #[test]
    fn cortes_monotone() {
        let a = cortes_covariate_bound(1.0, 3, 100, 0.05).unwrap().value;
        let b = cortes_covariate_bound(1.0, 3, 1000, 0.05).unwrap().value;
        let c = cortes_covariate_bound(2.0, 3, 100, 0.05).unwrap().value;
        assert!(b < a && c > a);
    }

    #[test]
    fn cortes_domain_errors() {
        assert!(cortes_covariate_bound(-0.1, 1, 10, 0.05).is_err());
        assert!(cortes_covariate_bound(0.0, 10, 10, 0.05).is_err());
        assert!(cortes_covariate_bound(0.0, 0, 10, 0.05).is_err());
        assert!(cortes_covariate_bound(0.0, 1, 10, 1.0).is_err());
    }

    #[test]
    fn zhao_examples() {
        assert_eq!(zhao_js_lower_bound(0.3, 0.3).unwrap().value, 0.0);
        assert!((zhao_js_lower_bound(0.8, 0.0).unwrap().value - 0.32).abs() < 1e-15);
        assert!((zhao_js_lower_bound(0.5, 0.2).unwrap().value - 0.045).abs() < 1e-15);
        assert_eq!(zhao_js_lower_bound(0.1, 0.6).unwrap().value, 0.0);
        assert!(zhao_js_lower_bound(1.2, 0.0).is_err());
    }
}
