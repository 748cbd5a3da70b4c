//! Closed-form structural constants and the ledger that records them
//! together with empirically measured ones.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// log c₀ = 2 log λ − 2 log Λ − log(n+5) − 1000Λn/λ.
pub fn constant_c0_log(n: usize, lambda: f64, big_lambda: f64) -> f64 {
    let nf = n as f64;
    2.0 * lambda.ln() - 2.0 * big_lambda.ln() - (nf + 5.0).ln() - 1000.0 * big_lambda * nf / lambda
}

/// c₂ = (1 + Λn/λ)^{n+1}.
pub fn constant_c2(n: usize, lambda: f64, big_lambda: f64) -> f64 {
    (1.0 + big_lambda * n as f64 / lambda).powi(n as i32 + 1)
}

/// (1 + Λn/λ)ⁿ(1 + Λn), the pointwise bound on the transport Jacobian.
pub fn jacobian_bound(n: usize, lambda: f64, big_lambda: f64) -> f64 {
    let nf = n as f64;
    (1.0 + big_lambda * nf / lambda).powi(n as i32) * (1.0 + big_lambda * nf)
}

/// η₂ = 4^{−(1+n/2)}(√2+1)^{−n}.
pub fn constant_eta2(n: usize) -> f64 {
    crate::geometry::eta2(n)
}

/// α₀ = −log(1 − ν₀)/log 3.
pub fn constant_alpha0(nu0: f64) -> Result<f64> {
    if !(nu0 > 0.0 && nu0 < 1.0) {
        return domain(format!("ν₀ = {nu0} must lie in (0, 1)"));
    }
    Ok(-(1.0 - nu0).ln() / 3f64.ln())
}

/// Cylinder radius factor (√2 − 1)/4.
pub fn gamma() -> f64 {
    (SQRT_2 - 1.0) / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm { formula: String },
    Empirical { source: String, samples: usize, seeds: Vec<u64>, spread: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub n: usize,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    pub c_practical: f64,
    pub entries: BTreeMap<String, LedgerEntry>,
}

impl ConstantsLedger {
    /// Ledger with all closed-form entries filled in.
    pub fn closed_form(n: usize, lambda: f64, big_lambda: f64, c_practical: f64) -> Self {
        let mut entries = BTreeMap::new();
        let mut put = |k: &str, v: f64, f: &str| {
            entries.insert(k.to_string(), LedgerEntry { value: v, provenance: Provenance::ClosedForm { formula: f.into() } });
        };
        put("log_c0", constant_c0_log(n, lambda, big_lambda), "2 ln λ − 2 ln Λ − ln(n+5) − 1000Λn/λ");
        put("c2", constant_c2(n, lambda, big_lambda), "(1 + Λn/λ)^(n+1)");
        put("jacobian_bound", jacobian_bound(n, lambda, big_lambda), "(1 + Λn/λ)^n (1 + Λn)");
        put("eta2", constant_eta2(n), "4^(−(1+n/2)) (√2+1)^(−n)");
        put("gamma", gamma(), "(√2 − 1)/4");
        Self { n, lambda, big_lambda, c_practical, entries }
    }

    pub fn record_empirical(&mut self, key: &str, value: f64, source: &str, samples: usize, seeds: Vec<u64>, spread: f64) {
        self.entries.insert(
            key.to_string(),
            LedgerEntry { value, provenance: Provenance::Empirical { source: source.into(), samples, seeds, spread } },
        );
    }

    /// Adds α₀ derived from the recorded ν₀.
    pub fn derive_alpha0(&mut self) -> Result<()> {
        let nu0 = match self.entries.get("nu0") {
            Some(e) => e.value,
            None => return domain("ν₀ has not been recorded"),
        };
        let a = constant_alpha0(nu0)?;
        self.entries.insert(
            "alpha0".into(),
            LedgerEntry { value: a, provenance: Provenance::ClosedForm { formula: "−ln(1 − ν₀)/ln 3 with the empirical ν₀".into() } },
        );
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).map(|e| e.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c0_examples() {
        assert!((constant_c0_log(1, 1.0, 1.0) - (-(6f64.ln()) - 1000.0)).abs() < 1e-12);
        assert!((constant_c0_log(1, 1.0, 1.0) + 1001.7917594692280).abs() < 1e-9);
        let v = constant_c0_log(2, 1.0, 2.0);
        assert!((v - (-2.0 * 2f64.ln() - 7f64.ln() - 4000.0)).abs() < 1e-12);
        assert!(constant_c0_log(2, 1.0, 4.0) < v);
    }

    #[test]
    fn c2_examples() {
        assert_eq!(constant_c2(2, 1.0, 1.0), 27.0);
        assert_eq!(constant_c2(1, 1.0, 1.0), 4.0);
        assert!(constant_c2(2, 0.5, 1.0) > 27.0);
        assert!(jacobian_bound(2, 0.5, 2.0) <= constant_c2(2, 0.5, 2.0));
    }

    #[test]
    fn alpha0_examples() {
        assert!((constant_alpha0(0.1).unwrap() - 0.0959032742893846).abs() < 1e-12);
        assert!((constant_alpha0(2.0 / 3.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(constant_alpha0(1e-9).unwrap() < 1e-8);
        assert!(constant_alpha0(1.0).is_err());
    }

    #[test]
    fn ledger_roundtrip() {
        let mut l = ConstantsLedger::closed_form(2, 0.5, 2.0, 1e-2);
        l.record_empirical("nu0", 0.2, "test", 10, vec![1, 2], 0.01);
        l.derive_alpha0().unwrap();
        let back: ConstantsLedger = serde_json::from_str(&l.to_json()).unwrap();
        assert_eq!(back, l);
        assert_eq!(ConstantsLedger::closed_form(2, 0.5, 2.0, 1e-2).entries, ConstantsLedger::closed_form(2, 0.5, 2.0, 1e-2).entries);
    }
}
