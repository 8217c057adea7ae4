//! Privacy budgets and noise calibration.
//!
//! The recursive estimator is analyzed under zero-concentrated differential
//! privacy (zCDP), where a mechanism's cost is a single number `rho` and
//! costs add under composition. The grouped baseline is analyzed directly
//! in the approximate `(eps, delta)` model. This module holds both budget
//! types, the conversion between them, the replacement sensitivity of a
//! bounded second moment, and a small ledger that records every charge a
//! mechanism makes so callers can audit the total.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Budget under zero-concentrated differential privacy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZcdpBudget {
    rho: f64,
}

impl ZcdpBudget {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::invalid("rho", "must be finite and positive"));
        }
        Ok(ZcdpBudget { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The `(eps, delta)` guarantee implied by this budget at a given
    /// failure probability `delta`.
    pub fn to_approx(&self, delta: f64) -> Result<ApproxDpBudget> {
        let eps = zcdp_to_approx_eps(self.rho, delta)?;
        ApproxDpBudget::new(eps, delta)
    }
}

/// Budget under approximate differential privacy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxDpBudget {
    eps: f64,
    delta: f64,
}

impl ApproxDpBudget {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid("eps", "must be finite and positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid("delta", "must lie in (0, 1)"));
        }
        Ok(ApproxDpBudget { eps, delta })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// `eps` such that `rho`-zCDP implies `(eps, delta)` approximate DP:
/// `eps = rho + sqrt(2 rho ln(1/delta))`.
pub fn zcdp_to_approx_eps(rho: f64, delta: f64) -> Result<f64> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::invalid("rho", "must be finite and positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1)"));
    }
    let l = (1.0 / delta).ln();
    Ok(rho + (2.0 * rho * l).sqrt())
}

/// Largest `rho` whose zCDP guarantee converts to `(eps, delta)`:
/// the inverse of [`zcdp_to_approx_eps`] in `rho`, in closed form
/// `sqrt(rho) = (sqrt(2 L + 4 eps) - sqrt(2 L)) / 2` with `L = ln(1/delta)`.
pub fn approx_to_zcdp_rho(eps: f64, delta: f64) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid("eps", "must be finite and positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", "must lie in (0, 1)"));
    }
    let l = (1.0 / delta).ln();
    let root = ((2.0 * l + 4.0 * eps).sqrt() - (2.0 * l).sqrt()) / 2.0;
    Ok(root * root)
}

/// Replacement sensitivity of the second moment of an `n`-point dataset
/// with norms bounded by `radius`: `4 radius^2 / n` in Frobenius norm.
pub fn sensitivity_second_moment(radius: f64, n: usize) -> Result<f64> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::invalid("radius", "must be finite and positive"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    Ok(4.0 * radius * radius / n as f64)
}

/// Standard deviation of Gaussian noise sufficient for `rho`-zCDP release
/// of a statistic with the given sensitivity: `sensitivity / sqrt(2 rho)`.
pub fn gaussian_sigma_for_zcdp(sensitivity: f64, rho: f64) -> Result<f64> {
    if !(sensitivity.is_finite() && sensitivity > 0.0) {
        return Err(Error::invalid("sensitivity", "must be finite and positive"));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::invalid("rho", "must be finite and positive"));
    }
    Ok(sensitivity / (2.0 * rho).sqrt())
}

/// One charge recorded by a mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub rho: f64,
}

/// Running record of zCDP charges. Composition in this model is additive,
/// so the audit is a sum.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BudgetLedger {
    entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new() -> Self {
        BudgetLedger::default()
    }

    pub fn charge(&mut self, label: impl Into<String>, rho: f64) {
        self.entries.push(LedgerEntry {
            label: label.into(),
            rho,
        });
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn total_rho(&self) -> f64 {
        self.entries.iter().map(|e| e.rho).sum()
    }

    /// Converts the composed total to an `(eps, delta)` statement.
    pub fn to_approx(&self, delta: f64) -> Result<ApproxDpBudget> {
        let eps = zcdp_to_approx_eps(self.total_rho(), delta)?;
        ApproxDpBudget::new(eps, delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::RngState;

    #[test]
    fn sensitivity_known_value() {
        let s = sensitivity_second_moment(1.0, 100).unwrap();
        assert_eq!(s, 0.04);
        assert!(sensitivity_second_moment(0.0, 100).is_err());
        assert!(sensitivity_second_moment(1.0, 0).is_err());
    }

    #[test]
    fn gaussian_sigma_known_value() {
        let sigma = gaussian_sigma_for_zcdp(0.04, 0.02).unwrap();
        assert!((sigma - 0.2).abs() < 1e-15);
    }

    #[test]
    fn conversion_known_value() {
        let eps = zcdp_to_approx_eps(0.5, 1e-6).unwrap();
        assert!((eps - 4.216922188849838).abs() < 1e-12, "eps = {eps}");
    }

    #[test]
    fn conversion_round_trips() {
        for &rho in &[1e-4, 0.01, 0.3, 0.5, 2.0, 17.0] {
            for &delta in &[1e-10, 1e-6, 1e-3, 0.4] {
                let eps = zcdp_to_approx_eps(rho, delta).unwrap();
                assert!(eps > rho);
                let back = approx_to_zcdp_rho(eps, delta).unwrap();
                assert!(
                    (back - rho).abs() <= 1e-10 * rho,
                    "rho {rho} -> eps {eps} -> {back}"
                );
            }
        }
    }

    #[test]
    fn conversion_is_monotone_in_rho() {
        let mut prev = 0.0;
        for k in 1..100 {
            let rho = k as f64 * 0.05;
            let eps = zcdp_to_approx_eps(rho, 1e-8).unwrap();
            assert!(eps > prev);
            prev = eps;
        }
    }

    #[test]
    fn ledger_totals_and_converts() {
        let mut ledger = BudgetLedger::new();
        ledger.charge("level 0", 0.25);
        ledger.charge("level 1", 0.25);
        ledger.charge("level 2", 0.5);
        assert_eq!(ledger.total_rho(), 1.0);
        assert_eq!(ledger.entries().len(), 3);
        let approx = ledger.to_approx(1e-6).unwrap();
        assert!((approx.eps() - zcdp_to_approx_eps(1.0, 1e-6).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn per_level_sigma_identity_sample() {
        // sigma from (sensitivity, rho/T) equals the closed form
        // 4 R^2 sqrt(T) / (n sqrt(2 rho)).
        let mut rng = RngState::new(2024, 0);
        for _ in 0..100 {
            let radius = 0.1 + 10.0 * rng.uniform();
            let n = 10 + (rng.uniform() * 1e6) as usize;
            let rho = 0.01 + rng.uniform() * 4.0;
            let t = 1 + (rng.uniform() * 40.0) as usize;
            let sens = sensitivity_second_moment(radius, n).unwrap();
            let sigma = gaussian_sigma_for_zcdp(sens, rho / t as f64).unwrap();
            let closed = 4.0 * radius * radius * (t as f64).sqrt()
                / (n as f64 * (2.0 * rho).sqrt());
            assert!(
                (sigma - closed).abs() <= 1e-12 * closed,
                "sigma {sigma} vs {closed}"
            );
        }
    }

    #[test]
    fn budgets_validate() {
        assert!(ZcdpBudget::new(0.0).is_err());
        assert!(ZcdpBudget::new(f64::NAN).is_err());
        assert!(ApproxDpBudget::new(1.0, 0.0).is_err());
        assert!(ApproxDpBudget::new(1.0, 1.0).is_err());
        let b = ZcdpBudget::new(0.5).unwrap();
        let a = b.to_approx(1e-6).unwrap();
        assert!((a.eps() - 4.216922188849838).abs() < 1e-12);
    }
}
