use std::collections::BTreeMap;

use super::{Comparator, Formula, Signal, StlError};

/// Quantitative semantics used to evaluate robustness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Semantics {
    /// Exact min/max.
    Hard,
    /// min/max replaced by `-tau*lse(-x/tau)` / `tau*lse(x/tau)`.
    Smooth(f64),
}

pub type SignalMap = BTreeMap<String, Signal>;

/// Robustness of `phi` at step `t`. Positive means satisfied (hard semantics).
pub fn robustness(phi: &Formula, signals: &SignalMap, t: usize, sem: Semantics) -> Result<f64, StlError> {
    if let Semantics::Smooth(tau) = sem {
        if !(tau > 0.0) {
            return Err(StlError::InvalidParams(format!("temperature {tau}")));
        }
    }
    check_window(phi, signals, t)?;
    Ok(eval(phi, signals, t, sem))
}

/// Verifies channel presence and that every temporal window fits the signals.
pub(crate) fn check_window(phi: &Formula, signals: &SignalMap, t: usize) -> Result<(), StlError> {
    let need = t + phi.horizon();
    for ch in phi.channels() {
        let s = signals
            .get(ch)
            .ok_or_else(|| StlError::UnknownChannel(ch.to_string()))?;
        if need >= s.samples.len() {
            return Err(StlError::OutOfRange {
                channel: ch.to_string(),
                needed: need + 1,
                available: s.samples.len(),
            });
        }
    }
    Ok(())
}

fn eval(phi: &Formula, signals: &SignalMap, t: usize, sem: Semantics) -> f64 {
    match phi {
        Formula::Pred {
            channel,
            cmp,
            threshold,
        } => {
            let s = signals[channel].samples[t];
            match cmp {
                Comparator::Ge => s - threshold,
                Comparator::Le => threshold - s,
            }
        }
        Formula::Not(c) => -eval(c, signals, t, sem),
        Formula::And(l, r) => min_of(&[eval(l, signals, t, sem), eval(r, signals, t, sem)], sem),
        Formula::Or(l, r) => max_of(&[eval(l, signals, t, sem), eval(r, signals, t, sem)], sem),
        Formula::Always { a, b, child } => {
            let vals: Vec<f64> = (t + a..=t + b).map(|k| eval(child, signals, k, sem)).collect();
            min_of(&vals, sem)
        }
        Formula::Eventually { a, b, child } => {
            let vals: Vec<f64> = (t + a..=t + b).map(|k| eval(child, signals, k, sem)).collect();
            max_of(&vals, sem)
        }
    }
}

pub fn max_of(vals: &[f64], sem: Semantics) -> f64 {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match sem {
        Semantics::Hard => m,
        Semantics::Smooth(tau) => m + tau * vals.iter().map(|v| ((v - m) / tau).exp()).sum::<f64>().ln(),
    }
}

pub fn min_of(vals: &[f64], sem: Semantics) -> f64 {
    let neg: Vec<f64> = vals.iter().map(|v| -v).collect();
    -max_of(&neg, sem)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(name: &str, samples: Vec<f64>) -> SignalMap {
        let mut m = SignalMap::new();
        m.insert(name.into(), Signal::new(name, samples, 0.4).unwrap());
        m
    }

    #[test]
    fn always_upper_bound() {
        let phi = Formula::always(0, 2, Formula::le("s", 1.0)).unwrap();
        let r = robustness(&phi, &one("s", vec![0.2, 0.5, 0.9]), 0, Semantics::Hard).unwrap();
        assert!((r - 0.1).abs() < 1e-12);
    }

    #[test]
    fn violated_predicate_is_negative() {
        let phi = Formula::ge("s", 0.0);
        let r = robustness(&phi, &one("s", vec![-0.3]), 0, Semantics::Hard).unwrap();
        assert_eq!(r, -0.3);
    }

    #[test]
    fn always_of_band() {
        let phi = Formula::always(0, 1, Formula::and(Formula::le("s", 1.0), Formula::ge("s", -1.0))).unwrap();
        let r = robustness(&phi, &one("s", vec![1.2, 0.0]), 0, Semantics::Hard).unwrap();
        assert!((r + 0.2).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let phi = Formula::always(0, 3, Formula::le("s", 1.0)).unwrap();
        assert!(matches!(
            robustness(&phi, &one("s", vec![0.0; 3]), 0, Semantics::Hard),
            Err(StlError::OutOfRange { .. })
        ));
        assert!(matches!(
            robustness(&phi, &one("q", vec![0.0; 5]), 0, Semantics::Hard),
            Err(StlError::UnknownChannel(_))
        ));
    }

    #[test]
    fn smooth_is_below_hard_min() {
        let phi = Formula::always(0, 2, Formula::le("s", 1.0)).unwrap();
        let sig = one("s", vec![0.2, 0.5, 0.9]);
        let hard = robustness(&phi, &sig, 0, Semantics::Hard).unwrap();
        let soft = robustness(&phi, &sig, 0, Semantics::Smooth(0.05)).unwrap();
        assert!(soft <= hard && hard - soft <= 0.05 * 3f64.ln() + 1e-12);
    }
}
