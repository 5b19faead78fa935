use rayon::prelude::*;
use serde::Serialize;

use super::{observe, BlackBox};
use crate::error::{Error, Result};
use crate::table::Table;

/// Observed quantities at one operating setting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub control: f64,
    pub loss_hat: f64,
    pub certificate_hat: f64,
    /// Recovered up to one global constant; NaN until `recover_path`.
    pub beta_hat: f64,
    /// In the same native unit as `beta_hat`; NaN until `recover_path`.
    pub info_hat: f64,
    pub quadrature_nodes: Vec<(f64, f64)>,
}

impl ProbeRecord {
    pub fn gap(&self) -> f64 {
        self.certificate_hat - self.loss_hat
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateEstimate {
    /// `L(1)`, the operating loss.
    pub loss: f64,
    /// Trapezoidal integral of `L(t)` over `[0, 1]`.
    pub certificate: f64,
    pub nodes: Vec<(f64, f64)>,
}

/// `n` equally spaced scales from 0 to 1.
pub fn default_t_nodes(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

pub fn trapezoid(nodes: &[(f64, f64)]) -> f64 {
    nodes
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum()
}

/// Plug-in `sum P(s,a) l(s,a)` from one observation.
pub fn estimate_loss(bb: &dyn BlackBox, loss: &Table<f64>, control: f64, seed: u64) -> Result<f64> {
    Ok(observe(bb, loss, control, seed)?.expected(loss))
}

/// Runs the box on `t * l` for each node, evaluates each induced channel
/// on the original loss, and integrates `L(t)` by the trapezoid rule.
pub fn estimate_certificate(
    bb: &dyn BlackBox,
    loss: &Table<f64>,
    control: f64,
    t_nodes: &[f64],
    seed: u64,
) -> Result<CertificateEstimate> {
    if t_nodes.len() < 2 || t_nodes[0] != 0.0 || *t_nodes.last().unwrap() != 1.0 {
        return Err(Error::Invalid("t nodes must start at 0 and end at 1".into()));
    }
    if t_nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("t nodes must be strictly ascending".into()));
    }
    let eval = |&t: &f64| -> Result<(f64, f64)> {
        let scaled = loss.map(|v| t * v);
        // Common random numbers across nodes keep L(t) smooth in t.
        let obs = observe(bb, &scaled, control, seed).map_err(|e| Error::BlackBox {
            at: format!("control={control}, t={t}"),
            detail: e.to_string(),
        })?;
        Ok((t, obs.expected(loss)))
    };
    let nodes: Result<Vec<(f64, f64)>> = if bb.concurrent() {
        t_nodes.par_iter().map(eval).collect()
    } else {
        t_nodes.iter().map(eval).collect()
    };
    let nodes = nodes?;
    Ok(CertificateEstimate {
        loss: nodes.last().unwrap().1,
        certificate: trapezoid(&nodes),
        nodes,
    })
}

/// Loss and certificate at one control, with the path fields unset.
pub fn probe_record(bb: &dyn BlackBox, loss: &Table<f64>, control: f64, t_nodes: &[f64], seed: u64) -> Result<ProbeRecord> {
    let est = estimate_certificate(bb, loss, control, t_nodes, seed)?;
    Ok(ProbeRecord {
        control,
        loss_hat: est.loss,
        certificate_hat: est.certificate,
        beta_hat: f64::NAN,
        info_hat: f64::NAN,
        quadrature_nodes: est.nodes,
    })
}

/// Integrates `d log beta = -dL_adv / (L_adv - L)` along the records with
/// the trapezoid rule in `L_adv`, pins `beta_hat = anchor` at the last
/// record, and sets `info_hat = beta_hat (L_adv - L)`.
pub fn recover_path(records: &[ProbeRecord], anchor: f64) -> Result<Vec<ProbeRecord>> {
    let n = records.len();
    if n < 2 {
        return Err(Error::Invalid("path recovery needs at least two records".into()));
    }
    if !(anchor > 0.0 && anchor.is_finite()) {
        return Err(Error::Invalid(format!("anchor must be positive, got {anchor}")));
    }
    let gaps: Vec<f64> = records.iter().map(ProbeRecord::gap).collect();
    for (k, &g) in gaps.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::Invalid(format!("record {k} has a non-finite gap")));
        }
        if g <= 0.0 && k > 0 && k + 1 < n {
            return Err(Error::Invalid(format!(
                "certificate gap {g} at interior record {k}: the path is not bounded-rational admissible"
            )));
        }
    }
    let inv = |k: usize| if gaps[k] > 0.0 { Some(1.0 / gaps[k]) } else { None };
    let cert: Vec<f64> = records.iter().map(|r| r.certificate_hat).collect();
    let mut log_beta = vec![0.0; n];
    for k in (0..n - 1).rev() {
        let d_cert = cert[k + 1] - cert[k];
        let slope = match (inv(k), inv(k + 1)) {
            (Some(_), Some(_)) => {
                // the gap is interpolated in the certificate (linear is exact for a power
                // law in beta); quadratics through either neighbour are averaged unless
                // their curvatures disagree, which marks an action entering the support
                let (g0, g1) = (gaps[k], gaps[k + 1]);
                let mut fits: Vec<(f64, f64)> = Vec::with_capacity(2);
                for j in [k.wrapping_sub(1), k + 2] {
                    if j < n && gaps[j] > 0.0 {
                        fits.extend(inverse_gap_mean([(cert[k], g0), (cert[k + 1], g1), (cert[j], gaps[j])]));
                    }
                }
                match fits[..] {
                    [(m, c)] => {
                        // an edge interval has one stencil; compare it with the next one inward
                        let inner = if k == 0 { 1 } else { k - 1 };
                        let ok = inner + 2 < n
                            && (inner..inner + 3).all(|i| gaps[i] > 0.0)
                            && inverse_gap_mean([
                                (cert[inner], gaps[inner]),
                                (cert[inner + 1], gaps[inner + 1]),
                                (cert[inner + 2], gaps[inner + 2]),
                            ])
                            .is_some_and(|(_, ci)| c <= KINK_RATIO * ci);
                        if ok { m } else { 1.0 / log_mean(g0, g1) }
                    }
                    [(m0, c0), (m1, c1)] => {
                        if c0 > KINK_RATIO * c1 {
                            m1
                        } else if c1 > KINK_RATIO * c0 {
                            m0
                        } else {
                            0.5 * (m0 + m1)
                        }
                    }
                    _ => 1.0 / log_mean(g0, g1),
                }
            }
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => {
                return Err(Error::Invalid(format!("records {k} and {} both have zero gap", k + 1)));
            }
        };
        // log beta_{k+1} - log beta_k = -d_cert * slope
        log_beta[k] = log_beta[k + 1] + d_cert * slope;
    }
    let ln_anchor = anchor.ln();
    Ok(records
        .iter()
        .zip(&log_beta)
        .map(|(r, &lb)| {
            let beta = (lb + ln_anchor).exp();
            ProbeRecord {
                beta_hat: beta,
                info_hat: beta * r.gap().max(0.0),
                ..r.clone()
            }
        })
        .collect())
}

const KINK_RATIO: f64 = 4.0;

fn log_mean(x: f64, y: f64) -> f64 {
    let r = y / x;
    if (r - 1.0).abs() < 1e-6 {
        // series of (r - 1) / ln r about r = 1
        x * (1.0 + (r - 1.0) / 2.0 - (r - 1.0).powi(2) / 12.0)
    } else {
        (y - x) / r.ln()
    }
}

/// Mean of 1/q over [x0, x1] for the quadratic q through three (x, gap) nodes, with the
/// magnitude of its second divided difference. None when the nodes nearly coincide or q
/// leaves the positive half-line on the interval.
fn inverse_gap_mean(nodes: [(f64, f64); 3]) -> Option<(f64, f64)> {
    let [(x0, y0), (x1, y1), (x2, y2)] = nodes;
    let w = (x1 - x0).abs();
    let sep = (x2 - x0).abs().min((x2 - x1).abs());
    if !(w > 0.0) || sep < 1e-3 * w {
        return None;
    }
    let q = |x: f64| {
        y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
    };
    let curv = ((y2 - y1) / (x2 - x1) - (y1 - y0) / (x1 - x0)) / (x2 - x0);
    const PANELS: usize = 32;
    let mut acc = 0.0;
    for i in 0..=PANELS {
        let v = q(x0 + (x1 - x0) * i as f64 / PANELS as f64);
        if !(v > 0.0) {
            return None;
        }
        let wgt = if i == 0 || i == PANELS { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += wgt / v;
    }
    Some((acc / (3.0 * PANELS as f64), curv.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_exact_on_affine() {
        let nodes = [(0.0, 2.0), (1.0, 4.0)];
        assert_eq!(trapezoid(&nodes), 3.0);
    }

    #[test]
    fn default_nodes_are_eighths() {
        let t = default_t_nodes(9);
        assert_eq!(t.len(), 9);
        assert_eq!(t[1], 0.125);
        assert_eq!(t[8], 1.0);
    }

    fn record(loss: f64, cert: f64) -> ProbeRecord {
        ProbeRecord {
            control: 0.0,
            loss_hat: loss,
            certificate_hat: cert,
            beta_hat: f64::NAN,
            info_hat: f64::NAN,
            quadrature_nodes: vec![],
        }
    }

    #[test]
    fn path_identity_holds_by_construction() {
        let recs = vec![record(1.0, 1.3), record(0.8, 1.2), record(0.7, 1.15)];
        let out = recover_path(&recs, 2.0).unwrap();
        assert_eq!(out[2].beta_hat, 2.0);
        for r in &out {
            assert!((r.info_hat / r.beta_hat - r.gap()).abs() < 1e-15);
        }
        assert!(out[0].beta_hat < out[1].beta_hat);
    }

    #[test]
    fn interior_zero_gap_is_rejected() {
        let recs = vec![record(1.0, 1.3), record(0.8, 0.8), record(0.7, 1.15)];
        assert!(recover_path(&recs, 1.0).is_err());
    }
}
