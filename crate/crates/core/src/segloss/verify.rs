//! Verifiers for the mathematical properties of the loss functions: metric
//! axioms on binary fields, the restriction bound, the closed-form error
//! penalties, and finite-difference gradient checks.

use super::{binary_dice_loss, binary_iou_loss, evaluate, BinaryField, LossKind, ProbField};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const TRIANGLE_TOL: f64 = 1e-12;

/// A triple violating the triangle inequality: `L(p,y) > L(p,r) + L(r,y)`.
#[derive(Debug, Clone, Serialize)]
pub struct TriangleCounterexample {
    pub p: Vec<u8>,
    pub y: Vec<u8>,
    pub r: Vec<u8>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricCheckReport {
    pub loss: String,
    pub n_max: usize,
    /// Largest field length checked exhaustively.
    pub exhaustive_n: usize,
    /// Monte Carlo triples drawn per length above the exhaustive range.
    pub sampled_triples: usize,
    pub symmetry_ok: bool,
    pub identity_ok: bool,
    pub triangle_ok: bool,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<TriangleCounterexample>,
}

fn binary_loss(kind: LossKind, a: &BinaryField, b: &BinaryField) -> f64 {
    match kind {
        LossKind::Dice => binary_dice_loss(a, b),
        // Power-family members agree with plain IOU on binary fields.
        LossKind::Iou | LossKind::IouPower(_) => binary_iou_loss(a, b),
    }
}

fn field_from_bits(bits: usize, n: usize) -> BinaryField {
    // Highest bit first, so index 1 at n=2 is the vector (0, 1).
    let y = (0..n).map(|k| ((bits >> (n - 1 - k)) & 1) as u8).collect();
    BinaryField::new(y).expect("bits are binary")
}

/// Check symmetry, identity of indiscernibles, and the triangle inequality
/// of a loss restricted to binary fields. Lengths up to 3 are enumerated
/// exhaustively (all `2^(3n)` triples); longer lengths up to `n_max` are
/// sampled with `1e6` seeded Monte Carlo triples each. Scanning stops at the
/// first counterexample.
pub fn check_metric(kind: LossKind, n_max: usize) -> MetricCheckReport {
    let exhaustive_n = n_max.min(3);
    let mut report = MetricCheckReport {
        loss: kind.name(),
        n_max,
        exhaustive_n,
        sampled_triples: if n_max > 3 { 1_000_000 } else { 0 },
        symmetry_ok: true,
        identity_ok: true,
        triangle_ok: true,
        passed: true,
        counterexample: None,
    };

    'outer: for n in 1..=exhaustive_n {
        let fields: Vec<BinaryField> = (0..1usize << n).map(|b| field_from_bits(b, n)).collect();
        let count = fields.len();
        let mut table = vec![0.0f64; count * count];
        for (i, a) in fields.iter().enumerate() {
            for (j, b) in fields.iter().enumerate() {
                table[i * count + j] = binary_loss(kind, a, b);
            }
        }
        for i in 0..count {
            for j in 0..count {
                if (table[i * count + j] - table[j * count + i]).abs() > TRIANGLE_TOL {
                    report.symmetry_ok = false;
                    break 'outer;
                }
                let zero = table[i * count + j].abs() <= TRIANGLE_TOL;
                if zero != (i == j) {
                    report.identity_ok = false;
                    break 'outer;
                }
            }
        }
        for pi in 0..count {
            for yi in 0..count {
                for ri in 0..count {
                    let lhs = table[pi * count + yi];
                    let rhs = table[pi * count + ri] + table[ri * count + yi];
                    if lhs > rhs + TRIANGLE_TOL {
                        report.triangle_ok = false;
                        report.counterexample = Some(TriangleCounterexample {
                            p: fields[pi].values().to_vec(),
                            y: fields[yi].values().to_vec(),
                            r: fields[ri].values().to_vec(),
                            lhs,
                            rhs,
                        });
                        break 'outer;
                    }
                }
            }
        }
    }

    if report.triangle_ok && report.symmetry_ok && report.identity_ok && n_max > 3 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d65_7472_6963);
        'mc: for n in 4..=n_max {
            for _ in 0..report.sampled_triples {
                let draw = |rng: &mut ChaCha8Rng| {
                    BinaryField::new((0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect())
                        .expect("binary")
                };
                let p = draw(&mut rng);
                let y = draw(&mut rng);
                let r = draw(&mut rng);
                let lhs = binary_loss(kind, &p, &y);
                let rhs = binary_loss(kind, &p, &r) + binary_loss(kind, &r, &y);
                if lhs > rhs + TRIANGLE_TOL {
                    report.triangle_ok = false;
                    report.counterexample = Some(TriangleCounterexample {
                        p: p.values().to_vec(),
                        y: y.values().to_vec(),
                        r: r.values().to_vec(),
                        lhs,
                        rhs,
                    });
                    break 'mc;
                }
            }
        }
    }

    report.passed = report.symmetry_ok && report.identity_ok && report.triangle_ok;
    report
}

/// Result of one restriction-bound evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct RestrictionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// The triangle-inequality bound on the loss decrease obtained by
/// restricting predictions and labels to a subset `s`:
/// `L(p,g) <= L(p, p∩s) + L(g∩s, p∩s) + L(g, g∩s)`.
pub fn restriction_bound(
    p: &BinaryField,
    g: &BinaryField,
    s: &BinaryField,
) -> Result<RestrictionCheck> {
    if p.len() != g.len() || p.len() != s.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: g.len().max(s.len()),
        });
    }
    let and = |a: &BinaryField, b: &BinaryField| {
        BinaryField::new(
            a.values()
                .iter()
                .zip(b.values())
                .map(|(&x, &y)| x & y)
                .collect(),
        )
        .expect("binary")
    };
    let ps = and(p, s);
    let gs = and(g, s);
    let lhs = binary_iou_loss(p, g);
    let rhs = binary_iou_loss(p, &ps) + binary_iou_loss(&gs, &ps) + binary_iou_loss(g, &gs);
    Ok(RestrictionCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + TRIANGLE_TOL,
    })
}

/// One row of the error-penalty table.
#[derive(Debug, Clone, Serialize)]
pub struct PenaltyPoint {
    pub eps: u64,
    /// Pure false-negative loss, `eps / N`.
    pub l_fn: f64,
    /// Pure false-positive loss, `eps / (N + eps)`.
    pub l_fp: f64,
}

/// Closed-form penalties for pure false-negative and pure false-positive
/// errors at truth size `N`, cross-checked against explicit binary fields
/// run through the smooth IOU loss (tolerance 1e-12).
pub fn penalty_curves(n_truth: u64, eps_list: &[u64]) -> Result<Vec<PenaltyPoint>> {
    if n_truth < 1 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if eps > n_truth {
            return Err(Error::InvalidParameter(format!(
                "false-negative count {eps} exceeds truth size {n_truth}"
            )));
        }
        let l_fn = eps as f64 / n_truth as f64;
        let l_fp = eps as f64 / (n_truth + eps) as f64;

        // Realize both cases as fields and confirm the formulas.
        let n = (n_truth + eps) as usize;
        let truth = BinaryField::new((0..n).map(|k| u8::from(k < n_truth as usize)).collect())?;
        let miss = ProbField::new(
            (0..n)
                .map(|k| f64::from(k < (n_truth - eps) as usize))
                .collect(),
        )?;
        let extra = ProbField::new((0..n).map(|k| f64::from(k < n)).collect())?;

        let fn_actual = evaluate(LossKind::Iou, &miss, &truth)?.value;
        let fp_actual = evaluate(LossKind::Iou, &extra, &truth)?.value;
        if (fn_actual - l_fn).abs() > 1e-12 || (fp_actual - l_fp).abs() > 1e-12 {
            return Err(Error::VerificationFailed(format!(
                "penalty formulas disagree with constructed fields at N={n_truth}, eps={eps}: \
                 fn {fn_actual} vs {l_fn}, fp {fp_actual} vs {l_fp}"
            )));
        }
        out.push(PenaltyPoint { eps, l_fn, l_fp });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub loss: String,
    pub trials: usize,
    pub n: usize,
    pub tol: f64,
    pub max_rel_err: f64,
    pub passed: bool,
}

/// Compare analytic gradients against central finite differences
/// (`h = 1e-5`) at random strictly-interior probability fields.
pub fn grad_check(kind: LossKind, trials: usize, n: usize, tol: f64, seed: u64) -> GradCheckReport {
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_rel_err = 0.0f64;

    for _ in 0..trials {
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        y[rng.gen_range(0..n)] = 1;
        let y = BinaryField::new(y).expect("binary");

        let analytic = evaluate(kind, &ProbField::new(p.clone()).expect("interior"), &y)
            .expect("valid inputs")
            .gradient
            .expect("losses provide gradients");

        for k in 0..n {
            let mut plus = p.clone();
            plus[k] += H;
            let mut minus = p.clone();
            minus[k] -= H;
            let f_plus = evaluate(kind, &ProbField::new(plus).expect("interior"), &y)
                .expect("valid")
                .value;
            let f_minus = evaluate(kind, &ProbField::new(minus).expect("interior"), &y)
                .expect("valid")
                .value;
            let fd = (f_plus - f_minus) / (2.0 * H);
            let denom = analytic[k].abs().max(fd.abs()).max(1e-8);
            max_rel_err = max_rel_err.max((analytic[k] - fd).abs() / denom);
        }
    }

    GradCheckReport {
        loss: kind.name(),
        trials,
        n,
        tol,
        max_rel_err,
        passed: max_rel_err < tol,
    }
}
