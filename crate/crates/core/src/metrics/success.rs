use crate::bch::Bch;
use crate::bits::BitKey;
use crate::error::{invalid, Result};
use crate::protocol::{commit, reproduce};

/// Probability of reproducing the enrolled key as a function of the
/// correction capability `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessCurve {
    pub points: Vec<(usize, f64)>,
    pub pairs: usize,
}

impl SuccessCurve {
    pub fn probability(&self, t: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == t).map(|p| p.1)
    }

    /// Smallest listed `t` whose probability is at least `level`.
    pub fn threshold(&self, level: f64) -> Option<usize> {
        self.points.iter().find(|p| p.1 >= level).map(|p| p.0)
    }

    /// `t,probability` rows, with a header line.
    pub fn table(&self) -> String {
        let mut s = String::from("t,probability\n");
        for (t, p) in &self.points {
            s.push_str(&format!("{t},{p}\n"));
        }
        s
    }
}

fn check_sets(enroll: &[BitKey], auth: &[BitKey]) -> Result<usize> {
    let first = enroll
        .first()
        .ok_or_else(|| invalid("enrollment set is empty"))?;
    if auth.is_empty() {
        return Err(invalid("authentication set is empty"));
    }
    let m = first.len();
    if enroll.iter().chain(auth).any(|k| k.len() != m) {
        return Err(invalid("all keys must share one length"));
    }
    Ok(m)
}

/// Fraction of enrollment x authentication pairs with Hamming distance at
/// most `t`, for each `t` in `ts`. A code correcting `t` errors succeeds
/// exactly on those pairs.
pub fn success_curve(enroll: &[BitKey], auth: &[BitKey], ts: &[usize]) -> Result<SuccessCurve> {
    check_sets(enroll, auth)?;
    let mut distances = Vec::with_capacity(enroll.len() * auth.len());
    for e in enroll {
        for a in auth {
            distances.push(e.hamming(a)?);
        }
    }
    let n = distances.len() as f64;
    let points = ts
        .iter()
        .map(|&t| (t, distances.iter().filter(|&&d| d <= t).count() as f64 / n))
        .collect();
    Ok(SuccessCurve {
        points,
        pairs: distances.len(),
    })
}

/// Same quantity measured through the real commitment: each pair is
/// committed with BCH(2^m - 1, t) and counted when the reproduced key equals
/// the enrolled one. `t = 0` means an exact key match. Values of `t` that
/// give no valid code are skipped.
pub fn protocol_success_curve(
    enroll: &[BitKey],
    auth: &[BitKey],
    m: u32,
    ts: &[usize],
    seed: u64,
) -> Result<SuccessCurve> {
    let len = check_sets(enroll, auth)?;
    if len != (1usize << m) - 1 {
        return Err(invalid(format!(
            "keys have {len} bits, code length is {}",
            (1usize << m) - 1
        )));
    }
    let pairs = enroll.len() * auth.len();
    let mut points = Vec::new();
    for &t in ts {
        let ok = if t == 0 {
            enroll
                .iter()
                .map(|e| auth.iter().filter(|a| *a == e).count())
                .sum::<usize>()
        } else {
            let Ok(code) = Bch::new(m, t) else { continue };
            let mut ok = 0;
            for (i, e) in enroll.iter().enumerate() {
                let offset = commit(e, &code, seed.wrapping_add(i as u64))?;
                for a in auth {
                    if let Some((k, _)) = reproduce(a, &offset, &code)? {
                        ok += usize::from(k == *e);
                    }
                }
            }
            ok
        };
        points.push((t, ok as f64 / pairs as f64));
    }
    Ok(SuccessCurve { points, pairs })
}
