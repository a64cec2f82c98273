//! Exhaustive search over threshold allocations `1{σ_k v_k ≤ v̄_k ∀k}`.

use alloc::vec::Vec;

use super::search::{argsort, Incumbent, Objective};
use super::{check_dv, Rule, Threshold};
use crate::error::Result;

/// Thresholds range over `−∞`, every observed `σ_k v_k` and `+∞`; the last
/// coordinate is swept in sorted order so each box costs `O(1)`.
pub(crate) fn search(obj: &Objective<'_>) -> Result<Rule> {
    check_dv(obj, 3, "threshold allocation search")?;
    let dv = obj.dv();
    let n = obj.n();
    let mut inc = Incumbent::new(obj);
    if dv == 0 {
        let wsum: f64 = obj.w.iter().sum();
        let csum: f64 = (0..n).map(|i| obj.dc(i)).sum();
        inc.offer(0.0, 0.0, 0, || Rule::Ta { thresholds: Vec::new(), signs: Vec::new() });
        inc.offer(wsum, csum, n, || Rule::Ta { thresholds: Vec::new(), signs: Vec::new() });
        return Ok(inc.into_rule());
    }
    for mask in 0..(1u32 << dv) {
        let signs: Vec<i8> = (0..dv).map(|k| if mask >> k & 1 == 1 { -1 } else { 1 }).collect();
        let w: Vec<Vec<f64>> = (0..dv)
            .map(|k| obj.v.rows().map(|r| f64::from(signs[k]) * r[k]).collect())
            .collect();
        let mut cands: Vec<Vec<Threshold>> = Vec::with_capacity(dv);
        for col in &w {
            let mut vals: Vec<f64> = col.clone();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let mut c = alloc::vec![Threshold::NegInf];
            c.extend(vals.into_iter().map(Threshold::Value));
            c.push(Threshold::PosInf);
            cands.push(c);
        }
        let last = dv - 1;
        let order = argsort(&w[last]);
        let mut prefix: Vec<Threshold> = alloc::vec![Threshold::NegInf; last];
        let mut counters = alloc::vec![0usize; last];
        loop {
            for (k, t) in prefix.iter_mut().enumerate() {
                *t = cands[k][counters[k]];
            }
            // Sweep the last coordinate over rows admitted by the prefix.
            let admitted = |i: usize| (0..last).all(|k| prefix[k].admits(w[k][i]));
            let (mut sw, mut sc, mut sn) = (0.0, 0.0, 0usize);
            let make = |t: Threshold, prefix: &[Threshold]| {
                let mut thresholds = prefix.to_vec();
                thresholds.push(t);
                Rule::Ta { thresholds, signs: signs.clone() }
            };
            inc.offer(0.0, 0.0, 0, || make(Threshold::NegInf, &prefix));
            let rows: Vec<usize> = order.iter().copied().filter(|&i| admitted(i)).collect();
            for (pos, &i) in rows.iter().enumerate() {
                sw += obj.w[i];
                sc += obj.dc(i);
                sn += 1;
                if pos + 1 < rows.len() && w[last][rows[pos + 1]] == w[last][i] {
                    continue;
                }
                inc.offer(sw, sc, sn, || make(Threshold::Value(w[last][i]), &prefix));
            }
            inc.offer(sw, sc, sn, || make(Threshold::PosInf, &prefix));
            // Odometer over the leading coordinates.
            let mut k = 0;
            while k < last {
                counters[k] += 1;
                if counters[k] < cands[k].len() {
                    break;
                }
                counters[k] = 0;
                k += 1;
            }
            if k == last {
                break;
            }
        }
    }
    Ok(inc.into_rule())
}
