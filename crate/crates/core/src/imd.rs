//! Intermodulation term enumeration and monomial feature evaluation.
//!
//! A 3rd-order product d_{k1} d_{k2} d_{k3}* lands on subcarrier I_k only
//! when I_{k1} + I_{k2} - I_{k3} - I_k = 0, and a 5th-order product
//! d_{k1} d_{k2} d_{k3} d_{k4}* d_{k5}* only when
//! I_{k1} + I_{k2} + I_{k3} - I_{k4} - I_{k5} - I_k = 0. The enumerators
//! here list every canonical index tuple satisfying those closure
//! constraints. Permutation-equivalent tuples (the unconjugated factors
//! commute, as do the conjugated ones) are collapsed to one canonical
//! representative; the learned coefficient absorbs the multiplicity.
//!
//! Tuples index *positions* within the occupied-subcarrier vector I, not
//! subcarrier indices themselves.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical 1st/3rd/5th-order term tuples for one target subcarrier.
///
/// `imd3` tuples (k1, k2, k3) mean r_{k1} r_{k2} r_{k3}* with k1 <= k2;
/// `imd5` tuples (k1..k5) mean r_{k1} r_{k2} r_{k3} r_{k4}* r_{k5}* with
/// k1 <= k2 <= k3 and k4 <= k5. Both lists are lexicographically ordered;
/// this order is the alignment contract with trained coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImdTermSet {
    /// Target subcarrier position k.
    pub target: usize,
    /// Third-order tuples.
    pub imd3: Vec<[usize; 3]>,
    /// Fifth-order tuples; empty for a 3rd-order-only combiner.
    pub imd5: Vec<[usize; 5]>,
}

impl ImdTermSet {
    /// Linear term plus the closure-satisfying 3rd-order tuples.
    pub fn third_order(used_indices: &[i32], target: usize) -> Result<Self> {
        Ok(Self {
            target,
            imd3: enum_imd3(used_indices, target)?,
            imd5: Vec::new(),
        })
    }

    /// Linear term plus 3rd- and 5th-order closure-satisfying tuples.
    pub fn fifth_order(used_indices: &[i32], target: usize) -> Result<Self> {
        Ok(Self {
            target,
            imd3: enum_imd3(used_indices, target)?,
            imd5: enum_imd5(used_indices, target)?,
        })
    }

    /// Total feature count: 1 linear + |imd3| + |imd5|.
    pub fn len(&self) -> usize {
        1 + self.imd3.len() + self.imd5.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always at least the linear term
    }

    /// Human-readable label of feature `i`, matching feature order.
    pub fn term_label(&self, i: usize) -> String {
        if i == 0 {
            return format!("r[{}]", self.target);
        }
        let i = i - 1;
        if i < self.imd3.len() {
            let [a, b, c] = self.imd3[i];
            format!("r[{a}]r[{b}]r[{c}]*")
        } else {
            let [a, b, c, d, e] = self.imd5[i - self.imd3.len()];
            format!("r[{a}]r[{b}]r[{c}]r[{d}]*r[{e}]*")
        }
    }
}

fn check_target(used_indices: &[i32], target: usize) -> Result<()> {
    if target >= used_indices.len() {
        return Err(Error::InvalidSubcarrier {
            pos: target,
            n_used: used_indices.len(),
        });
    }
    Ok(())
}

/// Position of value `v` in the sorted index vector, if occupied.
fn position_of(used_indices: &[i32], v: i32) -> Option<usize> {
    used_indices.binary_search(&v).ok()
}

/// All (k1, k2, k3) with k1 <= k2 and I_{k1} + I_{k2} - I_{k3} = I_k,
/// lexicographic. k3 is unconstrained relative to k1, k2.
pub fn enum_imd3(used_indices: &[i32], target: usize) -> Result<Vec<[usize; 3]>> {
    check_target(used_indices, target)?;
    let n = used_indices.len();
    let ik = used_indices[target];
    let mut out = Vec::new();
    for k1 in 0..n {
        for k2 in k1..n {
            // closure: I_{k3} = I_{k1} + I_{k2} - I_k
            if let Some(k3) = position_of(used_indices, used_indices[k1] + used_indices[k2] - ik) {
                out.push([k1, k2, k3]);
            }
        }
    }
    Ok(out)
}

/// All (k1..k5) with k1 <= k2 <= k3, k4 <= k5 and
/// I_{k1} + I_{k2} + I_{k3} - I_{k4} - I_{k5} = I_k, lexicographic.
pub fn enum_imd5(used_indices: &[i32], target: usize) -> Result<Vec<[usize; 5]>> {
    check_target(used_indices, target)?;
    let n = used_indices.len();
    let ik = used_indices[target];
    let min_i = used_indices[0];
    let max_i = used_indices[n - 1];
    let mut out = Vec::new();
    for k1 in 0..n {
        for k2 in k1..n {
            for k3 in k2..n {
                let plus = used_indices[k1] + used_indices[k2] + used_indices[k3] - ik;
                // I_{k4} + I_{k5} must equal `plus`; prune impossible sums.
                if plus < 2 * min_i || plus > 2 * max_i {
                    continue;
                }
                for k4 in 0..n {
                    if let Some(k5) = position_of(used_indices, plus - used_indices[k4]) {
                        if k5 >= k4 {
                            out.push([k1, k2, k3, k4, k5]);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Term families of the unconstrained 3rd-order combiner. Within each
/// family the conjugated factors form one ordered group and the
/// unconjugated factors another; ordering within a group removes
/// permutation duplicates, while no frequency-closure filter is applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullThirdOrderTermSet {
    /// Target subcarrier position k.
    pub target: usize,
    /// Family 1: r_{k1}.
    pub f1_lin: Vec<usize>,
    /// Family 2: r_{k1}*.
    pub f2_lin_conj: Vec<usize>,
    /// Family 3: r_{k1} r_{k2}, k1 <= k2.
    pub f3_pair: Vec<[usize; 2]>,
    /// Family 4: r_{k1}* r_{k2}, unrestricted.
    pub f4_pair_mixed: Vec<[usize; 2]>,
    /// Family 5: r_{k1}* r_{k2}*, k1 <= k2.
    pub f5_pair_conj: Vec<[usize; 2]>,
    /// Family 6: r_{k1} r_{k2} r_{k3}, k1 <= k2 <= k3.
    pub f6_triple: Vec<[usize; 3]>,
    /// Family 7: r_{k1}* r_{k2} r_{k3}, k2 <= k3.
    pub f7_triple_one_conj: Vec<[usize; 3]>,
    /// Family 8: r_{k1}* r_{k2}* r_{k3}, k1 <= k2.
    pub f8_triple_two_conj: Vec<[usize; 3]>,
    /// Family 9: r_{k1}* r_{k2}* r_{k3}*, k1 <= k2 <= k3.
    pub f9_triple_conj: Vec<[usize; 3]>,
}

/// Enumerates the nine families for `target` over N_U subcarriers.
pub fn enum_full3(used_indices: &[i32], target: usize) -> Result<FullThirdOrderTermSet> {
    check_target(used_indices, target)?;
    let n = used_indices.len();
    let singles: Vec<usize> = (0..n).collect();
    let mut ordered_pairs = Vec::new();
    let mut free_pairs = Vec::new();
    for a in 0..n {
        for b in 0..n {
            free_pairs.push([a, b]);
            if b >= a {
                ordered_pairs.push([a, b]);
            }
        }
    }
    let mut ordered_triples = Vec::new();
    let mut one_ordered_pair = Vec::new(); // [free, le-pair]
    for a in 0..n {
        for b in 0..n {
            for c in b..n {
                one_ordered_pair.push([a, b, c]);
                if b >= a {
                    ordered_triples.push([a, b, c]);
                }
            }
        }
    }
    // Family 8 mirrors family 7 with the roles of conjugated and
    // unconjugated factors swapped: the conjugated pair is ordered, the
    // plain factor free.
    let mut pair_then_free = Vec::new();
    for a in 0..n {
        for b in a..n {
            for c in 0..n {
                pair_then_free.push([a, b, c]);
            }
        }
    }
    Ok(FullThirdOrderTermSet {
        target,
        f1_lin: singles.clone(),
        f2_lin_conj: singles,
        f3_pair: ordered_pairs.clone(),
        f4_pair_mixed: free_pairs,
        f5_pair_conj: ordered_pairs,
        f6_triple: ordered_triples.clone(),
        f7_triple_one_conj: one_ordered_pair,
        f8_triple_two_conj: pair_then_free,
        f9_triple_conj: ordered_triples,
    })
}

impl FullThirdOrderTermSet {
    /// Family cardinalities in order b1..b9.
    pub fn family_sizes(&self) -> [usize; 9] {
        [
            self.f1_lin.len(),
            self.f2_lin_conj.len(),
            self.f3_pair.len(),
            self.f4_pair_mixed.len(),
            self.f5_pair_conj.len(),
            self.f6_triple.len(),
            self.f7_triple_one_conj.len(),
            self.f8_triple_two_conj.len(),
            self.f9_triple_conj.len(),
        ]
    }

    pub fn len(&self) -> usize {
        self.family_sizes().iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (family number, label) of feature `i` in feature order.
    pub fn term_label(&self, mut i: usize) -> (usize, String) {
        let fams = self.family_sizes();
        for (f, &len) in fams.iter().enumerate() {
            if i < len {
                let label = match f {
                    0 => format!("r[{}]", self.f1_lin[i]),
                    1 => format!("r[{}]*", self.f2_lin_conj[i]),
                    2 => {
                        let [a, b] = self.f3_pair[i];
                        format!("r[{a}]r[{b}]")
                    }
                    3 => {
                        let [a, b] = self.f4_pair_mixed[i];
                        format!("r[{a}]*r[{b}]")
                    }
                    4 => {
                        let [a, b] = self.f5_pair_conj[i];
                        format!("r[{a}]*r[{b}]*")
                    }
                    5 => {
                        let [a, b, c] = self.f6_triple[i];
                        format!("r[{a}]r[{b}]r[{c}]")
                    }
                    6 => {
                        let [a, b, c] = self.f7_triple_one_conj[i];
                        format!("r[{a}]*r[{b}]r[{c}]")
                    }
                    7 => {
                        let [a, b, c] = self.f8_triple_two_conj[i];
                        format!("r[{a}]*r[{b}]*r[{c}]")
                    }
                    _ => {
                        let [a, b, c] = self.f9_triple_conj[i];
                        format!("r[{a}]*r[{b}]*r[{c}]*")
                    }
                };
                return (f + 1, label);
            }
            i -= len;
        }
        unreachable!("feature index out of range")
    }

    /// Whether feature `i` lies in the reduced-combiner support: the
    /// linear r_k term, or a family-7 term r_{k1}* r_{k2} r_{k3} whose
    /// indices satisfy I_{k2} + I_{k3} - I_{k1} - I_k = 0.
    pub fn in_reduced_support(&self, i: usize, used_indices: &[i32]) -> bool {
        let fams = self.family_sizes();
        if i < fams[0] {
            return self.f1_lin[i] == self.target;
        }
        let base: usize = fams[..6].iter().sum();
        if i >= base && i < base + fams[6] {
            let [c, a, b] = self.f7_triple_one_conj[i - base];
            return used_indices[a] + used_indices[b]
                - used_indices[c]
                - used_indices[self.target]
                == 0;
        }
        false
    }
}

/// Term source for feature evaluation.
pub enum Terms<'a> {
    Reduced(&'a ImdTermSet),
    Full3(&'a FullThirdOrderTermSet),
}

impl Terms<'_> {
    pub fn len(&self) -> usize {
        match self {
            Terms::Reduced(t) => t.len(),
            Terms::Full3(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Evaluates one complex feature per term of `terms` on the received
/// symbol vector `r`, in term order.
pub fn build_features(r: &[Complex64], terms: &Terms, out: &mut Vec<Complex64>) -> Result<()> {
    out.clear();
    match terms {
        Terms::Reduced(t) => {
            let need = t
                .imd3
                .iter()
                .flatten()
                .chain(t.imd5.iter().flatten())
                .copied()
                .chain(std::iter::once(t.target))
                .max()
                .unwrap_or(0);
            if need >= r.len() {
                return Err(Error::SizeMismatch {
                    what: "received vector for term set",
                    expected: need + 1,
                    got: r.len(),
                });
            }
            out.reserve(t.len());
            out.push(r[t.target]);
            for &[a, b, c] in &t.imd3 {
                out.push(r[a] * r[b] * r[c].conj());
            }
            for &[a, b, c, d, e] in &t.imd5 {
                out.push(r[a] * r[b] * r[c] * (r[d] * r[e]).conj());
            }
        }
        Terms::Full3(t) => {
            let n = t.f1_lin.len();
            if r.len() < n {
                return Err(Error::SizeMismatch {
                    what: "received vector for term set",
                    expected: n,
                    got: r.len(),
                });
            }
            out.reserve(t.len());
            out.extend(t.f1_lin.iter().map(|&a| r[a]));
            out.extend(t.f2_lin_conj.iter().map(|&a| r[a].conj()));
            out.extend(t.f3_pair.iter().map(|&[a, b]| r[a] * r[b]));
            out.extend(t.f4_pair_mixed.iter().map(|&[a, b]| r[a].conj() * r[b]));
            out.extend(t.f5_pair_conj.iter().map(|&[a, b]| (r[a] * r[b]).conj()));
            out.extend(t.f6_triple.iter().map(|&[a, b, c]| r[a] * r[b] * r[c]));
            out.extend(
                t.f7_triple_one_conj
                    .iter()
                    .map(|&[a, b, c]| r[a].conj() * r[b] * r[c]),
            );
            out.extend(
                t.f8_triple_two_conj
                    .iter()
                    .map(|&[a, b, c]| (r[a] * r[b]).conj() * r[c]),
            );
            out.extend(
                t.f9_triple_conj
                    .iter()
                    .map(|&[a, b, c]| (r[a] * r[b] * r[c]).conj()),
            );
        }
    }
    Ok(())
}

/// Convenience wrapper allocating the output vector.
pub fn features(r: &[Complex64], terms: &Terms) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    build_features(r, terms, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    /// Exhaustive unordered-loop reference: every (a, b, c) combination,
    /// canonicalized after the fact.
    fn imd3_oracle(used: &[i32], k: usize) -> BTreeSet<[usize; 3]> {
        let n = used.len();
        let mut set = BTreeSet::new();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if used[a] + used[b] - used[c] - used[k] == 0 {
                        set.insert([a.min(b), a.max(b), c]);
                    }
                }
            }
        }
        set
    }

    fn imd5_oracle(used: &[i32], k: usize) -> BTreeSet<[usize; 5]> {
        let n = used.len();
        let mut set = BTreeSet::new();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        for e in 0..n {
                            if used[a] + used[b] + used[c] - used[d] - used[e] - used[k] == 0 {
                                let mut plus = [a, b, c];
                                plus.sort_unstable();
                                let minus = [d.min(e), d.max(e)];
                                set.insert([plus[0], plus[1], plus[2], minus[0], minus[1]]);
                            }
                        }
                    }
                }
            }
        }
        set
    }

    #[test]
    fn worked_three_subcarrier_example() {
        // I = {0,1,2}, k = 0: the four canonical products are
        // d0|d0|^2, d0|d1|^2, d0|d2|^2 and d1 d1 d2*.
        let terms = enum_imd3(&[0, 1, 2], 0).unwrap();
        assert_eq!(terms, vec![[0, 0, 0], [0, 1, 1], [0, 2, 2], [1, 1, 2]]);
    }

    #[test]
    fn single_subcarrier_degenerates() {
        assert_eq!(enum_imd3(&[0], 0).unwrap(), vec![[0, 0, 0]]);
        assert_eq!(enum_imd5(&[0], 0).unwrap(), vec![[0, 0, 0, 0, 0]]);
    }

    #[test]
    fn six_contiguous_counts() {
        let used: Vec<i32> = (0..6).collect();
        let c3: Vec<usize> = (0..6)
            .map(|k| enum_imd3(&used, k).unwrap().len())
            .collect();
        assert_eq!(c3, vec![12, 14, 15, 15, 14, 12]);
        let c5: Vec<usize> = (0..6)
            .map(|k| enum_imd5(&used, k).unwrap().len())
            .collect();
        assert_eq!(c5, vec![92, 101, 106, 106, 101, 92]);
    }

    #[test]
    fn enumeration_matches_bruteforce_oracle() {
        let cases: Vec<Vec<i32>> = vec![
            (0..6).collect(),
            vec![-3, -2, -1, 1, 2, 3],
            vec![-8, -2, 0, 5, 9],
            (0..9).collect(),
        ];
        for used in cases {
            for k in 0..used.len() {
                let got: BTreeSet<[usize; 3]> =
                    enum_imd3(&used, k).unwrap().into_iter().collect();
                assert_eq!(got, imd3_oracle(&used, k), "imd3 I={used:?} k={k}");
                let got5: BTreeSet<[usize; 5]> =
                    enum_imd5(&used, k).unwrap().into_iter().collect();
                assert_eq!(got5, imd5_oracle(&used, k), "imd5 I={used:?} k={k}");
            }
        }
    }

    #[test]
    fn enumeration_is_sorted_and_unique() {
        let used: Vec<i32> = (0..8).collect();
        for k in 0..8 {
            let t3 = enum_imd3(&used, k).unwrap();
            for w in t3.windows(2) {
                assert!(w[0] < w[1]);
            }
            let t5 = enum_imd5(&used, k).unwrap();
            for w in t5.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn closure_holds_on_every_tuple() {
        let used = vec![-11, -4, 0, 2, 7, 13];
        for k in 0..used.len() {
            for [a, b, c] in enum_imd3(&used, k).unwrap() {
                assert_eq!(used[a] + used[b] - used[c] - used[k], 0);
                assert!(a <= b);
            }
            for [a, b, c, d, e] in enum_imd5(&used, k).unwrap() {
                assert_eq!(used[a] + used[b] + used[c] - used[d] - used[e] - used[k], 0);
                assert!(a <= b && b <= c && d <= e);
            }
        }
    }

    #[test]
    fn full3_family_sizes_n6() {
        let used: Vec<i32> = (0..6).collect();
        let t = enum_full3(&used, 2).unwrap();
        assert_eq!(t.family_sizes(), [6, 6, 21, 36, 21, 56, 126, 126, 56]);
        assert_eq!(t.len(), 454);
    }

    #[test]
    fn full3_single_subcarrier() {
        let t = enum_full3(&[0], 0).unwrap();
        assert_eq!(t.family_sizes(), [1; 9]);
    }

    #[test]
    fn full3_tuples_unique_per_family() {
        let used: Vec<i32> = (0..5).collect();
        let t = enum_full3(&used, 0).unwrap();
        let uniq3 = |v: &Vec<[usize; 3]>| v.iter().collect::<BTreeSet<_>>().len() == v.len();
        let uniq2 = |v: &Vec<[usize; 2]>| v.iter().collect::<BTreeSet<_>>().len() == v.len();
        assert!(uniq2(&t.f3_pair) && uniq2(&t.f4_pair_mixed) && uniq2(&t.f5_pair_conj));
        assert!(uniq3(&t.f6_triple) && uniq3(&t.f7_triple_one_conj));
        assert!(uniq3(&t.f8_triple_two_conj) && uniq3(&t.f9_triple_conj));
    }

    #[test]
    fn feature_values_match_hand_computation() {
        // I = {0,1,2}, k = 0, r = (2, j, 1): features are
        // (2, 8, 2, 2, -1) in canonical order.
        let set = ImdTermSet::third_order(&[0, 1, 2], 0).unwrap();
        let r = [
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(1.0, 0.0),
        ];
        let f = features(&r, &Terms::Reduced(&set)).unwrap();
        let expect = [
            Complex64::new(2.0, 0.0),
            Complex64::new(8.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ];
        assert_eq!(f.len(), expect.len());
        for (a, b) in f.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn all_ones_input_gives_all_ones_features() {
        let used: Vec<i32> = (0..6).collect();
        let set = ImdTermSet::fifth_order(&used, 3).unwrap();
        let r = vec![Complex64::new(1.0, 0.0); 6];
        for f in features(&r, &Terms::Reduced(&set)).unwrap() {
            assert!((f - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
        let full = enum_full3(&used, 3).unwrap();
        for f in features(&r, &Terms::Full3(&full)).unwrap() {
            assert!((f - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn features_scale_homogeneously() {
        let used: Vec<i32> = (0..4).collect();
        let set = ImdTermSet::fifth_order(&used, 1).unwrap();
        let r: Vec<Complex64> = (0..4)
            .map(|i| Complex64::new(0.3 + i as f64 * 0.2, -0.1 * i as f64))
            .collect();
        let s = 1.7;
        let scaled: Vec<Complex64> = r.iter().map(|&x| x * s).collect();
        let f1 = features(&r, &Terms::Reduced(&set)).unwrap();
        let f2 = features(&scaled, &Terms::Reduced(&set)).unwrap();
        for (i, (a, b)) in f1.iter().zip(&f2).enumerate() {
            let degree = if i == 0 {
                1
            } else if i <= set.imd3.len() {
                3
            } else {
                5
            };
            let expect = a * s.powi(degree);
            assert!((b - expect).norm() < 1e-12 * expect.norm().max(1.0));
        }
    }

    #[test]
    fn reduced_support_flags_worked_example() {
        let used = vec![0, 1, 2];
        let t = enum_full3(&used, 0).unwrap();
        let in_support: Vec<usize> = (0..t.len())
            .filter(|&i| t.in_reduced_support(i, &used))
            .collect();
        // linear r_0 plus the four family-7 counterparts of the
        // canonical imd3 tuples.
        assert_eq!(in_support.len(), 5);
        let labels: BTreeSet<String> = in_support
            .iter()
            .map(|&i| t.term_label(i).1)
            .collect();
        let expect: BTreeSet<String> = [
            "r[0]",
            "r[0]*r[0]r[0]",
            "r[1]*r[0]r[1]",
            "r[2]*r[0]r[2]",
            "r[2]*r[1]r[1]",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        assert_eq!(labels, expect);
    }

    #[test]
    fn invalid_target_rejected() {
        assert!(enum_imd3(&[0, 1], 2).is_err());
        assert!(enum_imd5(&[0, 1], 5).is_err());
        assert!(enum_full3(&[0, 1], 2).is_err());
    }
}
