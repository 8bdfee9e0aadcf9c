use serde::{Deserialize, Serialize};

use super::special::{normal_sf, regularized_incomplete_beta};
use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    /// Infinite when every group is constant; stored as `null` in JSON.
    #[serde(with = "infinite_as_null")]
    pub f: f64,
    pub p_value: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One-way ANOVA. When every value is identical F = 0 and p = 1; when groups
/// differ but have zero spread, F = ∞ and p = 0.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewSamples {
            what: "groups",
            needed: 2,
            got: groups.len(),
        });
    }
    for g in groups {
        if g.len() < 2 {
            return Err(StatsError::TooFewSamples {
                what: "values per group",
                needed: 2,
                got: g.len(),
            });
        }
        check_finite(g)?;
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let (df_between, df_within) = (k - 1, n - k);
    let (f, p_value) = if ss_between == 0.0 {
        (0.0, 1.0)
    } else if ss_within == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
        let (d1, d2) = (df_between as f64, df_within as f64);
        let p = regularized_incomplete_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0)?;
        (f, p)
    };
    Ok(AnovaResult {
        f,
        p_value,
        df_between,
        df_within,
        ss_between,
        ss_within,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UMethod {
    /// Exact when the pooled sample has at most 16 values, normal otherwise.
    #[default]
    Auto,
    Exact,
    Normal,
}

pub const EXACT_AUTO_LIMIT: usize = 16;
pub const EXACT_MAX: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// min(U_a, U_b)
    pub u: f64,
    pub u_a: f64,
    pub u_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    /// Tie-corrected normal score with continuity correction, ≥ 0.
    pub z: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: UMethod,
}

/// Midranks (1-based) of the pooled sample plus the tie term Σ(t³ − t).
fn midranks(pooled: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = r;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTestResult, StatsError> {
    mann_whitney_u_with(a, b, UMethod::Auto)
}

/// Two-sided Mann-Whitney U test on midranks.
pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: UMethod) -> Result<UTestResult, StatsError> {
    for s in [a, b] {
        if s.is_empty() {
            return Err(StatsError::TooFewSamples {
                what: "values per sample",
                needed: 1,
                got: 0,
            });
        }
        check_finite(s)?;
    }
    let (n, m) = (a.len(), b.len());
    let total = n + m;
    let method = match method {
        UMethod::Auto if total <= EXACT_AUTO_LIMIT => UMethod::Exact,
        UMethod::Auto => UMethod::Normal,
        UMethod::Exact if total > EXACT_MAX => {
            return Err(StatsError::ExactTooLarge {
                max: EXACT_MAX,
                got: total,
            })
        }
        other => other,
    };
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r_a: f64 = ranks[..n].iter().sum();
    let u_a = r_a - (n * (n + 1)) as f64 / 2.0;
    let nm = (n * m) as f64;
    let u_b = nm - u_a;

    let nf = total as f64;
    let var = nm / 12.0 * ((nf + 1.0) - ties / (nf * (nf - 1.0)));
    let all_equal = pooled.iter().all(|&v| v == pooled[0]);
    let z = if var > 0.0 {
        (((u_a - nm / 2.0).abs() - 0.5) / var.sqrt()).max(0.0)
    } else {
        0.0
    };
    let p_value = if all_equal {
        1.0
    } else {
        match method {
            UMethod::Exact => exact_p(&ranks, n),
            _ => (2.0 * normal_sf(z)).min(1.0),
        }
    };
    Ok(UTestResult {
        u: u_a.min(u_b),
        u_a,
        u_b,
        n_a: n,
        n_b: m,
        z,
        p_value,
        method,
    })
}

/// Permutation distribution of the first sample's doubled rank sum over all
/// C(N, n) assignments; p = min(1, 2 · smaller tail).
fn exact_p(ranks: &[f64], n: usize) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let observed: usize = doubled[..n].iter().sum();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0u128; max_sum + 1]; n + 1];
    counts[0][0] = 1;
    for &r in &doubled {
        for k in (1..=n).rev() {
            let (lo, hi) = counts.split_at_mut(k);
            let (prev, cur) = (&lo[k - 1], &mut hi[0]);
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let dist = &counts[n];
    let all: u128 = dist.iter().sum();
    let lower: u128 = dist[..=observed].iter().sum();
    let upper: u128 = dist[observed..].iter().sum();
    let tail = lower.min(upper);
    (2.0 * (tail as f64 / all as f64)).min(1.0)
}

/// Five-number summary with linear-interpolation quantiles and 1.5·IQR
/// whiskers for box plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn quartiles(xs: &[f64]) -> Result<Quartiles, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::TooFewSamples {
            what: "values",
            needed: 1,
            got: 0,
        });
    }
    check_finite(xs)?;
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (s.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    let (q1, median, q3) = (q(0.25), q(0.5), q(0.75));
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = s
        .iter()
        .copied()
        .filter(|v| (fence_lo..=fence_hi).contains(v))
        .collect();
    Ok(Quartiles {
        min: s[0],
        q1,
        median,
        q3,
        max: s[s.len() - 1],
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        outliers: s
            .iter()
            .copied()
            .filter(|v| !(fence_lo..=fence_hi).contains(v))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pair counting: wins of `a` plus half the ties.
    fn pair_count_u(a: &[f64], b: &[f64]) -> f64 {
        let mut u = 0.0;
        for x in a {
            for y in b {
                if x > y {
                    u += 1.0;
                } else if x == y {
                    u += 0.5;
                }
            }
        }
        u
    }

    /// Brute-force over every way to pick the first sample from the pool.
    fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let (n, total) = (a.len(), pooled.len());
        let observed = pair_count_u(a, b);
        let (mut lower, mut upper, mut all) = (0u64, 0u64, 0u64);
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let (xs, ys): (Vec<_>, Vec<_>) = (0..total).partition(|&i| mask & (1 << i) != 0);
            let xs: Vec<f64> = xs.iter().map(|&i| pooled[i]).collect();
            let ys: Vec<f64> = ys.iter().map(|&i| pooled[i]).collect();
            let u = pair_count_u(&xs, &ys);
            all += 1;
            lower += u64::from(u <= observed);
            upper += u64::from(u >= observed);
        }
        (2.0 * lower.min(upper) as f64 / all as f64).min(1.0)
    }

    #[test]
    fn complete_separation() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert_eq!(r.u_a, 0.0);
        // 2 of 6 splits are at least this extreme
        assert!((r.p_value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn interleaved_pair_count() {
        let (a, b) = ([1.0, 3.0, 5.0], [2.0, 4.0, 6.0]);
        let r = mann_whitney_u(&a, &b).unwrap();
        assert_eq!(pair_count_u(&a, &b), 3.0);
        assert_eq!(r.u_a, 3.0);
        assert_eq!(r.u, 3.0);
    }

    #[test]
    fn identical_values() {
        let r = mann_whitney_u(&[0.5; 4], &[0.5; 3]).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.z, 0.0);
        let r = mann_whitney_u_with(&[0.5; 40], &[0.5; 30], UMethod::Normal).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn tie_corrected_normal_reference() {
        // scipy.stats.mannwhitneyu(a, b, method="asymptotic", use_continuity=True)
        let a = [1.0, 2.0, 2.0, 3.0, 5.0, 7.0, 8.0, 8.0, 9.0];
        let b = [4.0, 6.0, 6.0, 10.0, 11.0, 12.0, 12.0, 13.0, 15.0, 2.0];
        let r = mann_whitney_u_with(&a, &b, UMethod::Normal).unwrap();
        assert_eq!(r.u_a, 20.0);
        assert!((r.p_value - 0.044793690496876724).abs() < 1e-12);
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let a = [1.0, 2.0, 2.0, 4.0, 4.0];
        let b = [2.0, 3.0, 4.0, 5.0, 5.0, 6.0];
        let r = mann_whitney_u_with(&a, &b, UMethod::Exact).unwrap();
        assert!((r.p_value - enumerated_p(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn exact_too_large() {
        let a: Vec<f64> = (0..60).map(f64::from).collect();
        assert!(matches!(
            mann_whitney_u_with(&a, &a, UMethod::Exact),
            Err(StatsError::ExactTooLarge { .. })
        ));
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn anova_identical_groups() {
        let r = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(r.f, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = anova_oneway(&[vec![4.0; 3], vec![4.0; 3]]).unwrap();
        assert_eq!((r.f, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn anova_fixture() {
        let r = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]]).unwrap();
        assert_eq!(r.f, 3.0);
        assert_eq!((r.df_between, r.df_within), (2, 6));
        // F(2, 6) survival: (1 + F/3)^-3
        assert!((r.p_value - 0.125).abs() < 1e-12);
    }

    #[test]
    fn anova_zero_spread_distinct_means() {
        let r = anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(r.f.is_infinite());
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn anova_preconditions() {
        assert!(anova_oneway(&[vec![1.0, 2.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0, f64::NAN], vec![3.0, 4.0]]).is_err());
    }

    #[test]
    fn quartiles_linear_interpolation() {
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.75, 2.5, 3.25));
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(q.outliers, vec![100.0]);
        assert_eq!(q.whisker_high, 4.0);
    }

    fn sample() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec((0u8..12).prop_map(|v| f64::from(v) / 4.0), 1..9)
    }

    proptest! {
        #[test]
        fn u_sums_to_nm(a in sample(), b in sample()) {
            let r = mann_whitney_u(&a, &b).unwrap();
            prop_assert_eq!(r.u_a + r.u_b, (a.len() * b.len()) as f64);
            prop_assert!(r.u >= 0.0 && r.u <= (a.len() * b.len()) as f64);
            prop_assert_eq!(r.u_a, pair_count_u(&a, &b));
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }

        #[test]
        fn symmetric_under_swap(a in sample(), b in sample()) {
            for method in [UMethod::Exact, UMethod::Normal] {
                let r = mann_whitney_u_with(&a, &b, method).unwrap();
                let s = mann_whitney_u_with(&b, &a, method).unwrap();
                prop_assert_eq!(r.u, s.u);
                prop_assert_eq!(r.p_value, s.p_value);
            }
        }

        #[test]
        fn exact_matches_enumeration(a in sample(), b in sample()) {
            let r = mann_whitney_u_with(&a, &b, UMethod::Exact).unwrap();
            prop_assert!((r.p_value - enumerated_p(&a, &b)).abs() < 1e-12);
        }

        #[test]
        fn exact_close_to_normal_without_ties(
            perm in Just((0..16).collect::<Vec<u32>>()).prop_shuffle()
        ) {
            let a: Vec<f64> = perm[..8].iter().map(|&v| f64::from(v)).collect();
            let b: Vec<f64> = perm[8..].iter().map(|&v| f64::from(v)).collect();
            let e = mann_whitney_u_with(&a, &b, UMethod::Exact).unwrap().p_value;
            let n = mann_whitney_u_with(&a, &b, UMethod::Normal).unwrap().p_value;
            prop_assert!((e - n).abs() < 0.02, "exact {} normal {}", e, n);
        }

        #[test]
        fn anova_shift_invariant(
            g in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 3..8), 2..5),
            c in -5.0f64..5.0,
        ) {
            let shifted: Vec<Vec<f64>> = g.iter().map(|v| v.iter().map(|x| x + c).collect()).collect();
            let (a, b) = (anova_oneway(&g).unwrap(), anova_oneway(&shifted).unwrap());
            prop_assert!((a.f - b.f).abs() <= 1e-6 * a.f.max(1.0));
        }
    }

    #[test]
    fn infinite_f_roundtrips_through_json() {
        let r = anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!((r.f, r.p_value), (f64::INFINITY, 0.0));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"f\":null"));
        assert_eq!(serde_json::from_str::<AnovaResult>(&json).unwrap(), r);
    }
}
