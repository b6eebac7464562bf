//! Jaro and Jaro-Winkler similarity.
//!
//! Characters "in common" are found greedily left to right inside a match
//! window of `floor(max(d, r) / 2) - 1` positions. Transpositions are counted
//! as half the number of matched characters that appear out of order,
//! rounded down. The Winkler prefix `g` counts the leading characters that
//! agree, up to four, stopping at the first disagreement.

use serde::{Deserialize, Serialize};

/// Weights for the three Jaro components and the Winkler prefix boost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JaroConfig {
    /// Weight on the fraction of the first string that is matched.
    pub weight_a: f64,
    /// Weight on the fraction of the second string that is matched.
    pub weight_b: f64,
    /// Weight on the fraction of matches that are not transposed.
    pub weight_t: f64,
    pub prefix_scale: f64,
    pub max_prefix: usize,
}

impl Default for JaroConfig {
    fn default() -> Self {
        JaroConfig {
            weight_a: 1.0 / 3.0,
            weight_b: 1.0 / 3.0,
            weight_t: 1.0 / 3.0,
            prefix_scale: 0.1,
            max_prefix: 4,
        }
    }
}

impl JaroConfig {
    /// Checks that the weights sum to one and the prefix boost cannot push a
    /// score above one.
    pub fn validate(&self) -> Result<(), String> {
        let sum = self.weight_a + self.weight_b + self.weight_t;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("Jaro weights sum to {sum}, expected 1"));
        }
        if [self.weight_a, self.weight_b, self.weight_t].iter().any(|w| *w < 0.0) {
            return Err("Jaro weights must be non-negative".into());
        }
        if self.prefix_scale < 0.0 || self.prefix_scale * self.max_prefix as f64 > 1.0 {
            return Err(format!(
                "prefix_scale * max_prefix = {} must lie in [0, 1]",
                self.prefix_scale * self.max_prefix as f64
            ));
        }
        Ok(())
    }
}

/// Matched-character statistics for a string pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Matches {
    common: usize,
    transpositions: usize,
}

fn count_matches<T: PartialEq>(s1: &[T], s2: &[T]) -> Matches {
    let (d, r) = (s1.len(), s2.len());
    let window = (d.max(r) / 2).saturating_sub(1);
    let mut used1 = vec![false; d];
    let mut used2 = vec![false; r];
    let mut common = 0;
    for (i, ch) in s1.iter().enumerate() {
        let lo = i.saturating_sub(window);
        let hi = (i + window + 1).min(r);
        for j in lo..hi {
            if !used2[j] && s2[j] == *ch {
                used1[i] = true;
                used2[j] = true;
                common += 1;
                break;
            }
        }
    }
    if common == 0 {
        return Matches {
            common: 0,
            transpositions: 0,
        };
    }
    let in_order2 = s2.iter().zip(&used2).filter(|(_, u)| **u).map(|(c, _)| c);
    let out_of_order = s1
        .iter()
        .zip(&used1)
        .filter(|(_, u)| **u)
        .map(|(c, _)| c)
        .zip(in_order2)
        .filter(|(x, y)| x != y)
        .count();
    Matches {
        common,
        transpositions: out_of_order / 2,
    }
}

/// Jaro similarity on pre-split character slices.
pub fn jaro_chars<T: PartialEq>(s1: &[T], s2: &[T], cfg: &JaroConfig) -> f64 {
    if s1.is_empty() || s2.is_empty() {
        return 0.0;
    }
    let m = count_matches(s1, s2);
    if m.common == 0 {
        return 0.0;
    }
    let c = m.common as f64;
    cfg.weight_a * (c / s1.len() as f64)
        + cfg.weight_b * (c / s2.len() as f64)
        + cfg.weight_t * ((c - m.transpositions as f64) / c)
}

/// Number of leading positions (up to `max_prefix`) on which the strings agree.
pub fn common_prefix<T: PartialEq>(s1: &[T], s2: &[T], max_prefix: usize) -> usize {
    s1.iter().zip(s2).take(max_prefix).take_while(|(a, b)| a == b).count()
}

pub fn jaro_winkler_chars<T: PartialEq>(s1: &[T], s2: &[T], cfg: &JaroConfig) -> f64 {
    let j = jaro_chars(s1, s2, cfg);
    let g = common_prefix(s1, s2, cfg.max_prefix) as f64;
    j + cfg.prefix_scale * g * (1.0 - j)
}

fn with_chars<R>(s1: &str, s2: &str, f: impl FnOnce(&[u8], &[u8]) -> R, g: impl FnOnce(&[char], &[char]) -> R) -> R {
    if s1.is_ascii() && s2.is_ascii() {
        f(s1.as_bytes(), s2.as_bytes())
    } else {
        let a: Vec<char> = s1.chars().collect();
        let b: Vec<char> = s2.chars().collect();
        g(&a, &b)
    }
}

/// Jaro similarity in `[0, 1]`; zero when either string is empty.
pub fn jaro(s1: &str, s2: &str, cfg: &JaroConfig) -> f64 {
    with_chars(s1, s2, |a, b| jaro_chars(a, b, cfg), |a, b| jaro_chars(a, b, cfg))
}

/// Jaro-Winkler similarity: `jaro + prefix_scale * g * (1 - jaro)`.
pub fn jaro_winkler(s1: &str, s2: &str, cfg: &JaroConfig) -> f64 {
    with_chars(
        s1,
        s2,
        |a, b| jaro_winkler_chars(a, b, cfg),
        |a, b| jaro_winkler_chars(a, b, cfg),
    )
}

/// Agreement indicator: `true` iff `score > cutoff` (strict).
pub fn dichotomize(score: f64, cutoff: f64) -> bool {
    score > cutoff
}
